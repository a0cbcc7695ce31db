"""
Characteristics, phase-space Jacobian and bounce-back
======================================================

Trajectories of the phase-space flow are integrated with classical RK4; the
Jacobian of the flow is carried along through its divergence.  In a channel
the walls reflect particles with the bounce-back rule ``v+ = 2 V_W - v-``.
"""

import numpy as np

from iktflow import (AnalyticFlow, FluidParams, MaxwellianPdf, PhasePoint, PlanarWall, WallModel, flow_map,
                     integrate)

rng = np.random.default_rng(2)
tg = AnalyticFlow("taylor_green_2d", FluidParams.from_nu(0.01, 1.0, 1.5))
provider = MaxwellianPdf.from_flow(tg).context

r0 = rng.random((6, 3)) * 2 * np.pi
v0 = rng.normal(size=(6, 3))
r1, v1, J1 = flow_map(r0, v0, 0.0, 0.5, 0.01, provider)
r2, v2, J2 = flow_map(r1, v1, 0.5, 0.0, 0.01, provider)
print("round trip |dr|, |dv|:", np.max(np.abs(r2 - r0)), np.max(np.abs(v2 - v0)))
print("Jacobian forward * backward - 1:", np.max(np.abs(J1 * J2 - 1)))
print("forward Jacobians:", np.round(J1, 4))

# Poiseuille channel between y = -1 and y = 1
channel = AnalyticFlow("poiseuille", FluidParams.from_nu(0.05, 1.0, 1.0))
walls = WallModel([PlanarWall.sliding((0, -1, 0), (0, 1, 0), (0, 0, 0)),
                   PlanarWall.sliding((0, 1, 0), (0, -1, 0), (0, 0, 0))])
tr = integrate(PhasePoint(np.array([0.0, 0.2, 0.0]), np.array([0.5, 3.0, 0.0])), 0.0, 2.0, 0.02,
               MaxwellianPdf.from_flow(channel).context, walls)
print(f"{len(tr.events)} wall events; max |y| = {np.max(np.abs(tr.r[:, 1])):.12f}")
for ev in tr.events:
    print(f"  t_c={ev.t_c:.6f}  v-={np.round(ev.v_minus, 4)}  v+={np.round(ev.v_plus, 4)}")
