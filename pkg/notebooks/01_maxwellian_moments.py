"""
Maxwellian moments on a Gauss-Hermite rule
===========================================

The kinetic description starts from the local Maxwellian.  Its velocity
moments, computed with a tensor Gauss-Hermite rule centred on the local
velocity, give back the fluid fields exactly.
"""

import numpy as np

from iktflow import MaxwellianParams, QuadratureSet, maxwellian_eval, moments

rng = np.random.default_rng(0)

# a handful of random local states (rho0, V, p1)
rho0 = 1.3
V = rng.normal(size=(5, 3))
p1 = rng.uniform(0.2, 3.0, size=5)

mp = MaxwellianParams.from_pressure(rho0, V, p1)
quad = QuadratureSet(8, V, mp.vth)
f = maxwellian_eval(MaxwellianParams(rho0, V[:, None, :], mp.vth[:, None]), quad.nodes)
m = moments(f, quad)

print("nodes per point:", quad.size, " exact through degree", quad.exact_degree)
print("max |rho - rho0|     ", np.max(np.abs(m.rho - rho0)))
print("max |V - V_in|       ", np.max(np.abs(m.V - V)))
print("max |p1 - p1_in|/p1  ", np.max(np.abs(m.p1 - p1) / p1))
print("max |Pi - p1 I|      ", np.max(np.abs(m.Pi - p1[:, None, None] * np.eye(3))))
print("max |Q|              ", np.max(np.abs(m.Q)))

# The order matters only through the polynomial degree of the weight.  The
# pressure moment has degree 2 and N = 2 is exact through degree 3, so even
# the smallest rule reproduces it.
for order in (2, 4, 8):
    q = QuadratureSet(order, V, mp.vth)
    fo = maxwellian_eval(MaxwellianParams(rho0, V[:, None, :], mp.vth[:, None]), q.nodes)
    print(order, np.max(np.abs(moments(fo, q).p1 - p1)))
