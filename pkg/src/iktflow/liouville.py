"""Liouville transport of the pdf and the moment checks that tie it back to INSE.

Two routes to the Liouville residual ``Lf = d_t f + div_r(v f) + div_v(F f)``
are provided:

* :func:`liouville_residual` differences an arbitrary pdf evaluator, and
* :func:`maxwellian_liouville` evaluates it in closed form for the local
  Maxwellian from the analytic derivatives of the fluid fields.

:func:`moment_residuals` integrates the closed form over velocity space and
compares the result with the fluid-side residuals of :mod:`iktflow.fields`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ContractError
from .fields import (AnalyticFlow, FluidParams, FluidSample, continuity_residual, energy_residual,
                     eval_analytic, momentum_residual, poisson_residual)
from .kinetics import MaxwellianParams, QuadratureSet, maxwellian_eval, vth_from_pressure
from .phase_flow import PlanarWall, flow_map
from .vector_field import (ContextProvider, FieldContext, PhasePoint, maxwellian_context, phase_divergence,
                           vector_field_X)

PdfField = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


class MaxwellianPdf:
    """Local Maxwellian built from fluid fields given as a function of ``(r, t)``.

    Instances are pdf evaluators ``f(r, v, t)`` and also act as the matching
    context provider for the vector field (:meth:`context`).
    """

    def __init__(self, sample_provider: Callable[[np.ndarray, float], FluidSample], params: FluidParams):
        self.sample_provider = sample_provider
        self.params = params

    @classmethod
    def from_flow(cls, flow: AnalyticFlow) -> "MaxwellianPdf":
        return cls(lambda r, t: eval_analytic(flow, r, t), flow.params)

    def maxwellian_params(self, r, t) -> MaxwellianParams:
        s = self.sample_provider(r, t)
        return MaxwellianParams(self.params.rho0, s.V, vth_from_pressure(s.p + self.params.P0, self.params.rho0))

    def __call__(self, r, v, t) -> np.ndarray:
        return maxwellian_eval(self.maxwellian_params(r, t), v)

    def context(self, r, t) -> FieldContext:
        return maxwellian_context(self.sample_provider(r, t), self.params)


def transport_pdf(f0: Callable[[np.ndarray, np.ndarray], np.ndarray], x: PhasePoint, t0: float,
                  provider: ContextProvider, dt: float) -> np.ndarray:
    """``f(x, t) = f0(chi(x, t, t0)) / J`` via a backward characteristic.

    Integrating backward from ``(x, t)`` to ``t0`` yields the departure point and
    the inverse Jacobian ``1/J`` in one pass.
    """
    r0, v0, J_back = flow_map(x.r, x.v, x.t, t0, dt, provider, track_jacobian=True)
    return f0(r0, v0) * J_back


def liouville_residual(f: PdfField, x: PhasePoint, provider: ContextProvider, h: float = 1e-4) -> np.ndarray:
    """Central-difference ``d_t f + v.grad_r f + div_v(F f)`` at ``x`` with step ``h``."""
    r, v, t = x.r, x.v, x.t
    dtf = (f(r, v, t + h) - f(r, v, t - h)) / (2 * h)
    stream = 0.0
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        stream = stream + v[..., i] * (f(r + e, v, t) - f(r - e, v, t)) / (2 * h)
    ctx = provider(r, t)
    force = 0.0
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        Fp = vector_field_X(PhasePoint(r, v + e, t), ctx)[1][..., i] * f(r, v + e, t)
        Fm = vector_field_X(PhasePoint(r, v - e, t), ctx)[1][..., i] * f(r, v - e, t)
        force = force + (Fp - Fm) / (2 * h)
    return dtf + stream + force


def maxwellian_liouville(sample: FluidSample, params: FluidParams, v, ctx: Optional[FieldContext] = None) -> np.ndarray:
    """Closed-form ``L f_M`` at velocities ``v`` from the analytic field derivatives.

    ``sample`` must broadcast against ``v[..., :]`` (use ``ctx.expand()`` style
    singleton axes for per-node velocity sets).  Uses
    ``Lf = f [d_t ln f + v.grad ln f + div_v F + F.grad_v ln f]``.
    """
    if ctx is None:
        ctx = maxwellian_context(sample, params)
    s = sample
    p1 = ctx.p1
    vth2 = 2 * p1 / params.rho0
    v = np.asarray(v, dtype=float)
    u = v - s.V
    u2 = np.einsum("...i,...i->...", u, u)
    shape = u2 / vth2 - 1.5
    f = params.rho0 * np.pi**-1.5 * vth2**-1.5 * np.exp(-u2 / vth2)
    dt_ln = shape * s.dtp / p1 + (2 / vth2) * np.einsum("...i,...i->...", u, s.dtV)
    Gv = np.einsum("...ij,...j->...i", s.gradV, v)
    stream = shape * np.einsum("...i,...i->...", v, s.gradp) / p1 + (2 / vth2) * np.einsum("...i,...i->...", u, Gv)
    x = PhasePoint(np.zeros_like(v), v)
    F = vector_field_X(x, ctx)[1]
    div_F = phase_divergence(x, ctx)
    force = div_F - (2 / vth2) * np.einsum("...i,...i->...", F, u)
    return f * (dt_ln + stream + force)


@dataclass
class Norms:
    linf: float
    l2: float

    @classmethod
    def of(cls, values) -> "Norms":
        a = np.abs(np.asarray(values, dtype=float))
        if a.ndim > 1:
            a = np.sqrt(np.sum(a.reshape(a.shape[0], -1) ** 2, axis=1))
        return cls(float(np.max(a)) if a.size else 0.0, float(np.sqrt(np.mean(a**2))) if a.size else 0.0)


@dataclass
class ResidualReport:
    """Residual norms over a sampled point set.

    The top-level fields are fluid-side INSE residuals plus the kinetic
    Liouville residual; ``kinetic`` holds the velocity moments of ``Lf`` and
    ``mismatch`` the kinetic-minus-fluid differences.
    """

    continuity: Norms
    momentum: Norms
    energy: Norms
    poisson: Norms
    liouville: Norms
    kinetic: dict = field(default_factory=dict)
    mismatch: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def row(self) -> dict:
        return dict(continuity_L2=self.continuity.l2, momentum_L2=self.momentum.l2, energy_L2=self.energy.l2,
                    poisson_L2=self.poisson.l2, liouville_L2=self.liouville.l2)


def moment_residuals(flow: AnalyticFlow, t: float, points, order: int = 8) -> ResidualReport:
    """Velocity moments of ``L f_M`` versus the INSE residuals at ``points`` (``(n, 3)``).

    Weights ``1``, ``u = v - V`` and ``E = u^2/3`` give, respectively, the
    continuity residual ``rho0 div V``, the momentum residual and (for solenoidal
    fields) the energy residual.  The ``u`` weight is the ``v`` moment with the
    continuity part removed.
    """
    if 2 * order - 1 < 5:
        raise ContractError("moment residuals need quadrature exact through degree 5 (order >= 3)")
    params = flow.params
    points = np.asarray(points, dtype=float)
    s = eval_analytic(flow, points, t)
    ctx = maxwellian_context(s, params)
    quad = QuadratureSet(order, s.V, vth_from_pressure(ctx.p1, params.rho0))
    v = quad.nodes
    Lf = maxwellian_liouville(ctx.expand().sample, params, v, ctx.expand())
    u = v - s.V[:, None, :]
    kin_cont = quad.integrate(Lf)
    kin_mom = quad.integrate(Lf[..., None] * u)
    kin_energy = quad.integrate(Lf * np.einsum("...i,...i->...", u, u) / 3)
    fl_cont = continuity_residual(s, params)
    fl_mom = momentum_residual(s, params)
    fl_energy = energy_residual(s, params)
    report = ResidualReport(
        continuity=Norms.of(fl_cont),
        momentum=Norms.of(fl_mom),
        energy=Norms.of(fl_energy),
        poisson=Norms.of(poisson_residual(s, params)),
        liouville=Norms.of(Lf),
        kinetic=dict(continuity=Norms.of(kin_cont), momentum=Norms.of(kin_mom), energy=Norms.of(kin_energy)),
        mismatch=dict(continuity=Norms.of(kin_cont - fl_cont), momentum=Norms.of(kin_mom - fl_mom),
                      energy=Norms.of(kin_energy - fl_energy)),
        metadata=dict(case=flow.case, t=float(t), n_points=int(points.shape[0]), order=int(order)),
    )
    return report


@dataclass
class BoundaryReport:
    reflection_ok: bool
    density_ok: bool
    pressure_ok: bool
    reflection_error: float
    density_error: float
    pressure_error: float

    @property
    def ok(self) -> bool:
        return self.reflection_ok and self.density_ok and self.pressure_ok


def kinetic_bc_check(sample: FluidSample, wall: PlanarWall, t: float, params: FluidParams, order: int = 8,
                     p_W=None, tol: float = 1e-12) -> BoundaryReport:
    """Check the kinetic wall conditions for the Maxwellian built from ``sample`` at wall points.

    * reflection: ``f(r_W, v) = f(r_W, 2 V_W - v)`` on the quadrature nodes,
    * density: ``int f d3v = rho0``,
    * pressure: ``int |v - V_W|^2/3 f d3v - P0 = p_W`` (``p_W`` defaults to ``sample.p``).

    Report-only; nothing is raised when a condition fails.
    """
    V_W = wall.wall_velocity(t)
    p1 = sample.p + params.P0
    mp = MaxwellianParams(params.rho0, sample.V, vth_from_pressure(p1, params.rho0))
    quad = QuadratureSet(order, sample.V, mp.vth)
    v = quad.nodes
    mp_nodes = MaxwellianParams(params.rho0, sample.V[..., None, :], np.asarray(mp.vth)[..., None])
    f_in = maxwellian_eval(mp_nodes, v)
    f_out = maxwellian_eval(mp_nodes, 2 * V_W - v)
    refl = float(np.max(np.abs(f_out - f_in)) / np.max(f_in))
    rho = quad.integrate(f_in)
    w = v - V_W
    p1_wall = quad.integrate(f_in * np.einsum("...i,...i->...", w, w) / 3)
    target = sample.p if p_W is None else np.asarray(p_W, dtype=float)
    dens = float(np.max(np.abs(rho - params.rho0)) / params.rho0)
    pres = float(np.max(np.abs(p1_wall - params.P0 - target)) / np.max(p1))
    return BoundaryReport(refl <= 8 * np.finfo(float).eps, dens <= tol, pres <= tol, refl, dens, pres)
