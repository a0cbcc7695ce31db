"""Phase-space vector field ``X(x, t) = (v, F0 + F1)`` of the NS dynamical system.

The acceleration is assembled from the fluid fields at ``(r, t)`` and the
closure moments of the pdf.  With ``u = v - V``::

    F0 = (div Pi - grad p1 + f) / rho + u . grad V + nu lap V
    F1 = (u / 2) B + (vth^2 / 2 p1) div Pi (u^2 / vth^2 - 3/2)
    B  = d_t ln p1 - V . [rho d_t V + rho V . grad V - f - mu lap V] / p1
         + div Q / p1 - [div Pi] . Q / (2 p1)

The first-moment cancellation of the pressure terms in ``F0`` only works with
the bracket ``(div Pi - grad p1 + f) / rho``; this grouping is what the
Maxwellian-mean-force identity tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ContractError, PositivityError
from .fields import FluidParams, FluidSample


@dataclass
class PhasePoint:
    r: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if not (np.all(np.isfinite(self.r)) and np.all(np.isfinite(self.v)) and np.isfinite(self.t)):
            raise ContractError("phase point has non-finite components")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.r, self.v], axis=-1)


@dataclass
class FieldContext:
    """Everything ``F`` needs at one position and time (batched over leading axes)."""

    sample: FluidSample
    params: FluidParams
    p1: np.ndarray
    divPi: np.ndarray
    divQ: np.ndarray
    dt_lnp1: np.ndarray
    divPi_dot_Q: np.ndarray

    def __post_init__(self):
        self.p1 = np.asarray(self.p1, dtype=float)
        if not np.all(self.p1 > 0):
            raise PositivityError("kinetic pressure must be strictly positive in the field context")
        for name in ("divPi", "divQ", "dt_lnp1", "divPi_dot_Q"):
            value = np.asarray(getattr(self, name), dtype=float)
            if not np.all(np.isfinite(value)):
                raise ContractError(f"non-finite {name} in field context")
            setattr(self, name, value)

    @property
    def vth2(self) -> np.ndarray:
        return 2.0 * self.p1 / self.params.rho0

    def expand(self) -> "FieldContext":
        """Insert a singleton axis before the component axes so a context of
        batch shape ``(...)`` broadcasts against phase points of shape ``(..., M)``."""
        s = self.sample
        sample = FluidSample(
            V=s.V[..., None, :], p=s.p[..., None], f_ext=s.f_ext[..., None, :],
            gradV=s.gradV[..., None, :, :], lapV=s.lapV[..., None, :], gradp=s.gradp[..., None, :],
            dtV=s.dtV[..., None, :], dtp=s.dtp[..., None],
        )
        return FieldContext(sample, self.params, self.p1[..., None], self.divPi[..., None, :],
                            self.divQ[..., None], self.dt_lnp1[..., None], self.divPi_dot_Q[..., None])


ContextProvider = Callable[[np.ndarray, float], FieldContext]


def momentum_dtV(sample: FluidSample, params: FluidParams) -> np.ndarray:
    """``d_t V`` implied by the momentum equation: ``(-grad p + f + mu lap V)/rho - V.grad V``."""
    conv = np.einsum("...ij,...j->...i", sample.gradV, sample.V)
    return (-sample.gradp + sample.f_ext + params.mu * sample.lapV) / params.rho0 - conv


def maxwellian_context(sample: FluidSample, params: FluidParams, substitute_dtV: bool = False) -> FieldContext:
    """Context under the Maxwellian closure ``Pi = p1 I``, ``Q = 0``.

    With ``substitute_dtV`` the sample's ``dtV`` is replaced by
    :func:`momentum_dtV`, which is how the kinetic solver supplies it.
    """
    p1 = np.asarray(sample.p, dtype=float) + params.P0
    if not np.all(p1 > 0):
        raise PositivityError(f"kinetic pressure p + P0 must be strictly positive (min {np.min(p1):.3e})")
    if substitute_dtV:
        sample = replace(sample, dtV=momentum_dtV(sample, params))
    zero = np.zeros_like(p1)
    return FieldContext(sample, params, p1, sample.gradp, zero, sample.dtp / p1, zero)


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _matvec(G, u):
    return np.einsum("...ij,...j->...i", G, u)


def _rel(x: PhasePoint, ctx: FieldContext) -> np.ndarray:
    return x.v - ctx.sample.V


def scalar_bracket(ctx: FieldContext) -> np.ndarray:
    """The braced scalar multiplying ``u / 2`` in ``F1``."""
    s, prm, p1 = ctx.sample, ctx.params, ctx.p1
    rho = prm.rho0
    inner = rho * s.dtV + rho * _matvec(s.gradV, s.V) - s.f_ext - prm.mu * s.lapV
    return ctx.dt_lnp1 - _dot(s.V, inner) / p1 + ctx.divQ / p1 - ctx.divPi_dot_Q / (2 * p1)


def force_F0(x: PhasePoint, ctx: FieldContext) -> np.ndarray:
    s, prm = ctx.sample, ctx.params
    u = _rel(x, ctx)
    pressure = (ctx.divPi - s.gradp + s.f_ext) / prm.rho0
    return pressure + _matvec(s.gradV, u) + prm.nu * s.lapV


def force_F1(x: PhasePoint, ctx: FieldContext) -> np.ndarray:
    u = _rel(x, ctx)
    B = scalar_bracket(ctx)
    u2 = _dot(u, u)
    radial = (u2 / ctx.vth2 - 1.5)[..., None] * ctx.divPi / ctx.params.rho0
    return 0.5 * B[..., None] * u + radial


def vector_field_X(x: PhasePoint, ctx: FieldContext) -> tuple[np.ndarray, np.ndarray]:
    """``(dr/dt, dv/dt) = (v, F0 + F1)``."""
    F = force_F0(x, ctx) + force_F1(x, ctx)
    if not np.all(np.isfinite(F)):
        raise ContractError("vector field evaluated to non-finite values")
    return np.broadcast_to(x.v, F.shape).copy(), F


def phase_divergence(x: PhasePoint, ctx: FieldContext) -> np.ndarray:
    """``div_x X = div_v F``, in closed form.

    ``div_v (u.grad V) = tr grad V``; ``div_v F1 = 3B/2 + div Pi . u / p1``.
    """
    u = _rel(x, ctx)
    return np.trace(ctx.sample.gradV, axis1=-2, axis2=-1) + 1.5 * scalar_bracket(ctx) + _dot(ctx.divPi, u) / ctx.p1


def phase_divergence_fd(x: PhasePoint, ctx: FieldContext, h: float = 1e-3) -> np.ndarray:
    """Six-point central-difference ``div_v F`` (cross-check of :func:`phase_divergence`)."""
    total = 0.0
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        Fp = vector_field_X(PhasePoint(x.r, x.v + e, x.t), ctx)[1][..., i]
        Fm = vector_field_X(PhasePoint(x.r, x.v - e, x.t), ctx)[1][..., i]
        total = total + (Fp - Fm) / (2 * h)
    return total
