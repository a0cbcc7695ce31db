"""Fluid fields: analytic benchmark flows, gridded states and INSE residuals.

Conventions
-----------
* Vectors carry their components in the last axis, ``(..., 3)``; velocity
  gradients are ``(..., 3, 3)`` with ``gradV[..., i, j] = dV_i / dx_j`` so that
  ``(V . grad) V = gradV @ V``.
* Every routine broadcasts over arbitrary leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields as dc_fields, replace
from functools import cached_property
from typing import Optional

import numpy as np

from . import grid as fd
from .errors import ConfigurationError, ContractError, PositivityError
from .grid import Grid

CASES = ("rest", "uniform", "rigid_rotation", "taylor_green_2d", "taylor_green_3d", "poiseuille")


@dataclass(frozen=True)
class FluidParams:
    """Constant material parameters in code units.

    ``P0`` is the pressure offset that turns the fluid pressure into the kinetic
    pressure ``p1 = p + P0``.
    """

    rho0: float = 1.0
    mu: float = 0.01
    P0: float = 1.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ConfigurationError(f"rho0 must be positive, got {self.rho0}")
        if not self.mu > 0:
            raise ConfigurationError(f"mu must be positive, got {self.mu}")
        if not self.P0 >= 0:
            raise ConfigurationError(f"P0 must be non-negative, got {self.P0}")

    @classmethod
    def from_nu(cls, nu: float, rho0: float = 1.0, P0: float = 1.0) -> "FluidParams":
        return cls(rho0=rho0, mu=nu * rho0, P0=P0)

    @property
    def nu(self) -> float:
        return self.mu / self.rho0


@dataclass
class FluidSample:
    """Fluid fields and their derivatives at one point (or a batch of points).

    ``lapp`` (pressure Laplacian), ``divf`` (force divergence) and ``div_conv``
    (divergence of ``V . grad V``) are only needed by :func:`poisson_residual`.
    When ``div_conv`` is missing it is taken as ``tr(gradV @ gradV)``, which is
    exact for solenoidal fields.
    """

    V: np.ndarray
    p: np.ndarray
    f_ext: np.ndarray
    gradV: np.ndarray
    lapV: np.ndarray
    gradp: np.ndarray
    dtV: np.ndarray
    dtp: np.ndarray
    lapp: Optional[np.ndarray] = None
    divf: Optional[np.ndarray] = None
    div_conv: Optional[np.ndarray] = None

    def __post_init__(self):
        for f in dc_fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            value = np.asarray(value, dtype=float)
            if not np.all(np.isfinite(value)):
                raise ContractError(f"non-finite entries in FluidSample.{f.name}")
            setattr(self, f.name, value)

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.p.shape

    def divergence(self) -> np.ndarray:
        return np.trace(self.gradV, axis1=-2, axis2=-1)

    def take(self, index) -> "FluidSample":
        """Sub-select batch entries (any numpy index on the leading axes)."""
        out = {}
        for f in dc_fields(self):
            value = getattr(self, f.name)
            out[f.name] = None if value is None else value[index]
        return FluidSample(**out)


@dataclass(frozen=True)
class AnalyticFlow:
    """A closed-form flow from the benchmark corpus.

    Parameters
    ----------
    case : one of :data:`CASES`
    amplitude : velocity amplitude (Taylor-Green) or centreline speed (Poiseuille)
    wavenumber : Taylor-Green wavenumber ``k``
    omega : angular velocity of the rigid rotation about ``z``
    background : uniform velocity (``uniform`` case, or convection of Taylor-Green 2D)
    half_width : Poiseuille channel half-width; walls at ``y = +/- half_width``
    pressure_perturbation : ``eps`` in ``p -> p + eps cos(x)``; turns any case
        into a non-solution, used for negative controls
    """

    case: str
    params: FluidParams = field(default_factory=FluidParams)
    amplitude: float = 1.0
    wavenumber: float = 1.0
    omega: float = 1.0
    background: tuple[float, float, float] = (0.0, 0.0, 0.0)
    half_width: float = 1.0
    pressure_perturbation: float = 0.0

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigurationError(f"unknown flow case {self.case!r}; expected one of {CASES}")
        if self.half_width <= 0 or self.wavenumber <= 0:
            raise ConfigurationError("half_width and wavenumber must be positive")
        object.__setattr__(self, "background", tuple(float(b) for b in self.background))

    def perturbed(self, eps: float) -> "AnalyticFlow":
        return replace(self, pressure_perturbation=eps)

    def pressure_range(self, lengths=(2 * np.pi, 2 * np.pi, 2 * np.pi)) -> tuple[float, float]:
        """Bounds of ``p`` over a box starting at the origin (periodic cases) or ``[-L/2, L/2]``."""
        rho, A = self.params.rho0, self.amplitude
        eps = abs(self.pressure_perturbation)
        if self.case == "taylor_green_2d":
            return -rho * A**2 / 2 - eps, rho * A**2 / 2 + eps
        if self.case == "taylor_green_3d":
            return -rho * A**2 * 3 / 8 - eps, rho * A**2 * 3 / 8 + eps
        if self.case == "rigid_rotation":
            r2 = (lengths[0] ** 2 + lengths[1] ** 2) / 4
            return -eps, rho * self.omega**2 * r2 / 2 + eps
        if self.case == "poiseuille":
            G = 2 * self.params.mu * A / self.half_width**2
            return -G * lengths[0] / 2 - eps, G * lengths[0] / 2 + eps
        return -eps, eps


def _zeros(batch, *tail):
    return np.zeros(tuple(batch) + tail)


def _rest(flow, r, t):
    b = r.shape[:-1]
    return dict(V=_zeros(b, 3), p=_zeros(b), gradV=_zeros(b, 3, 3), lapV=_zeros(b, 3),
                gradp=_zeros(b, 3), dtV=_zeros(b, 3), dtp=_zeros(b), lapp=_zeros(b))


def _uniform(flow, r, t):
    out = _rest(flow, r, t)
    out["V"] = np.broadcast_to(np.asarray(flow.background), out["V"].shape).copy()
    return out


def _rigid_rotation(flow, r, t):
    w, rho = flow.omega, flow.params.rho0
    x, y = r[..., 0], r[..., 1]
    out = _rest(flow, r, t)
    out["V"][..., 0] = -w * y
    out["V"][..., 1] = w * x
    out["gradV"][..., 0, 1] = -w
    out["gradV"][..., 1, 0] = w
    out["p"] = 0.5 * rho * w**2 * (x**2 + y**2)
    out["gradp"][..., 0] = rho * w**2 * x
    out["gradp"][..., 1] = rho * w**2 * y
    out["lapp"] = np.full(r.shape[:-1], 2 * rho * w**2)
    return out


def _taylor_green_2d(flow, r, t):
    A, k, nu, rho = flow.amplitude, flow.wavenumber, flow.params.nu, flow.params.rho0
    U = np.asarray(flow.background)
    xi = r - U * t
    sx, cx = np.sin(k * xi[..., 0]), np.cos(k * xi[..., 0])
    sy, cy = np.sin(k * xi[..., 1]), np.cos(k * xi[..., 1])
    a = np.exp(-2 * nu * k**2 * t)
    out = _rest(flow, r, t)
    W = np.zeros(r.shape)
    W[..., 0] = A * sx * cy * a
    W[..., 1] = -A * cx * sy * a
    G = out["gradV"]
    G[..., 0, 0] = A * k * cx * cy * a
    G[..., 0, 1] = -A * k * sx * sy * a
    G[..., 1, 0] = A * k * sx * sy * a
    G[..., 1, 1] = -A * k * cx * cy * a
    out["V"] = W + U
    out["lapV"] = -2 * k**2 * W
    q = 0.25 * rho * A**2 * a * a
    c2x, c2y = np.cos(2 * k * xi[..., 0]), np.cos(2 * k * xi[..., 1])
    out["p"] = q * (c2x + c2y)
    out["gradp"][..., 0] = -2 * k * q * np.sin(2 * k * xi[..., 0])
    out["gradp"][..., 1] = -2 * k * q * np.sin(2 * k * xi[..., 1])
    out["lapp"] = -4 * k**2 * out["p"]
    # time derivatives at fixed r of W(r - U t, t)
    out["dtV"] = -2 * nu * k**2 * W - np.einsum("...ij,j->...i", G, U)
    out["dtp"] = -4 * nu * k**2 * out["p"] - out["gradp"] @ U
    return out


def _taylor_green_3d(flow, r, t):
    if t != 0:
        raise ConfigurationError("taylor_green_3d has a closed form only at t = 0")
    A, k, nu, rho = flow.amplitude, flow.wavenumber, flow.params.nu, flow.params.rho0
    X, Y, Z = (k * r[..., i] for i in range(3))
    sx, cx, sy, cy, sz, cz = np.sin(X), np.cos(X), np.sin(Y), np.cos(Y), np.sin(Z), np.cos(Z)
    out = _rest(flow, r, t)
    V = out["V"]
    V[..., 0] = A * sx * cy * cz
    V[..., 1] = -A * cx * sy * cz
    G = out["gradV"]
    G[..., 0, 0] = A * k * cx * cy * cz
    G[..., 0, 1] = -A * k * sx * sy * cz
    G[..., 0, 2] = -A * k * sx * cy * sz
    G[..., 1, 0] = A * k * sx * sy * cz
    G[..., 1, 1] = -A * k * cx * cy * cz
    G[..., 1, 2] = A * k * cx * sy * sz
    out["lapV"] = -3 * k**2 * V
    q = rho * A**2 / 16
    c2x, c2y, c2z = np.cos(2 * X), np.cos(2 * Y), np.cos(2 * Z)
    out["p"] = q * (c2x + c2y) * (c2z + 2)
    out["gradp"][..., 0] = -2 * k * q * np.sin(2 * X) * (c2z + 2)
    out["gradp"][..., 1] = -2 * k * q * np.sin(2 * Y) * (c2z + 2)
    out["gradp"][..., 2] = -2 * k * q * (c2x + c2y) * np.sin(2 * Z)
    out["lapp"] = -4 * k**2 * q * (c2x + c2y) * (2 * c2z + 2)
    # true NS time derivatives of the evolving flow at t = 0
    out["dtV"] = -np.einsum("...ij,...j->...i", G, V) - out["gradp"] / rho + nu * out["lapV"]
    nonlinear = 2 * A * k * (np.cos(3 * X) * cy - cx * np.cos(3 * Y)) * cz
    out["dtp"] = -rho * A**2 / 88 * (nonlinear + 33 * nu * k**2 * (c2x + c2y) * (c2z + 2))
    return out


def _poiseuille(flow, r, t):
    Uc, h, mu = flow.amplitude, flow.half_width, flow.params.mu
    y = r[..., 1]
    out = _rest(flow, r, t)
    out["V"][..., 0] = Uc * (1 - (y / h) ** 2)
    out["gradV"][..., 0, 1] = -2 * Uc * y / h**2
    out["lapV"][..., 0] = -2 * Uc / h**2
    G = 2 * mu * Uc / h**2
    out["p"] = -G * r[..., 0]
    out["gradp"][..., 0] = -G
    return out


_CASE_FUNCS = {
    "rest": _rest,
    "uniform": _uniform,
    "rigid_rotation": _rigid_rotation,
    "taylor_green_2d": _taylor_green_2d,
    "taylor_green_3d": _taylor_green_3d,
    "poiseuille": _poiseuille,
}


def eval_analytic(flow: AnalyticFlow, r, t: float) -> FluidSample:
    """Closed-form fields and derivatives of ``flow`` at positions ``r`` (``(..., 3)``)."""
    r = np.asarray(r, dtype=float)
    if r.shape[-1:] != (3,):
        raise ContractError(f"positions must have a trailing axis of length 3, got {r.shape}")
    if not (np.all(np.isfinite(r)) and np.isfinite(t)):
        raise ContractError("non-finite position or time")
    try:
        func = _CASE_FUNCS[flow.case]
    except KeyError:
        raise ConfigurationError(f"unknown flow case {flow.case!r}") from None
    out = func(flow, r, float(t))
    eps = flow.pressure_perturbation
    if eps:
        out["p"] = out["p"] + eps * np.cos(r[..., 0])
        out["gradp"] = out["gradp"].copy()
        out["gradp"][..., 0] -= eps * np.sin(r[..., 0])
        out["lapp"] = out["lapp"] - eps * np.cos(r[..., 0])
    batch = r.shape[:-1]
    return FluidSample(f_ext=_zeros(batch, 3), divf=_zeros(batch), **out)


# ---------------------------------------------------------------- residuals

def momentum_residual(sample: FluidSample, params: FluidParams) -> np.ndarray:
    """``rho (dV/dt + V.grad V) + grad p - f - mu lap V``."""
    conv = np.einsum("...ij,...j->...i", sample.gradV, sample.V)
    return params.rho0 * (sample.dtV + conv) + sample.gradp - sample.f_ext - params.mu * sample.lapV


def energy_residual(sample: FluidSample, params: FluidParams) -> np.ndarray:
    """``rho D(V^2/2)/Dt + V.[grad p - f - mu lap V]``.

    The material derivative is expanded as ``V.dV/dt + V.(gradV @ V)``, so the
    result equals ``V . momentum_residual`` as an algebraic identity.
    """
    V = sample.V
    conv = np.einsum("...ij,...j->...i", sample.gradV, V)
    kinetic = params.rho0 * (np.einsum("...i,...i->...", V, sample.dtV) + np.einsum("...i,...i->...", V, conv))
    work = np.einsum("...i,...i->...", V, sample.gradp - sample.f_ext - params.mu * sample.lapV)
    return kinetic + work


def continuity_residual(sample: FluidSample, params: FluidParams) -> np.ndarray:
    """``d rho/dt + div(rho V)`` for the constant-density fluid, i.e. ``rho0 div V``."""
    return params.rho0 * sample.divergence()


def poisson_residual(obj, params: Optional[FluidParams] = None) -> np.ndarray:
    """``lap p + rho0 div(V.grad V) - div f``.

    Accepts a :class:`FluidSample` (pointwise, needs ``lapp``) or a
    :class:`FluidState` (4th-order differences on the grid).
    """
    if isinstance(obj, FluidState):
        return obj.poisson_residual()
    if params is None:
        raise ContractError("poisson_residual of a sample needs FluidParams")
    s = obj
    if s.lapp is None:
        raise ContractError("sample has no pressure Laplacian (lapp)")
    div_conv = s.div_conv
    if div_conv is None:
        div_conv = np.einsum("...ij,...ji->...", s.gradV, s.gradV)
    divf = 0.0 if s.divf is None else s.divf
    return s.lapp + params.rho0 * div_conv - divf


def divergence_residual(state: "FluidState") -> np.ndarray:
    """Discrete ``div V`` at every node (4th-order central differences)."""
    return state.divergence


# ------------------------------------------------------------- gridded state

class FluidState:
    """Velocity, pressure and force on a periodic grid at one time level.

    Arrays are stored read-only; derivatives are computed on first access and
    cached.  Construction fails with :class:`PositivityError` when the kinetic
    pressure ``p + P0`` is not strictly positive somewhere.
    """

    def __init__(self, grid: Grid, V, p, f=None, time: float = 0.0, params: Optional[FluidParams] = None):
        self.grid = grid
        self.params = params if params is not None else FluidParams()
        self.time = float(time)
        V = np.array(V, dtype=float)
        p = np.array(p, dtype=float)
        f = np.zeros_like(V) if f is None else np.array(f, dtype=float)
        if V.shape != (3,) + grid.shape or p.shape != grid.shape or f.shape != V.shape:
            raise ContractError(f"field shapes {V.shape}, {p.shape}, {f.shape} do not match grid {grid.shape}")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(p)) and np.all(np.isfinite(f))):
            raise ContractError("non-finite field values")
        p1 = p + self.params.P0
        if not np.all(p1 > 0):
            i = np.unravel_index(np.argmin(p1), p1.shape)
            raise PositivityError(f"p + P0 = {p1[i]:.3e} <= 0 at node {tuple(int(j) for j in i)}")
        for a in (V, p, f):
            a.setflags(write=False)
        self.V, self.p, self.f = V, p, f

    @classmethod
    def from_flow(cls, flow: AnalyticFlow, grid: Grid, t: float = 0.0) -> "FluidState":
        s = eval_analytic(flow, grid.points(), t)
        shape = grid.shape
        return cls(grid, s.V.T.reshape((3,) + shape), s.p.reshape(shape), s.f_ext.T.reshape((3,) + shape),
                   time=t, params=flow.params)

    @cached_property
    def gradV(self) -> np.ndarray:
        return fd.vector_gradient(self.V, self.grid)

    @cached_property
    def gradp(self) -> np.ndarray:
        return fd.gradient(self.p, self.grid)

    @cached_property
    def lapV(self) -> np.ndarray:
        return fd.vector_laplacian(self.V, self.grid)

    @cached_property
    def lapp(self) -> np.ndarray:
        return fd.laplacian(self.p, self.grid)

    @cached_property
    def divergence(self) -> np.ndarray:
        return fd.divergence(self.V, self.grid)

    @cached_property
    def convective(self) -> np.ndarray:
        return np.einsum("ij...,j...->i...", self.gradV, self.V)

    def poisson_residual(self) -> np.ndarray:
        div_conv = fd.divergence(self.convective, self.grid)
        return self.lapp + self.params.rho0 * div_conv - fd.divergence(self.f, self.grid)

    def kinetic_energy(self) -> float:
        """``(rho0/2) int |V|^2 dx`` over the active axes."""
        return 0.5 * self.params.rho0 * float(np.sum(self.V**2)) * self.grid.cell_volume

    def to_samples(self, dtV=None, dtp=None) -> FluidSample:
        """Flatten into a batched :class:`FluidSample` of shape ``(size,)``.

        Time derivatives are not available from a single time level; they are
        zero unless supplied.
        """
        n = self.grid.size
        vec = lambda a: np.moveaxis(np.asarray(a), 0, -1).reshape(n, 3)
        dtV = np.zeros((n, 3)) if dtV is None else vec(dtV)
        dtp = np.zeros(n) if dtp is None else np.asarray(dtp).reshape(n)
        G = np.moveaxis(self.gradV, (0, 1), (-2, -1)).reshape(n, 3, 3)
        return FluidSample(
            V=vec(self.V), p=self.p.reshape(n), f_ext=vec(self.f), gradV=G, lapV=vec(self.lapV),
            gradp=vec(self.gradp), dtV=dtV, dtp=dtp, lapp=self.lapp.reshape(n),
            divf=fd.divergence(self.f, self.grid).reshape(n),
            div_conv=fd.divergence(self.convective, self.grid).reshape(n),
        )
