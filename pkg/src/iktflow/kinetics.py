"""Local Maxwellian, Gauss-Hermite velocity quadrature and velocity moments."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ContractError, PositivityError

WEIGHTS = ("1", "v", "E", "uu", "Eu")
_DEGREE = {"1": 0, "v": 1, "E": 2, "uu": 2, "Eu": 3}


@dataclass(frozen=True)
class MaxwellianParams:
    """``rho0``, local velocity ``V`` (``(..., 3)``) and thermal speed ``vth`` (``(...)``)."""

    rho0: float
    V: np.ndarray
    vth: np.ndarray

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float)
        vth = np.asarray(self.vth, dtype=float)
        if not self.rho0 > 0:
            raise PositivityError(f"rho0 must be positive, got {self.rho0}")
        if not np.all(vth > 0):
            raise PositivityError("thermal velocity must be strictly positive")
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "vth", vth)

    @classmethod
    def from_pressure(cls, rho0: float, V, p1) -> "MaxwellianParams":
        return cls(rho0, V, vth_from_pressure(p1, rho0))

    @property
    def p1(self) -> np.ndarray:
        return 0.5 * self.rho0 * self.vth**2


def vth_from_pressure(p1, rho0):
    """Thermal speed ``sqrt(2 p1 / rho0)``; refuses non-positive kinetic pressure."""
    p1 = np.asarray(p1, dtype=float)
    if not rho0 > 0:
        raise PositivityError(f"rho0 must be positive, got {rho0}")
    if not np.all(p1 > 0):
        raise PositivityError(f"kinetic pressure must be strictly positive (min {np.min(p1):.3e})")
    out = np.sqrt(2.0 * p1 / rho0)
    return out if out.ndim else float(out)


def kinetic_pressure(p, P0):
    """``p1 = p + P0``, which must stay strictly positive."""
    p1 = np.asarray(p, dtype=float) + P0
    if not np.all(p1 > 0):
        raise PositivityError(f"p + P0 must be strictly positive (min {np.min(p1):.3e})")
    return p1 if p1.ndim else float(p1)


def maxwellian_eval(params: MaxwellianParams, v) -> np.ndarray:
    """``rho0 pi^(-3/2) vth^(-3) exp(-|v - V|^2 / vth^2)``, broadcasting ``v`` against ``V``."""
    u = np.asarray(v, dtype=float) - params.V
    vth = params.vth
    return params.rho0 * np.pi**-1.5 * vth**-3 * np.exp(-np.einsum("...i,...i->...", u, u) / vth**2)


@lru_cache(maxsize=None)
def _unit_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite.hermgauss(order)
    xi = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1) * np.pi**-1.5
    xi.setflags(write=False)
    W.setflags(write=False)
    return xi, W


class QuadratureSet:
    """Tensor Gauss-Hermite rule adapted to a Gaussian centred at ``center`` with width ``vth``.

    With ``xi`` the unit nodes and ``w`` the weights (normalised to sum to one),
    ``int g(v) omega(v) d3v = sum_k w_k g(V + vth xi_k)`` exactly for
    polynomials ``g`` of degree ``<= 2N - 1`` in each variable, where ``omega`` is
    the unit-mass Gaussian ``pi^(-3/2) vth^(-3) exp(-|v-V|^2/vth^2)``.

    ``center`` may be batched, ``(..., 3)``; nodes then have shape ``(..., M, 3)``.
    """

    def __init__(self, order: int = 8, center=(0.0, 0.0, 0.0), vth=1.0):
        if order < 1:
            raise ContractError("quadrature order must be >= 1")
        self.order = int(order)
        center = np.asarray(center, dtype=float)
        vth = np.asarray(vth, dtype=float)
        batch = np.broadcast_shapes(center.shape[:-1], vth.shape)
        self.center = np.broadcast_to(center, batch + (3,))
        self.vth = np.broadcast_to(vth, batch)
        if not np.all(self.vth > 0):
            raise PositivityError("quadrature width must be positive")
        self.xi, self.weights = _unit_rule(self.order)

    @classmethod
    def for_maxwellian(cls, params: MaxwellianParams, order: int = 8) -> "QuadratureSet":
        return cls(order, params.V, params.vth)

    @property
    def size(self) -> int:
        return self.xi.shape[0]

    @property
    def exact_degree(self) -> int:
        return 2 * self.order - 1

    @property
    def nodes(self) -> np.ndarray:
        return self.center[..., None, :] + self.vth[..., None, None] * self.xi

    def gaussian(self) -> np.ndarray:
        """Unit-mass Gaussian ``omega`` evaluated at the nodes, ``(..., M)``."""
        xi2 = np.einsum("ki,ki->k", self.xi, self.xi)
        return np.pi**-1.5 * self.vth[..., None] ** -3 * np.exp(-xi2)

    def integrate(self, values) -> np.ndarray:
        """``int h(v) d3v`` from samples of ``h`` at the nodes (last axis = node index).

        Extra trailing axes after the node axis are allowed, e.g. ``(..., M, 3)``.
        """
        values = np.asarray(values, dtype=float)
        ratio_axes = values.ndim - (self.center.ndim - 1) - 1
        g = self.gaussian().reshape(self.gaussian().shape + (1,) * ratio_axes)
        w = self.weights.reshape(self.weights.shape + (1,) * ratio_axes)
        return np.sum(w * values / g, axis=self.center.ndim - 1)

    def moments(self, f_values, weight: str = "1", *, tol: float = 1e-8):
        """Single moment ``int G f d3v`` of pdf samples at the nodes.

        ``u`` is measured from the quadrature centre; for weights involving ``u``
        the pdf mean must coincide with that centre (within ``tol * vth``)
        otherwise :class:`ContractError` is raised.
        """
        if weight not in WEIGHTS:
            raise ContractError(f"unknown moment weight {weight!r}; expected one of {WEIGHTS}")
        if _DEGREE[weight] > self.exact_degree:
            raise ContractError(f"order {self.order} quadrature cannot integrate weight {weight!r} exactly")
        f = np.asarray(f_values, dtype=float)
        rho = self.integrate(f)
        if weight == "1":
            return rho
        v = self.nodes
        momentum = self.integrate(f[..., None] * v)
        if weight == "v":
            return momentum
        mean = momentum / rho[..., None]
        if np.any(np.linalg.norm(mean - self.center, axis=-1) > tol * self.vth):
            raise ContractError("quadrature centre differs from the pdf mean velocity")
        u = v - self.center[..., None, :]
        u2 = np.einsum("...i,...i->...", u, u)
        if weight == "E":
            return self.integrate(f * u2 / 3)
        if weight == "uu":
            return self.integrate(f[..., None, None] * u[..., :, None] * u[..., None, :])
        return self.integrate((f * u2 / 3)[..., None] * u)


@dataclass(frozen=True)
class MomentSet:
    rho: np.ndarray
    momentum: np.ndarray
    p1: np.ndarray
    Pi: np.ndarray
    Q: np.ndarray

    @property
    def V(self) -> np.ndarray:
        return self.momentum / np.asarray(self.rho)[..., None]


def moments(f_values, quad: QuadratureSet) -> MomentSet:
    """All moments of pdf samples, with ``u`` measured from the pdf's own mean velocity.

    Unlike :meth:`QuadratureSet.moments` this does not require the quadrature to
    be centred on the mean; it is what a transport step needs after the pdf has
    moved away from the centring Maxwellian.
    """
    f = np.asarray(f_values, dtype=float)
    v = quad.nodes
    rho = quad.integrate(f)
    momentum = quad.integrate(f[..., None] * v)
    V = momentum / rho[..., None]
    u = v - V[..., None, :]
    uu = u[..., :, None] * u[..., None, :]
    Pi = quad.integrate(f[..., None, None] * uu)
    E = np.trace(uu, axis1=-2, axis2=-1) / 3
    p1 = quad.integrate(f * E)
    Q = quad.integrate((f * E)[..., None] * u)
    return MomentSet(rho, momentum, p1, Pi, Q)


def closure_moments(params: MaxwellianParams) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ``(Pi, Q) = (p1 I, 0)`` of the Maxwellian."""
    p1 = np.asarray(params.p1)
    Pi = p1[..., None, None] * np.eye(3)
    Q = np.zeros(p1.shape + (3,))
    return Pi, Q
