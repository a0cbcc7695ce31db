"""Pseudo-spectral incompressible NS solver on the periodic box (reference oracle).

Velocity is held as real-FFT coefficients.  Time stepping is Lawson RK4: the
viscous term is integrated exactly through the factor ``exp(-nu k^2 t)``, the
projected nonlinear term explicitly, dealiased by the 2/3 rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fields import AnalyticFlow, FluidParams, FluidSample, eval_analytic
from .grid import Grid


class _Operators:
    def __init__(self, grid: Grid):
        kx, ky, kz = grid.wavenumbers(real=True)
        self.k = [np.broadcast_to(k, (kx.size, ky.size, kz.size)) for k in (kx, ky, kz)]
        self.k2 = self.k[0] ** 2 + self.k[1] ** 2 + self.k[2] ** 2
        self.inv_k2 = np.zeros_like(self.k2)
        nz = self.k2 > 0
        self.inv_k2[nz] = 1.0 / self.k2[nz]
        mask = np.ones(self.k2.shape, dtype=bool)
        for a, k in enumerate(self.k):
            n, L = grid.shape[a], grid.lengths[a]
            if n > 1:
                kmax = np.pi * n / L
                mask &= np.abs(k) < (2.0 / 3.0) * kmax
        self.dealias = mask


_OPS: dict = {}


def _ops(grid: Grid) -> _Operators:
    if grid not in _OPS:
        _OPS[grid] = _Operators(grid)
    return _OPS[grid]


def _rfft(a, grid):
    # transform over the trailing three (spatial) axes
    axes = tuple(range(a.ndim - 3, a.ndim))
    return np.fft.rfftn(a, axes=axes)


def _irfft(a, grid):
    axes = tuple(range(a.ndim - 3, a.ndim))
    return np.fft.irfftn(a, s=grid.shape, axes=axes)


def project(Vhat: np.ndarray, grid: Grid) -> np.ndarray:
    """Leray projection ``V - k (k.V)/k^2``."""
    op = _ops(grid)
    kdotv = sum(op.k[i] * Vhat[i] for i in range(3))
    return np.stack([Vhat[i] - op.k[i] * kdotv * op.inv_k2 for i in range(3)])


@dataclass
class SpectralState:
    Vhat: np.ndarray
    grid: Grid
    time: float = 0.0

    @classmethod
    def from_velocity(cls, V: np.ndarray, grid: Grid, time: float = 0.0, project_field: bool = True) -> "SpectralState":
        Vhat = _rfft(np.asarray(V, dtype=float), grid)
        if project_field:
            Vhat = project(Vhat, grid)
        return cls(Vhat, grid, time)

    @classmethod
    def from_flow(cls, flow: AnalyticFlow, grid: Grid, t: float = 0.0) -> "SpectralState":
        s = eval_analytic(flow, grid.points(), t)
        return cls.from_velocity(s.V.T.reshape((3,) + grid.shape), grid, t)

    @property
    def velocity(self) -> np.ndarray:
        return _irfft(self.Vhat, self.grid)

    def divergence(self) -> np.ndarray:
        op = _ops(self.grid)
        return _irfft(1j * sum(op.k[i] * self.Vhat[i] for i in range(3)), self.grid)

    def kinetic_energy(self, rho0: float = 1.0) -> float:
        V = self.velocity
        return 0.5 * rho0 * float(np.sum(V**2)) * self.grid.cell_volume


def _gradient_hat(Vhat, op):
    return np.stack([np.stack([1j * op.k[j] * Vhat[i] for j in range(3)]) for i in range(3)])


def convective_term(V: np.ndarray, grid: Grid) -> np.ndarray:
    """``(V . grad) V`` with spectral derivatives, physical space."""
    op = _ops(grid)
    Vhat = _rfft(V, grid)
    G = _irfft(_gradient_hat(Vhat, op), grid)
    return np.einsum("ij...,j...->i...", G, V)


def _nonlinear(Vhat, grid, force_hat, rho0):
    op = _ops(grid)
    V = _irfft(Vhat, grid)
    G = _irfft(_gradient_hat(Vhat, op), grid)
    conv = np.einsum("ij...,j...->i...", G, V)
    N = -_rfft(conv, grid)
    if force_hat is not None:
        N = N + force_hat / rho0
    return project(N * op.dealias, grid)


def cfl_number(state: SpectralState, dt: float) -> float:
    V = state.velocity
    h = state.grid.spacing
    active = state.grid.active_axes
    return float(dt * max(np.max(np.abs(V[a])) / h[a] for a in active)) if active else 0.0


def spectral_step(state: SpectralState, dt: float, nu: float, f_ext=None, rho0: float = 1.0,
                  cfl_max: float = 1.0) -> SpectralState:
    """One Lawson-RK4 step.  ``f_ext`` is a steady physical-space force density."""
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    cfl = cfl_number(state, dt)
    if cfl > cfl_max:
        raise ConfigurationError(f"advective CFL {cfl:.3f} exceeds {cfl_max}")
    grid = state.grid
    op = _ops(grid)
    fh = None if f_ext is None else _rfft(np.asarray(f_ext, dtype=float), grid)
    E1 = np.exp(-nu * op.k2 * dt)
    E2 = np.exp(-nu * op.k2 * dt / 2)
    u = state.Vhat
    k1 = _nonlinear(u, grid, fh, rho0)
    k2 = _nonlinear(E2 * (u + 0.5 * dt * k1), grid, fh, rho0)
    k3 = _nonlinear(E2 * u + 0.5 * dt * k2, grid, fh, rho0)
    k4 = _nonlinear(E1 * u + dt * E2 * k3, grid, fh, rho0)
    new = E1 * u + dt / 6 * (E1 * k1 + 2 * E2 * (k2 + k3) + k4)
    return SpectralState(new, grid, state.time + dt)


def solve_poisson(rhs: np.ndarray, grid: Grid, tol: float = 1e-10) -> np.ndarray:
    """Zero-mean solution of ``lap p = rhs`` on the periodic grid."""
    rhs = np.asarray(rhs, dtype=float)
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if abs(float(np.mean(rhs))) > tol * scale:
        raise ConfigurationError(f"Poisson right-hand side has non-zero mean {np.mean(rhs):.3e}")
    op = _ops(grid)
    return _irfft(-_rfft(rhs, grid) * op.inv_k2, grid)


def solve_pressure_poisson(V: np.ndarray, grid: Grid, f_ext=None, rho0: float = 1.0) -> np.ndarray:
    """Pressure from ``lap p = -rho0 div(V.grad V) + div f`` in the zero-mean gauge."""
    op = _ops(grid)
    conv_hat = _rfft(convective_term(np.asarray(V, dtype=float), grid), grid)
    rhs_hat = -rho0 * 1j * sum(op.k[i] * conv_hat[i] for i in range(3))
    if f_ext is not None:
        fh = _rfft(np.asarray(f_ext, dtype=float), grid)
        rhs_hat = rhs_hat + 1j * sum(op.k[i] * fh[i] for i in range(3))
    return solve_poisson(_irfft(rhs_hat, grid), grid)


def taylor_green_exact(params: FluidParams, r, t: float, amplitude: float = 1.0, wavenumber: float = 1.0) -> FluidSample:
    """Decaying 2D Taylor-Green vortex (same closed form as the ``taylor_green_2d`` flow case)."""
    return eval_analytic(AnalyticFlow("taylor_green_2d", params, amplitude=amplitude, wavenumber=wavenumber), r, t)


def run_reference(V0: np.ndarray, grid: Grid, nu: float, dt: float, t_end: float, f_ext=None, rho0: float = 1.0,
                  callback=None) -> SpectralState:
    state = SpectralState.from_velocity(V0, grid)
    n = max(1, int(round(t_end / dt)))
    h = t_end / n
    for i in range(n):
        state = spectral_step(state, h, nu, f_ext, rho0)
        if callback is not None:
            callback(i + 1, state)
    return state
