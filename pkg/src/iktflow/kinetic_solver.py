"""Self-consistent kinetic time advance of the fluid fields.

One step maps the current fields to their local Maxwellian, traces every
(grid node x velocity node) characteristic of the NS dynamical system back over
``dt``, evaluates the transported pdf there and takes its velocity moments.  The
new velocity comes from the ``v`` moment and the new pressure from the ``E``
moment; no Poisson equation is solved.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import grid as fd
from ._kernels import NF, NMOM, kinetic_sweep
from .errors import ConfigurationError, ContractError, IKTError, InvariantViolation, PositivityError
from .fields import AnalyticFlow, FluidParams, FluidState, eval_analytic
from .grid import Grid
from .kinetics import _unit_rule
from .spectral import solve_pressure_poisson

PRESSURE_RATES = ("backward", "frozen")


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters.

    ``P0=None`` applies the default policy ``max(0, -min p0) + 1``, fixed at
    initialisation.  ``pressure_rate`` selects how ``d_t ln p1`` inside the
    force is supplied: ``"backward"`` differences successive states,
    ``"frozen"`` (the default) sets it to zero.
    """

    nx: int = 32
    dt: float = 0.01
    t_end: float = 1.0
    order: int = 8
    case: str = "taylor_green_2d"
    nu: float = 0.01
    P0: Optional[float] = None
    cadence: int = 1
    pressure_rate: str = "frozen"
    cfl_max: float = 1.0
    div_tol: float = 1e-6

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError("dt must be positive")
        if not self.t_end > 0:
            raise ConfigurationError("t_end must be positive")
        if self.nx < 5:
            raise ConfigurationError("nx must be at least 5")
        if self.order < 2:
            raise ConfigurationError("quadrature order must be at least 2")
        if self.cadence < 1:
            raise ConfigurationError("cadence must be >= 1")
        if self.pressure_rate not in PRESSURE_RATES:
            raise ConfigurationError(f"pressure_rate must be one of {PRESSURE_RATES}")
        if not self.nu > 0:
            raise ConfigurationError("nu must be positive")


def default_P0(p0) -> float:
    return max(0.0, -float(np.min(p0))) + 1.0


@dataclass(frozen=True)
class KineticState:
    """Maxwellian state per node: ``(rho0, V, vth = sqrt(2 p1/rho0))``.

    ``prev`` keeps the previous ``(V, p1, dt)`` for backward time differences.
    """

    grid: Grid
    V: np.ndarray
    p1: np.ndarray
    time: float
    params: FluidParams
    f_ext: np.ndarray
    prev: Optional[tuple] = None
    step_index: int = 0

    @property
    def p(self) -> np.ndarray:
        return self.p1 - self.params.P0

    @property
    def vth(self) -> np.ndarray:
        return np.sqrt(2 * self.p1 / self.params.rho0)

    def kinetic_energy(self) -> float:
        return 0.5 * self.params.rho0 * float(np.sum(self.V**2)) * self.grid.cell_volume


@dataclass
class StepInfo:
    rho: np.ndarray
    closure_defect: np.ndarray
    jmin: float
    jmax: float
    wall: float


def init_from_fields(V0, p0, f_ext, grid: Grid, params: FluidParams, t0: float = 0.0,
                     dtV0=None, dtp0=None, div_tol: float = 1e-6, dt_hint: float = 1e-2) -> KineticState:
    """Maxwellian initial state with ``p1 = p0 + P0`` (``Pi0 = p1 I``, ``Q0 = 0``).

    Rejects a velocity field whose discrete divergence exceeds ``div_tol``
    relative to its largest gradient, and any node with ``p0 + P0 <= 0``.
    Optional initial time derivatives seed the backward differences of the
    first step (otherwise ``d_t V`` comes from the momentum equation and
    ``d_t p`` is zero).
    """
    V0 = np.array(V0, dtype=float)
    p0 = np.array(p0, dtype=float)
    f_ext = np.zeros_like(V0) if f_ext is None else np.array(f_ext, dtype=float)
    if V0.shape != (3,) + grid.shape or p0.shape != grid.shape:
        raise ContractError("initial fields do not match the grid")
    G = fd.vector_gradient(V0, grid)
    scale = max(float(np.max(np.abs(G))), 1e-300)
    div = np.trace(G)
    if float(np.max(np.abs(div))) > div_tol * scale and float(np.max(np.abs(div))) > 1e-300:
        raise ContractError(f"initial velocity is not solenoidal: max|div V| = {np.max(np.abs(div)):.3e}")
    p1 = p0 + params.P0
    if not np.all(p1 > 0):
        raise PositivityError(f"p0 + P0 must be strictly positive (min {np.min(p1):.3e})")
    if dtV0 is None:
        conv = np.einsum("ij...,j...->i...", G, V0)
        dtV0 = (-fd.gradient(p0, grid) + f_ext + params.mu * fd.vector_laplacian(V0, grid)) / params.rho0 - conv
    dtp0 = np.zeros_like(p0) if dtp0 is None else np.asarray(dtp0, dtype=float)
    prev = (V0 - dt_hint * np.asarray(dtV0), p1 - dt_hint * dtp0, dt_hint)
    return KineticState(grid, V0, p1, t0, params, f_ext, prev, 0)


def init_from_flow(flow: AnalyticFlow, grid: Grid, P0: Optional[float] = None, t0: float = 0.0,
                   dt_hint: float = 1e-2) -> KineticState:
    s = eval_analytic(flow, grid.points(), t0)
    shape = grid.shape
    V = s.V.T.reshape((3,) + shape)
    p = s.p.reshape(shape)
    if P0 is None:
        P0 = default_P0(p)
    params = FluidParams(flow.params.rho0, flow.params.mu, P0)
    return init_from_fields(V, p, s.f_ext.T.reshape((3,) + shape), grid, params, t0,
                            dtV0=s.dtV.T.reshape((3,) + shape), dtp0=s.dtp.reshape(shape), dt_hint=dt_hint)


def _context_stack(V, p1, f_ext, dtp1, grid: Grid, params: FluidParams) -> np.ndarray:
    S = np.empty((NF,) + grid.shape)
    S[0:3] = V
    G = fd.vector_gradient(V, grid)
    S[3:12] = G.reshape((9,) + grid.shape)
    S[12:15] = f_ext / params.rho0 + params.nu * fd.vector_laplacian(V, grid)
    gp = fd.gradient(p1, grid)
    S[15:18] = gp
    S[18] = p1
    S[19] = (dtp1 + np.einsum("i...,i...->...", V, gp)) / p1
    return S


def cfl_number(state: KineticState, dt: float, order: int) -> float:
    xi_max = float(np.max(np.abs(_unit_rule(order)[0])))
    vmax = float(np.max(np.abs(state.V)) + xi_max * np.max(state.vth))
    h = min(state.grid.spacing[a] for a in state.grid.active_axes)
    return dt * vmax / h


def step(state: KineticState, dt: float, order: int = 8, pressure_rate: str = "frozen") -> tuple[KineticState, StepInfo]:
    """Advance the Maxwellian state by one semi-Lagrangian kinetic step."""
    t_wall = _time.perf_counter()
    grid, params = state.grid, state.params
    if pressure_rate not in PRESSURE_RATES:
        raise ConfigurationError(f"pressure_rate must be one of {PRESSURE_RATES}")
    V_prev, p1_prev, dt_prev = state.prev[:3]
    dtp1 = (state.p1 - p1_prev) / dt_prev if pressure_rate == "backward" else np.zeros_like(state.p1)
    S_now = _context_stack(state.V, state.p1, state.f_ext, dtp1, grid, params)
    if state.step_index == 0 or pressure_rate == "frozen":
        dtp1_prev = dtp1
    else:
        dtp1_prev = state.prev[3] if len(state.prev) > 3 else dtp1
    S_before = _context_stack(V_prev, p1_prev, state.f_ext, dtp1_prev, grid, params)
    rate = (S_now - S_before) / dt_prev
    S_new = S_now + dt * rate
    S_mid = S_now + 0.5 * dt * rate
    xi, w = _unit_rule(order)
    n = grid.size
    raw = np.empty((n, NMOM))
    jstats = np.empty(2)
    kinetic_sweep(S_new, S_mid, S_now, np.asarray(grid.origin), grid.spacing, np.asarray(grid.shape, dtype=np.int64),
                  np.ascontiguousarray(xi), np.ascontiguousarray(w), float(dt), float(params.rho0), raw, jstats)
    if not np.all(np.isfinite(jstats)) or jstats[0] <= 0:
        raise InvariantViolation(f"backward Jacobian left (0, inf): min {jstats[0]:.3e}", contract="Jacobian regularity")
    rho = raw[:, 0]
    delta = raw[:, 1:4] / rho[:, None]
    S = np.empty((n, 3, 3))
    S[:, 0, 0], S[:, 1, 1], S[:, 2, 2] = raw[:, 4], raw[:, 5], raw[:, 6]
    S[:, 0, 1] = S[:, 1, 0] = raw[:, 7]
    S[:, 0, 2] = S[:, 2, 0] = raw[:, 8]
    S[:, 1, 2] = S[:, 2, 1] = raw[:, 9]
    Pi = S - rho[:, None, None] * delta[:, :, None] * delta[:, None, :]
    p1_new = np.trace(Pi, axis1=1, axis2=2) / 3
    T = raw[:, 10:13]
    trS = np.trace(S, axis1=1, axis2=2)
    Q = (T - 2 * np.einsum("nij,nj->ni", S, delta) - delta * trS[:, None]
         + 2 * rho[:, None] * np.sum(delta**2, axis=1)[:, None] * delta) / 3
    defect = np.sqrt(np.sum((Pi - p1_new[:, None, None] * np.eye(3)) ** 2, axis=(1, 2)) + np.sum(Q**2, axis=1))
    Vc = state.V.reshape(3, -1).T
    V_new = (Vc + delta).T.reshape((3,) + grid.shape)
    p1_new = p1_new.reshape(grid.shape)
    if not np.all(np.isfinite(p1_new)) or not np.all(np.isfinite(V_new)):
        raise InvariantViolation("non-finite moments after kinetic step", contract="finite moments")
    if not np.all(p1_new > 0):
        raise PositivityError(f"kinetic pressure positivity violated: min p1 = {np.min(p1_new):.3e}")
    new = KineticState(grid, V_new, p1_new, state.time + dt, params, state.f_ext,
                       (state.V, state.p1, dt, dtp1), state.step_index + 1)
    info = StepInfo(rho.reshape(grid.shape), (defect / np.abs(p1_new.reshape(-1))).reshape(grid.shape),
                    float(jstats[0]), float(jstats[1]), _time.perf_counter() - t_wall)
    return new, info


# cases the periodic solver can run (wall-bounded and unbounded flows are excluded)
PERIODIC_CASES = ("rest", "uniform", "taylor_green_2d", "taylor_green_3d")
# cases whose analytic solution is known for all t, used for the velocity error diagnostic
_EXACT_IN_TIME = ("rest", "uniform", "taylor_green_2d")


def make_grid(config: SolverConfig) -> Grid:
    return Grid.cube(config.nx) if config.case == "taylor_green_3d" else Grid.square(config.nx)


def make_flow(config: SolverConfig) -> AnalyticFlow:
    if config.case not in PERIODIC_CASES:
        raise ConfigurationError(f"case {config.case!r} is not available in the periodic kinetic solver")
    background = (0.5, 0.25, 0.0) if config.case == "uniform" else None
    kw = {} if background is None else dict(background=background)
    return AnalyticFlow(config.case, FluidParams.from_nu(config.nu, 1.0, 1.0), **kw)


@dataclass
class RunDiagnostics:
    """Per-diagnostic-step records of a kinetic run.

    ``rows`` carry the report columns plus extra keys (``p1_max``,
    ``rho_dev``, ``pressure_gap``, ``velocity_error``, ``jmin``, ``jmax``,
    ``wall``).  ``failure`` is ``(step_index, contract, message)`` when the run
    stopped on an invariant violation.
    """

    rows: list = field(default_factory=list)
    failure: Optional[tuple] = None
    metadata: dict = field(default_factory=dict)

    def column(self, key: str) -> np.ndarray:
        return np.array([r[key] for r in self.rows], dtype=float)

    @property
    def p1_min(self) -> float:
        return float(min(r["p1_min"] for r in self.rows))

    @property
    def rho_dev_max(self) -> float:
        return float(max(r["rho_dev"] for r in self.rows))


def pressure_gap(state: KineticState) -> float:
    """Gauge-adjusted L-infinity gap between the moment pressure and the Poisson pressure."""
    p_kin = state.p - np.mean(state.p)
    p_pois = solve_pressure_poisson(state.V, state.grid, state.f_ext, state.params.rho0)
    return float(np.max(np.abs(p_kin - p_pois)))


def diagnostics_row(state: KineticState, flow: Optional[AnalyticFlow] = None,
                    info: Optional[StepInfo] = None) -> dict:
    """Fluid residuals of the current state plus run bookkeeping.

    Time derivatives for the momentum and energy residuals are backward
    differences against ``state.prev``.
    """
    grid, params = state.grid, state.params
    fs = FluidState(grid, state.V, state.p, state.f_ext, state.time, params)
    V_prev, p1_prev, dt_prev = state.prev[:3]
    sample = fs.to_samples((state.V - V_prev) / dt_prev, (state.p1 - p1_prev) / dt_prev)
    from .fields import continuity_residual, energy_residual, momentum_residual, poisson_residual
    l2 = lambda a: float(np.sqrt(np.mean(np.sum(np.reshape(a, (grid.size, -1)) ** 2, axis=1))))
    row = dict(
        t=float(state.time),
        continuity_L2=l2(continuity_residual(sample, params)),
        momentum_L2=l2(momentum_residual(sample, params)),
        energy_L2=l2(energy_residual(sample, params)),
        poisson_L2=l2(poisson_residual(sample, params)),
        liouville_L2=0.0 if info is None else l2(info.closure_defect),
        energy_kinetic=state.kinetic_energy(),
        div_max=float(np.max(np.abs(fs.divergence))),
        p1_min=float(np.min(state.p1)),
        p1_max=float(np.max(state.p1)),
        rho_dev=0.0 if info is None else float(np.max(np.abs(info.rho - params.rho0))),
        pressure_gap=pressure_gap(state),
        jmin=1.0 if info is None else info.jmin,
        jmax=1.0 if info is None else info.jmax,
        wall=0.0 if info is None else info.wall,
    )
    if flow is not None and flow.case in _EXACT_IN_TIME:
        s = eval_analytic(flow, grid.points(), state.time)
        row["velocity_error"] = float(np.max(np.abs(state.V - s.V.T.reshape((3,) + grid.shape))))
    else:
        row["velocity_error"] = float("nan")
    return row


def run(config: SolverConfig, callback=None, keep_history: bool = False):
    """Advance ``config.case`` from ``t = 0`` to ``t_end``.

    Returns ``(final_state, RunDiagnostics, history)``; ``history`` lists the
    states at diagnostic steps when ``keep_history`` is set.  On an invariant
    violation the failure is recorded in the diagnostics, which are attached
    to the re-raised exception as ``exc.diagnostics``.
    """
    flow = make_flow(config)
    grid = make_grid(config)
    n_steps = max(1, int(round(config.t_end / config.dt)))
    dt = config.t_end / n_steps
    state = init_from_flow(flow, grid, P0=config.P0, dt_hint=dt)
    if config.div_tol is not None:
        state = init_from_fields(state.V, state.p, state.f_ext, grid, state.params, 0.0,
                                 dtV0=(state.V - state.prev[0]) / dt, dtp0=(state.p1 - state.prev[1]) / dt,
                                 div_tol=config.div_tol, dt_hint=dt)
    cfl = cfl_number(state, dt, config.order)
    if cfl > config.cfl_max:
        raise ConfigurationError(f"dt={dt:g} violates the CFL-like bound: dt max|v_node|/h = {cfl:.3f} > {config.cfl_max}")
    diag = RunDiagnostics(metadata=dict(case=config.case, nx=config.nx, dt=dt, steps=n_steps, order=config.order,
                                        nu=config.nu, P0=state.params.P0, cfl=cfl,
                                        pressure_rate=config.pressure_rate))
    diag.rows.append(diagnostics_row(state, flow))
    history = [state] if keep_history else []
    for i in range(n_steps):
        try:
            state, info = step(state, dt, config.order, config.pressure_rate)
        except IKTError as exc:
            diag.failure = (i + 1, exc.contract, str(exc))
            exc.diagnostics = diag
            raise
        if (i + 1) % config.cadence == 0 or i + 1 == n_steps:
            diag.rows.append(diagnostics_row(state, flow, info))
            if keep_history:
                history.append(state)
            if callback is not None:
                callback(state, diag.rows[-1])
    return state, diag, history
