"""Command line harness: ``iktflow <command> [options]``.

Commands
--------
verify-moments    moments of the Maxwellian and of its Liouville residual on a grid
verify-liouville  finite-difference Liouville residual of f_M under step refinement
trace             phase-space trajectories (with Jacobian and wall events)
solve-kinetic     self-consistent kinetic time advance
solve-reference   pseudo-spectral reference solve
compare           kinetic vs reference vs analytic error table

Exit codes: 0 success, 1 invariant violation (the contract is named on stderr
and in ``metadata.json``), 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import platform
import sys
from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np

from . import __version__
from .errors import ConfigurationError, IKTError
from .fields import CASES, AnalyticFlow, FluidParams, eval_analytic
from .grid import Grid

COMMANDS = ("verify-moments", "verify-liouville", "trace", "solve-kinetic", "solve-reference", "compare")
REPORT_COLUMNS = ("t", "continuity_L2", "momentum_L2", "energy_L2", "poisson_L2", "liouville_L2",
                  "energy_kinetic", "div_max", "p1_min")
FIELD_COLUMNS = ("x", "y", "z", "Vx", "Vy", "Vz", "p")

# moment mismatch accepted by verify-moments
MOMENT_TOL = 1e-8


@dataclass(frozen=True)
class RunConfig:
    command: str
    case: str = "taylor_green_2d"
    nx: int = 32
    dt: float = 0.01
    t_end: float = 0.1
    quad: int = 8
    nu: float = 0.01
    P0: Optional[float] = None
    seed: int = 0
    out: str = "iktflow_out"
    pressure_rate: str = "frozen"
    cadence: int = 1
    perturb: float = 0.0
    n_traj: int = 8


# (low, high) inclusive ranges; None means unbounded on that side
_RANGES = {
    "nx": (5, 1024),
    "quad": (2, 24),
    "seed": (0, 2**32 - 1),
    "cadence": (1, None),
    "n_traj": (1, 100000),
}
_POSITIVE = ("dt", "t_end", "nu")


def _coerce(name: str, value):
    kind = {f.name: f.type for f in fields(RunConfig)}[name]
    try:
        if name == "P0":
            if value is None or (isinstance(value, str) and value.lower() in ("auto", "none", "")):
                return None
            return float(value)
        if "int" in kind:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if "float" in kind:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{name}: cannot interpret {value!r}") from None


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise ConfigurationError(f"command: unknown {cfg.command!r}; expected one of {COMMANDS}")
    if cfg.case not in CASES:
        raise ConfigurationError(f"case: unknown {cfg.case!r}; expected one of {CASES}")
    for name in _POSITIVE:
        v = getattr(cfg, name)
        if not (math.isfinite(v) and v > 0):
            raise ConfigurationError(f"{name}: must be a finite positive number, got {v!r}")
    if cfg.dt > cfg.t_end:
        raise ConfigurationError(f"dt: {cfg.dt!r} exceeds t_end {cfg.t_end!r}")
    for name, (lo, hi) in _RANGES.items():
        v = getattr(cfg, name)
        if (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ConfigurationError(f"{name}: {v!r} outside [{lo}, {hi if hi is not None else 'inf'}]")
    if cfg.P0 is not None and not math.isfinite(cfg.P0):
        raise ConfigurationError("P0: must be finite or 'auto'")
    if not math.isfinite(cfg.perturb):
        raise ConfigurationError("perturb: must be finite")
    if cfg.pressure_rate not in ("backward", "frozen"):
        raise ConfigurationError("pressure_rate: must be 'backward' or 'frozen'")
    return cfg


def _normalise_key(key: str) -> str:
    return key.replace("-", "_")


def parse_config(argv=None) -> RunConfig:
    """Build a validated :class:`RunConfig` from an optional JSON file and flags.

    Flags override file values.  Unknown keys and out-of-range values raise
    :class:`ConfigurationError` naming the field.
    """
    parser = _parser()
    args = parser.parse_args(argv)
    values: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"config: cannot read {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config: top level must be an object")
        known = {f.name for f in fields(RunConfig)}
        for key, value in data.items():
            k = _normalise_key(key)
            if k not in known:
                raise ConfigurationError(f"{key}: unknown configuration key")
            values[k] = value
    if args.command is not None:
        values["command"] = args.command
    if "command" not in values:
        raise ConfigurationError("command: missing (give it on the command line or in the config file)")
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None) if f.name != "command" else None
        if flag is not None:
            values[f.name] = flag
    values = {k: _coerce(k, v) for k, v in values.items()}
    return validate(RunConfig(**values))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iktflow", description="Inverse kinetic theory toolkit for incompressible NS.")
    p.add_argument("command", nargs="?", help=" | ".join(COMMANDS))
    p.add_argument("--config", help="JSON file with configuration keys")
    p.add_argument("--case")
    p.add_argument("--nx", type=str)
    p.add_argument("--dt", type=str)
    p.add_argument("--t-end", dest="t_end", type=str)
    p.add_argument("--nu", type=str)
    p.add_argument("--quad", type=str, help="Gauss-Hermite points per velocity axis")
    p.add_argument("--P0", dest="P0", type=str, help="pressure offset, or 'auto'")
    p.add_argument("--out")
    p.add_argument("--seed", type=str)
    p.add_argument("--pressure-rate", dest="pressure_rate")
    p.add_argument("--cadence", type=str)
    p.add_argument("--perturb", type=str, help="pressure perturbation eps cos(x) (negative controls)")
    p.add_argument("--n-traj", dest="n_traj", type=str)
    return p


# ------------------------------------------------------------------ output

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: str, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) if not isinstance(r[c], str) else r[c] for c in columns])


def write_fields(path: str, grid: Grid, V: np.ndarray, p: np.ndarray) -> None:
    pts = grid.points()
    n = grid.size
    Vf = V.reshape(3, n)
    pf = p.reshape(n)
    rows = ({"x": pts[i, 0], "y": pts[i, 1], "z": pts[i, 2], "Vx": Vf[0, i], "Vy": Vf[1, i], "Vz": Vf[2, i],
             "p": pf[i]} for i in range(n))
    write_csv(path, FIELD_COLUMNS, rows)


def _metadata(cfg: RunConfig, extra: dict) -> dict:
    import numba

    return dict(config=asdict(cfg),
                versions=dict(iktflow=__version__, numpy=np.__version__, numba=numba.__version__,
                              python=platform.python_version()),
                **extra)


def write_metadata(path: str, meta: dict) -> None:
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (np.floating, float)):
            return float(_fmt(o)) if math.isfinite(o) else str(float(o))
        if isinstance(o, np.integer):
            return int(o)
        return o

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(clean(meta), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------------ helpers

def _flow(cfg: RunConfig) -> AnalyticFlow:
    base = AnalyticFlow(cfg.case, FluidParams.from_nu(cfg.nu, 1.0, 1.0),
                        background=(0.5, 0.25, 0.0) if cfg.case == "uniform" else (0.0, 0.0, 0.0))
    lo, _ = base.pressure_range()
    P0 = cfg.P0 if cfg.P0 is not None else max(0.0, -lo) + 1.0
    return replace(base, params=FluidParams.from_nu(cfg.nu, 1.0, P0), pressure_perturbation=cfg.perturb)


def sample_grid(case: str, n: int) -> Grid:
    """Evaluation grid for a case: the periodic box, or a box centred on the axis/channel."""
    if case == "taylor_green_3d":
        return Grid.cube(n)
    if case == "rigid_rotation":
        return Grid((n, n, 1), origin=(-np.pi, -np.pi, 0.0))
    if case == "poiseuille":
        return Grid((n, n, 1), lengths=(2 * np.pi, 2.0, 2 * np.pi), origin=(-np.pi, -1.0, 0.0))
    return Grid.square(n)


def _report_row(t, report, energy, div_max, p1_min) -> dict:
    return dict(t=t, **report.row(), energy_kinetic=energy, div_max=div_max, p1_min=p1_min)


# ------------------------------------------------------------------ commands

def cmd_verify_moments(cfg: RunConfig) -> tuple[dict, int]:
    from .kinetics import MaxwellianParams, QuadratureSet, maxwellian_eval, moments
    from .liouville import moment_residuals

    flow = _flow(cfg)
    grid = sample_grid(cfg.case, cfg.nx)
    pts = grid.points()
    report = moment_residuals(flow, 0.0, pts, order=cfg.quad)
    s = eval_analytic(flow, pts, 0.0)
    p1 = s.p + flow.params.P0
    mp = MaxwellianParams.from_pressure(flow.params.rho0, s.V, p1)
    quad = QuadratureSet(cfg.quad, s.V, mp.vth)
    f = maxwellian_eval(MaxwellianParams(mp.rho0, s.V[:, None, :], np.asarray(mp.vth)[:, None]), quad.nodes)
    m = moments(f, quad)
    vscale = max(1.0, float(np.max(np.abs(s.V))))
    recon = dict(
        rho=float(np.max(np.abs(m.rho - flow.params.rho0))) / flow.params.rho0,
        V=float(np.max(np.abs(m.V - s.V))) / vscale,
        p1=float(np.max(np.abs(m.p1 - p1) / p1)),
        Pi=float(np.max(np.abs(m.Pi - p1[:, None, None] * np.eye(3)) / p1[:, None, None])),
        Q=float(np.max(np.abs(m.Q) / p1[:, None])),
    )
    energy = 0.5 * flow.params.rho0 * float(np.sum(s.V**2)) * grid.cell_volume
    row = _report_row(0.0, report, energy, float(np.max(np.abs(s.divergence()))), float(np.min(p1)))
    write_csv(os.path.join(cfg.out, "report.csv"), REPORT_COLUMNS, [row])
    mismatch = {k: dict(linf=v.linf, l2=v.l2) for k, v in report.mismatch.items()}
    kinetic = {k: dict(linf=v.linf, l2=v.l2) for k, v in report.kinetic.items()}
    mscale = {k: max(1.0, getattr(report, k).linf) for k in mismatch}
    ok_mom = all(mismatch[k]["linf"] <= MOMENT_TOL * mscale[k] for k in mismatch)
    ok_rec = all(v <= 1e-12 for v in recon.values())
    extra = dict(kinetic_moments=kinetic, mismatch=mismatch, reconstruction=recon, P0=flow.params.P0)
    if not ok_rec:
        return dict(extra, failure="moment reproduction"), 1
    if not ok_mom:
        return dict(extra, failure="kinetic-fluid moment agreement"), 1
    return extra, 0


LIOUVILLE_STEPS = (4e-2, 2e-2, 1e-2, 5e-3)


def cmd_verify_liouville(cfg: RunConfig) -> tuple[dict, int]:
    from .kinetics import QuadratureSet, vth_from_pressure
    from .liouville import MaxwellianPdf, liouville_residual
    from .vector_field import PhasePoint

    flow = _flow(cfg)
    if cfg.case == "taylor_green_3d":
        raise ConfigurationError("case: taylor_green_3d has no closed form away from t = 0, so d/dt cannot be differenced")
    pdf = MaxwellianPdf.from_flow(flow)
    grid = sample_grid(cfg.case, cfg.nx)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_traj
    r = grid.origin + rng.random((n, 3)) * np.where(np.array(grid.shape) > 1, grid.lengths, 0.0)
    t = 0.0
    s = eval_analytic(flow, r, t)
    vth = vth_from_pressure(s.p + flow.params.P0, flow.params.rho0)
    v = s.V + vth[:, None] * rng.standard_normal((n, 3))
    x = PhasePoint(r, v, t)
    scale = float(np.max(pdf(r, v, t)))
    rows = []
    for h in LIOUVILLE_STEPS:
        res = np.abs(liouville_residual(pdf, x, pdf.context, h)) / scale
        rows.append(dict(h=h, linf=float(np.max(res)), l2=float(np.sqrt(np.mean(res**2)))))
    write_csv(os.path.join(cfg.out, "liouville.csv"), ("h", "linf", "l2"), rows)
    e = [r_["linf"] for r_ in rows]
    orders = [math.log2(e[i] / e[i + 1]) if e[i + 1] > 0 else float("inf") for i in range(len(e) - 1)]
    energy = 0.5 * flow.params.rho0 * float(np.sum(s.V**2))
    from .liouville import Norms, ResidualReport

    zero = Norms(0.0, 0.0)
    rep = ResidualReport(zero, zero, zero, zero, Norms(rows[-1]["linf"], rows[-1]["l2"]))
    write_csv(os.path.join(cfg.out, "report.csv"), REPORT_COLUMNS,
              [_report_row(t, rep, energy, float(np.max(np.abs(s.divergence()))), float(np.min(s.p + flow.params.P0)))])
    converged = e[-1] <= 1e-10 or min(orders) >= 1.8
    extra = dict(observed_orders=orders, normalisation=scale, P0=flow.params.P0)
    if not converged:
        return dict(extra, failure="Liouville residual convergence",
                    message=f"residual stalls at {e[-1]:.3e} (observed orders {', '.join(f'{o:.2f}' for o in orders)})"), 1
    return extra, 0


def cmd_trace(cfg: RunConfig) -> tuple[dict, int]:
    from .kinetics import vth_from_pressure
    from .liouville import MaxwellianPdf
    from .phase_flow import PlanarWall, WallModel, integrate
    from .vector_field import PhasePoint

    flow = _flow(cfg)
    if cfg.case == "taylor_green_3d" and cfg.t_end > 0:
        raise ConfigurationError("case: taylor_green_3d fields exist only at t = 0 and cannot drive a trajectory")
    provider = MaxwellianPdf.from_flow(flow).context
    walls = None
    if cfg.case == "poiseuille":
        walls = WallModel([PlanarWall.sliding((0, -flow.half_width, 0), (0, 1, 0), (0, 0, 0)),
                           PlanarWall.sliding((0, flow.half_width, 0), (0, -1, 0), (0, 0, 0))])
    grid = sample_grid(cfg.case, cfg.nx)
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_traj
    span = np.where(np.array(grid.shape) > 1, grid.lengths, 0.0)
    r0 = grid.origin + span * (0.05 + 0.9 * rng.random((n, 3)))
    s = eval_analytic(flow, r0, 0.0)
    vth = vth_from_pressure(s.p + flow.params.P0, flow.params.rho0)
    v0 = s.V + vth[:, None] * rng.standard_normal((n, 3))
    traj_rows, event_rows = [], []
    for i in range(n):
        tr = integrate(PhasePoint(r0[i], v0[i], 0.0), 0.0, cfg.t_end, cfg.dt, provider, walls)
        for k in range(len(tr.t)):
            traj_rows.append(dict(id=i, t=tr.t[k], x=tr.r[k, 0], y=tr.r[k, 1], z=tr.r[k, 2],
                                  vx=tr.v[k, 0], vy=tr.v[k, 1], vz=tr.v[k, 2], J=tr.J[k]))
        for ev in tr.events:
            event_rows.append(dict(id=i, t_c=ev.t_c, x=ev.r_W[0], y=ev.r_W[1], z=ev.r_W[2],
                                   vx_minus=ev.v_minus[0], vy_minus=ev.v_minus[1], vz_minus=ev.v_minus[2],
                                   vx_plus=ev.v_plus[0], vy_plus=ev.v_plus[1], vz_plus=ev.v_plus[2]))
    write_csv(os.path.join(cfg.out, "trajectories.csv"), ("id", "t", "x", "y", "z", "vx", "vy", "vz", "J"), traj_rows)
    write_csv(os.path.join(cfg.out, "events.csv"),
              ("id", "t_c", "x", "y", "z", "vx_minus", "vy_minus", "vz_minus", "vx_plus", "vy_plus", "vz_plus"),
              event_rows)
    J = np.array([r_["J"] for r_ in traj_rows])
    return dict(trajectories=n, events=len(event_rows), J_min=float(J.min()), J_max=float(J.max())), 0


def _solver_config(cfg: RunConfig):
    from .kinetic_solver import SolverConfig

    return SolverConfig(nx=cfg.nx, dt=cfg.dt, t_end=cfg.t_end, order=cfg.quad, case=cfg.case, nu=cfg.nu,
                        P0=cfg.P0, cadence=cfg.cadence, pressure_rate=cfg.pressure_rate)


DIAG_COLUMNS = REPORT_COLUMNS + ("p1_max", "rho_dev", "pressure_gap", "velocity_error", "jmin", "jmax")


def cmd_solve_kinetic(cfg: RunConfig) -> tuple[dict, int]:
    from .kinetic_solver import run

    scfg = _solver_config(cfg)
    try:
        state, diag, _ = run(scfg)
    except IKTError as exc:
        diag = getattr(exc, "diagnostics", None)
        if diag is None:
            raise
        write_csv(os.path.join(cfg.out, "report.csv"), REPORT_COLUMNS, diag.rows)
        write_csv(os.path.join(cfg.out, "diagnostics.csv"), DIAG_COLUMNS, diag.rows)
        step_index, contract, message = diag.failure
        return dict(diag.metadata, failure=contract, failed_step=step_index, message=message), 1
    write_csv(os.path.join(cfg.out, "report.csv"), REPORT_COLUMNS, diag.rows)
    write_csv(os.path.join(cfg.out, "diagnostics.csv"), DIAG_COLUMNS, diag.rows)
    write_fields(os.path.join(cfg.out, "fields.csv"), state.grid, state.V, state.p)
    return dict(diag.metadata), 0


def _reference_rows(cfg: RunConfig):
    """Spectral solve from the case's initial data; rows at the configured cadence."""
    from .fields import FluidState, continuity_residual, energy_residual, momentum_residual, poisson_residual
    from .kinetic_solver import make_grid
    from .spectral import SpectralState, cfl_number, solve_pressure_poisson, spectral_step

    if cfg.case not in ("rest", "uniform", "taylor_green_2d", "taylor_green_3d"):
        raise ConfigurationError(f"case: {cfg.case!r} is not periodic; the reference solver needs a periodic box")
    flow = _flow(cfg)
    grid = make_grid(_solver_config(cfg))
    params = flow.params
    st = SpectralState.from_flow(flow, grid, 0.0)
    n_steps = max(1, int(round(cfg.t_end / cfg.dt)))
    dt = cfg.t_end / n_steps
    cfl = cfl_number(st, dt)
    if cfl > 1.0:
        raise ConfigurationError(f"dt: advective CFL {cfl:.3f} exceeds 1")
    l2 = lambda a: float(np.sqrt(np.mean(np.sum(np.reshape(a, (grid.size, -1)) ** 2, axis=1))))

    def row(state, V_prev, p_prev, dt_prev):
        V = state.velocity
        p = solve_pressure_poisson(V, grid, None, params.rho0)
        fs = FluidState(grid, V, p, None, state.time, params)
        dtV = np.zeros_like(V) if V_prev is None else (V - V_prev) / dt_prev
        dtp = np.zeros_like(p) if p_prev is None else (p - p_prev) / dt_prev
        s = fs.to_samples(dtV, dtp)
        r = dict(t=state.time, continuity_L2=l2(continuity_residual(s, params)),
                 momentum_L2=l2(momentum_residual(s, params)) if V_prev is not None else 0.0,
                 energy_L2=l2(energy_residual(s, params)) if V_prev is not None else 0.0,
                 poisson_L2=l2(poisson_residual(s, params)), liouville_L2=float("nan"),
                 energy_kinetic=state.kinetic_energy(params.rho0), div_max=float(np.max(np.abs(state.divergence()))),
                 p1_min=float(np.min(p + params.P0)))
        return r, V, p

    rows = []
    r0, _, _ = row(st, None, None, dt)
    rows.append(r0)
    states = [st]
    for i in range(n_steps):
        V_last = st.velocity
        st = spectral_step(st, dt, params.nu, None, params.rho0)
        if (i + 1) % cfg.cadence == 0 or i + 1 == n_steps:
            p_last = solve_pressure_poisson(V_last, grid, None, params.rho0)
            r, _, _ = row(st, V_last, p_last, dt)
            rows.append(r)
            states.append(st)
    return rows, states, dict(case=cfg.case, nx=cfg.nx, dt=dt, steps=n_steps, cfl=cfl, P0=params.P0)


def cmd_solve_reference(cfg: RunConfig) -> tuple[dict, int]:
    from .spectral import solve_pressure_poisson

    rows, states, meta = _reference_rows(cfg)
    final = states[-1]
    write_csv(os.path.join(cfg.out, "report.csv"), REPORT_COLUMNS, rows)
    V = final.velocity
    write_fields(os.path.join(cfg.out, "fields.csv"), final.grid, V, solve_pressure_poisson(V, final.grid))
    return meta, 0


COMPARE_COLUMNS = ("t", "kinetic_error", "reference_error", "kinetic_minus_reference", "energy_kinetic_solver",
                   "energy_reference", "energy_exact", "pressure_gap")


def cmd_compare(cfg: RunConfig) -> tuple[dict, int]:
    from .kinetic_solver import run

    flow = _flow(cfg)
    state_k, diag, hist = run(_solver_config(cfg), keep_history=True)
    rows_r, states_r, meta_r = _reference_rows(cfg)
    grid = state_k.grid
    exact_known = cfg.case in ("rest", "uniform", "taylor_green_2d")
    out = []
    for hk, hr, dk in zip(hist, states_r, diag.rows):
        Vr = hr.velocity
        if exact_known:
            s = eval_analytic(flow, grid.points(), hk.time)
            Ve = s.V.T.reshape((3,) + grid.shape)
            ek, er = float(np.max(np.abs(hk.V - Ve))), float(np.max(np.abs(Vr - Ve)))
            E_exact = 0.5 * flow.params.rho0 * float(np.sum(Ve**2)) * grid.cell_volume
        else:
            ek = er = E_exact = float("nan")
        out.append(dict(t=hk.time, kinetic_error=ek, reference_error=er,
                        kinetic_minus_reference=float(np.max(np.abs(hk.V - Vr))),
                        energy_kinetic_solver=hk.kinetic_energy(), energy_reference=hr.kinetic_energy(flow.params.rho0),
                        energy_exact=E_exact, pressure_gap=dk["pressure_gap"]))
    write_csv(os.path.join(cfg.out, "compare.csv"), COMPARE_COLUMNS, out)
    write_csv(os.path.join(cfg.out, "report.csv"), REPORT_COLUMNS, diag.rows)
    return dict(kinetic=diag.metadata, reference=meta_r), 0


_DISPATCH = {
    "verify-moments": cmd_verify_moments,
    "verify-liouville": cmd_verify_liouville,
    "trace": cmd_trace,
    "solve-kinetic": cmd_solve_kinetic,
    "solve-reference": cmd_solve_reference,
    "compare": cmd_compare,
}


def execute(cfg: RunConfig) -> int:
    """Run ``cfg`` and write its artifacts to ``cfg.out``; returns the exit code."""
    try:
        os.makedirs(cfg.out, exist_ok=True)
        if not os.access(cfg.out, os.W_OK):
            raise ConfigurationError(f"out: directory {cfg.out!r} is not writable")
    except OSError as exc:
        print(f"iktflow: configuration error [out]: {exc}", file=sys.stderr)
        return 2
    meta_path = os.path.join(cfg.out, "metadata.json")
    try:
        extra, code = _DISPATCH[cfg.command](cfg)
    except ConfigurationError as exc:
        write_metadata(meta_path, _metadata(cfg, dict(status="configuration error", failure=exc.contract,
                                                      message=str(exc))))
        print(f"iktflow: configuration error: {exc}", file=sys.stderr)
        return 2
    except IKTError as exc:
        write_metadata(meta_path, _metadata(cfg, dict(status="invariant violation", failure=exc.contract,
                                                      message=str(exc))))
        print(f"iktflow: invariant violation [{exc.contract}]: {exc}", file=sys.stderr)
        return 1
    status = "ok" if code == 0 else "invariant violation"
    write_metadata(meta_path, _metadata(cfg, dict(status=status, **extra)))
    if code != 0:
        print(f"iktflow: invariant violation [{extra.get('failure')}]: {extra.get('message', '')}".rstrip(": "),
              file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigurationError as exc:
        print(f"iktflow: configuration error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else 2
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
