"""Acceptance suite: one test, and one printed verdict line, per criterion.

The verdict lines are collected in ``conftest.ACCEPTANCE`` and repeated in the
terminal summary.  Criterion 6 and 7 share a module-scoped fixture that runs
the kinetic solver on 32^2, 64^2 and 128^2 (about five minutes on one core).
"""

import json
import os
import time

import numpy as np
import pytest

from iktflow import (AnalyticFlow, FluidParams, FluidSample, Grid, MaxwellianParams, MaxwellianPdf, PhasePoint,
                     PlanarWall, QuadratureSet, WallModel, bounce_back, eval_analytic, flow_map, integrate,
                     kinetic_bc_check, liouville_residual, maxwellian_context, maxwellian_eval, moment_residuals,
                     moments, vector_field_X, vth_from_pressure)
from iktflow.cli import main
from iktflow.kinetic_solver import SolverConfig, make_grid, run
from iktflow.spectral import SpectralState, solve_pressure_poisson, spectral_step

from conftest import record_verdict

EPS = np.finfo(float).eps
LIOUVILLE_STEPS = (4e-2, 2e-2, 1e-2, 5e-3)
# an observed order counts as "order >= q" when it rounds to q at one decimal
ORDER_SLACK = 0.05


# ---------------------------------------------------------------- criterion 1

def test_criterion_1_moment_reproduction():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    n = 100
    rho0 = rng.uniform(0.1, 10.0, n)
    V = rng.uniform(-5, 5, (n, 3))
    p1 = rng.uniform(0.05, 20.0, n)
    worst = dict(rho=0.0, V=0.0, p1=0.0, Pi=0.0, Q=0.0)
    for k in range(n):
        mp = MaxwellianParams.from_pressure(rho0[k], V[k], p1[k])
        q = QuadratureSet(8, V[k], mp.vth)
        f = maxwellian_eval(mp, q.nodes)
        m = moments(f, q)
        worst["rho"] = max(worst["rho"], abs(m.rho - rho0[k]) / rho0[k])
        worst["V"] = max(worst["V"], np.max(np.abs(m.V - V[k])) / np.max(np.abs(V[k])))
        worst["p1"] = max(worst["p1"], abs(m.p1 - p1[k]) / p1[k])
        worst["Pi"] = max(worst["Pi"], np.max(np.abs(m.Pi - p1[k] * np.eye(3))) / p1[k])
        worst["Q"] = max(worst["Q"], np.max(np.abs(m.Q)) / p1[k])
    elapsed = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-12 and elapsed < 10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (tol 1e-12), {elapsed:.2f} s"
    record_verdict(1, "moment reproduction", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------- criterion 2

def _liouville_sweep(flow, rng, lo, hi, n=60, t=0.3):
    r = lo + (hi - lo) * rng.random((n, 3))
    r[:, 2] = 0.0
    s = eval_analytic(flow, r, t)
    vth = vth_from_pressure(s.p + flow.params.P0, flow.params.rho0)
    x = PhasePoint(r, s.V + vth[:, None] * rng.standard_normal((n, 3)), t)
    pdf = MaxwellianPdf.from_flow(flow)
    scale = np.max(pdf(x.r, x.v, x.t))
    return np.array([np.max(np.abs(liouville_residual(pdf, x, pdf.context, h))) / scale for h in LIOUVILLE_STEPS])


def test_criterion_2_particular_solution():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    checks, notes = [], []
    # rigid rotation has p = rho w^2 r^2 / 2 growing outward, so it is sampled on
    # [-2, 2]^2 with a larger offset; Taylor-Green on its periodic box
    setups = {"taylor_green_2d": (1.5, 0.0, 2 * np.pi, Grid.square(32)),
              "rigid_rotation": (60.0, -2.0, 2.0, Grid((32, 32, 1), lengths=(4.0, 4.0, 1.0), origin=(-2, -2, 0)))}
    for case, (P0, lo, hi, grid) in setups.items():
        flow = AnalyticFlow(case, FluidParams.from_nu(0.01, 1.0, P0))
        e = _liouville_sweep(flow, rng, lo, hi)
        orders = np.log2(e[:-1] / e[1:])
        checks.append(orders[-1] >= 2 - ORDER_SLACK)
        notes.append(f"{case} order {orders[-1]:.4f}")
        rep = moment_residuals(flow, 0.0, grid.points(), order=8)
        mism = max(rep.mismatch[k].linf for k in ("continuity", "momentum", "energy"))
        checks.append(mism <= 1e-8)
        notes.append(f"mismatch {mism:.1e}")
        control = _liouville_sweep(flow.perturbed(0.05), rng, lo, hi)
        # a converging residual would drop by ~4^3 over the sweep
        stalls = control[-1] > 0.5 * control[0]
        checks.append(stalls)
        notes.append(f"control {control[0]:.2e}->{control[-1]:.2e}")
    elapsed = time.perf_counter() - t0
    ok = all(checks) and elapsed < 120
    detail = "; ".join(notes) + f"; {elapsed:.1f} s"
    record_verdict(2, "Maxwellian is a particular solution", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------- criterion 3

def _smooth_fields(rng, r, modes=4):
    """Random trigonometric fields with exact derivatives; V is solenoidal."""
    n = r.shape[0]
    V, G, lapV = np.zeros((n, 3)), np.zeros((n, 3, 3)), np.zeros((n, 3))
    p, gradp = np.zeros(n), np.zeros((n, 3))
    for _ in range(modes):
        k = rng.integers(-3, 4, 3).astype(float)
        if not k.any():
            k[0] = 1.0
        a = np.cross(k, rng.normal(size=3))
        phase = rng.uniform(0, 2 * np.pi)
        arg = r @ k + phase
        V += np.sin(arg)[:, None] * a
        G += np.cos(arg)[:, None, None] * a[:, None] * k[None, :]
        lapV -= (k @ k) * np.sin(arg)[:, None] * a
        b = rng.normal()
        p += b * np.cos(arg)
        gradp -= b * np.sin(arg)[:, None] * k
    f = rng.normal(size=3) * np.cos(r @ rng.normal(size=3))[:, None]
    return FluidSample(V=V, p=0.1 * p, f_ext=f, gradV=G, lapV=lapV, gradp=0.1 * gradp,
                       dtV=rng.normal(size=(n, 3)), dtp=rng.normal(size=n))


def test_criterion_3_mean_force_identity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for trial in range(50):
        params = FluidParams(rho0=rng.uniform(0.5, 3.0), mu=rng.uniform(1e-3, 0.2), P0=rng.uniform(1.0, 4.0))
        s = _smooth_fields(rng, rng.uniform(0, 2 * np.pi, (20, 3)))
        ctx = maxwellian_context(s, params, substitute_dtV=bool(trial % 2))
        q = QuadratureSet(6, s.V, vth_from_pressure(ctx.p1, params.rho0))
        F = vector_field_X(PhasePoint(np.zeros_like(q.nodes), q.nodes), ctx.expand())[1]
        mean = np.sum(q.weights[:, None] * F, axis=-2)
        target = s.f_ext / params.rho0 + params.nu * s.lapV
        worst = max(worst, np.max(np.abs(mean - target)) / max(1.0, np.max(np.abs(target))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 30
    detail = f"max |<F> - f/rho - nu lap V| = {worst:.1e} (tol 1e-10), {elapsed:.2f} s"
    record_verdict(3, "Maxwellian mean force", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------- criterion 4

def _corpus_trajectories(rng):
    """Every corpus case with trajectories from thermal initial velocities."""
    out = []
    for case in ("rest", "uniform", "rigid_rotation", "taylor_green_2d", "taylor_green_3d", "poiseuille"):
        flow = AnalyticFlow(case, FluidParams.from_nu(0.05, 1.0, 30.0), background=(0.4, -0.2, 0.1))
        pdf = MaxwellianPdf.from_flow(flow)
        provider = pdf.context
        walls = None
        if case == "taylor_green_3d":
            # closed form exists at t = 0 only: follow the frozen initial field
            provider = lambda r, t, _p=pdf.context: _p(r, 0.0)
        if case == "poiseuille":
            walls = WallModel([PlanarWall.sliding((0, -1, 0), (0, 1, 0), (0, 0, 0)),
                               PlanarWall.sliding((0, 1, 0), (0, -1, 0), (0, 0, 0))])
        for _ in range(4):
            r0 = rng.uniform(-0.9, 0.9, 3) if case in ("poiseuille", "rigid_rotation") else rng.uniform(0, 6, 3)
            s = eval_analytic(flow, r0[None], 0.0)
            vth = vth_from_pressure(s.p + flow.params.P0, flow.params.rho0)
            v0 = s.V[0] + 0.3 * vth[0] * rng.standard_normal(3)
            out.append(integrate(PhasePoint(r0, v0, 0.0), 0.0, 1.0, 0.02, provider, walls))
    return out


def test_criterion_4_flow_properties():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    tg = AnalyticFlow("taylor_green_2d", FluidParams.from_nu(0.01, 1.0, 1.5))
    provider = MaxwellianPdf.from_flow(tg).context
    r0 = rng.random((30, 3)) * 2 * np.pi
    v0 = rng.normal(size=(30, 3))

    r1, v1, J1 = flow_map(r0, v0, 0.0, 0.5, 0.01, provider)
    r2, v2, J2 = flow_map(r1, v1, 0.5, 0.0, 0.01, provider)
    round_trip = max(np.max(np.abs(r2 - r0)), np.max(np.abs(v2 - v0)), np.max(np.abs(J1 * J2 - 1)))

    ra, va, Ja = flow_map(r0, v0, 0.0, 0.6, 0.01, provider)
    rb, vb, Jb = flow_map(r0, v0, 0.0, 0.25, 0.01, provider)
    rc, vc, Jc = flow_map(rb, vb, 0.25, 0.6, 0.01, provider)
    composition = max(np.max(np.abs(ra - rc)), np.max(np.abs(va - vc)), np.max(np.abs(Ja - Jb * Jc)))

    trajs = _corpus_trajectories(rng)
    J_all = np.concatenate([tr.J for tr in trajs])
    J_ok = bool(np.all(np.isfinite(J_all)) and np.all(J_all > 0))

    x0 = np.concatenate([r0[0], v0[0]])
    eps = 1e-5
    M = np.empty((6, 6))
    for k in range(6):
        d = np.zeros(6)
        d[k] = eps
        rp, vp, _ = flow_map((x0 + d)[:3], (x0 + d)[3:], 0.0, 0.8, 0.01, provider, track_jacobian=False)
        rm, vm, _ = flow_map((x0 - d)[:3], (x0 - d)[3:], 0.0, 0.8, 0.01, provider, track_jacobian=False)
        M[:, k] = (np.concatenate([rp, vp]) - np.concatenate([rm, vm])) / (2 * eps)
    _, _, J = flow_map(r0[0], v0[0], 0.0, 0.8, 0.01, provider)
    jac_err = abs(np.linalg.det(M) / J - 1)

    frozen = lambda r, t: provider(r, 0.0)
    ref = flow_map(r0[:10], v0[:10], 0.0, 1.0, 0.1 / 16, frozen)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        r, v, _ = flow_map(r0[:10], v0[:10], 0.0, 1.0, dt, frozen)
        errs.append(max(np.max(np.abs(r - ref[0])), np.max(np.abs(v - ref[1]))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))

    elapsed = time.perf_counter() - t0
    ok = (round_trip <= 1e-8 and composition <= 1e-8 and J_ok and jac_err <= 1e-6
          and np.all(np.abs(orders - 4) <= 0.2) and elapsed < 120)
    detail = (f"round trip {round_trip:.1e}, composition {composition:.1e}, "
              f"J in [{J_all.min():.3f}, {J_all.max():.3f}] over {len(trajs)} trajectories, "
              f"Jacobian vs neighbours {jac_err:.1e}, RK4 orders {np.round(orders, 3).tolist()}, {elapsed:.1f} s")
    record_verdict(4, "NS dynamical system flow", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------- criterion 5

def test_criterion_5_bounce_back():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    n = 100_000
    scale = 10.0 ** rng.uniform(-3, 3, (n, 1))
    v_minus = rng.normal(size=(n, 3)) * scale
    V_W = rng.normal(size=(n, 3)) * scale * rng.uniform(0, 1, (n, 1))
    v_plus = bounce_back(v_minus, V_W)
    law = bool(np.array_equal(v_plus, 2.0 * V_W - v_minus))
    mag = np.abs(v_minus) + 2 * np.abs(V_W)
    invol = float(np.max(np.abs(bounce_back(v_plus, V_W) - v_minus) / mag))
    sp_m = np.linalg.norm(v_minus - V_W, axis=1)
    sp_p = np.linalg.norm(v_plus - V_W, axis=1)
    speed = float(np.max(np.abs(sp_p - sp_m) / np.max(mag, axis=1)))

    # events produced by the integrator: wall positions and continuity of r
    flow = AnalyticFlow("poiseuille", FluidParams.from_nu(0.05, 1.0, 1.0))
    provider = MaxwellianPdf.from_flow(flow).context
    walls = WallModel([PlanarWall.sliding((0, -1, 0), (0, 1, 0), (0.5, 0, 0)),
                       PlanarWall.sliding((0, 1, 0), (0, -1, 0), (0, 0, -0.3))])
    events, jump, on_wall, ev_speed = 0, 0.0, 0.0, 0.0
    for _ in range(20):
        x0 = PhasePoint(np.array([0.0, rng.uniform(-0.9, 0.9), 0.0]), rng.normal(size=3) * 4, 0.0)
        tr = integrate(x0, 0.0, 1.0, 0.02, provider, walls)
        events += len(tr.events)
        vmax = np.max(np.linalg.norm(tr.v, axis=1)) * 2
        jump = max(jump, np.max(np.linalg.norm(np.diff(tr.r, axis=0), axis=1) / (vmax * tr.dt)))
        for ev in tr.events:
            on_wall = max(on_wall, abs(abs(ev.r_W[1]) - 1))
            ev_speed = max(ev_speed, abs(np.linalg.norm(ev.v_plus - ev.V_W) - np.linalg.norm(ev.v_minus - ev.V_W))
                           / np.linalg.norm(ev.v_minus - ev.V_W))
    elapsed = time.perf_counter() - t0
    machine = 4 * EPS
    ok = (law and invol <= machine and speed <= machine and ev_speed <= machine and on_wall <= 1e-8
          and jump <= 1.0 and events > 0 and elapsed < 10)
    detail = (f"{n} random events: law exact={law}, involution {invol:.1e}, speed {speed:.1e} (tol {machine:.1e}); "
              f"{events} integrated events: |y|-1 {on_wall:.1e}, step/bound {jump:.2f}; {elapsed:.2f} s")
    record_verdict(5, "bounce-back", ok, detail)
    assert ok, detail


# ------------------------------------------------------------ criteria 6 and 7

NU = 0.01
RESOLUTIONS = (32, 64, 128)


@pytest.fixture(scope="module")
def taylor_green_runs():
    """Kinetic runs at three resolutions plus the spectral reference at 64^2."""
    runs = {}
    for nx in RESOLUTIONS:
        cfg = SolverConfig(nx=nx, dt=0.01, t_end=1.0, order=4, nu=NU, cadence=1)
        t0 = time.perf_counter()
        state, diag, hist = run(cfg, keep_history=True)
        runs[nx] = dict(cfg=cfg, state=state, diag=diag, hist=hist, wall=time.perf_counter() - t0)
    cfg = runs[64]["cfg"]
    flow = AnalyticFlow("taylor_green_2d", FluidParams.from_nu(NU))
    grid = make_grid(cfg)
    ref = SpectralState.from_flow(flow, grid, 0.0)
    ref_err = []
    for k in range(len(runs[64]["hist"])):
        if k:
            ref = spectral_step(ref, cfg.dt, NU)
        exact = eval_analytic(flow, grid.points(), ref.time).V.T.reshape((3,) + grid.shape)
        ref_err.append(float(np.max(np.abs(ref.velocity - exact))))
    runs["reference_error"] = np.array(ref_err)
    return runs


def test_criterion_6_kinetic_solve(taylor_green_runs):
    runs = taylor_green_runs
    r64 = runs[64]
    diag = r64["diag"]
    t = diag.column("t")
    E = diag.column("energy_kinetic")
    energy_dev = float(np.max(np.abs(E / (E[0] * np.exp(-4 * NU * t)) - 1)))
    kin_err = diag.column("velocity_error")
    ref_err = runs["reference_error"]
    err_ratio = float(np.max(kin_err) / np.max(ref_err))
    # successive-resolution differences on the nodes the grids share
    V = {nx: runs[nx]["state"].V for nx in RESOLUTIONS}
    d1 = float(np.max(np.abs(V[32] - V[64][:, ::2, ::2])))
    d2 = float(np.max(np.abs(V[64] - V[128][:, ::2, ::2])))
    order = float(np.log2(d1 / d2))
    rho_dev = max(runs[nx]["diag"].rho_dev_max for nx in RESOLUTIONS)
    p1_min = min(runs[nx]["diag"].p1_min for nx in RESOLUTIONS)
    checks = {
        "energy within 1%": energy_dev <= 1e-2,
        "velocity error < 10x reference": err_ratio < 10,
        "self-convergence order >= 2": order >= 2 - ORDER_SLACK,
        "rho constant to 1e-10": rho_dev <= 1e-10,
        "p1 > 0": p1_min > 0,
        "64^2 runtime < 10 min": r64["wall"] < 600,
    }
    failed = [k for k, v in checks.items() if not v]
    detail = (f"energy dev {energy_dev:.2e}; L-inf error {np.max(kin_err):.2e} vs reference {np.max(ref_err):.2e} "
              f"(ratio {err_ratio:.1e}); self-convergence {d1:.2e}, {d2:.2e} -> order {order:.2f}; "
              f"max |rho-rho0| {rho_dev:.1e}; min p1 {p1_min:.3f}; "
              f"runtimes " + ", ".join(f"{nx}^2 {runs[nx]['wall']:.0f} s" for nx in RESOLUTIONS))
    if failed:
        detail += "; failed: " + ", ".join(failed)
    record_verdict(6, "kinetic solve of Taylor-Green", not failed, detail)
    assert not failed, detail


def _gauge(p):
    return p - p.mean()


def test_criterion_7_pressure_without_poisson(taylor_green_runs):
    """Moment pressure vs the spectral Poisson pressure of the same velocity.

    The gap is reported every diagnostic step.  "Within discretization error"
    is checked against the discretization error of the moment pressure itself,
    estimated by Richardson extrapolation from the 64^2 and 128^2 runs at the
    same times (observed self-convergence order of the pressure).
    """
    runs = taylor_green_runs
    h64, h128 = runs[64]["hist"], runs[128]["hist"]
    p_c = {nx: _gauge(runs[nx]["state"].p) for nx in RESOLUTIONS}
    e1 = np.max(np.abs(p_c[32] - p_c[64][::2, ::2]))
    e2 = np.max(np.abs(p_c[64] - p_c[128][::2, ::2]))
    q = np.log2(e1 / e2)
    gaps, bounds = [], []
    for a, b in zip(h64, h128):
        assert a.time == pytest.approx(b.time)
        grid = a.grid
        p_poisson = solve_pressure_poisson(a.V, grid)
        gaps.append(float(np.max(np.abs(_gauge(a.p) - _gauge(p_poisson)))))
        diff = float(np.max(np.abs(_gauge(a.p) - _gauge(b.p)[::2, ::2])))
        bounds.append(diff * 2**q / (2**q - 1))
    gaps, bounds = np.array(gaps), np.array(bounds)
    print("   t      gap       discretization estimate")
    for a, g, bnd in zip(h64, gaps, bounds):
        print(f"{a.time:5.2f}  {g:.3e}  {bnd:.3e}")
    # the reported column agrees with the recomputation above
    assert np.allclose(runs[64]["diag"].column("pressure_gap"), gaps, rtol=1e-12, atol=1e-15)
    within = gaps[1:] <= bounds[1:]
    ok = bool(np.all(within))
    # t = 0 is excluded: both solvers start from the same exact fields
    worst = 1 + int(np.argmax(gaps[1:] / bounds[1:]))
    detail = (f"gap reported at {len(gaps)} steps, max {gaps.max():.2e}; pressure self-convergence order {q:.2f}; "
              f"gap within the discretization estimate at {int(within.sum())}/{len(within)} steps; "
              f"worst t={h64[worst].time:.2f}: gap {gaps[worst]:.2e} vs {bounds[worst]:.2e}")
    record_verdict(7, "pressure without Poisson", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------- criterion 8

def test_criterion_8_kinetic_boundary_conditions():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    walls = {
        "static": PlanarWall((0, 0, 0), (0, 1, 0)),
        "sliding": PlanarWall.sliding((0, 0, 0), (0, 1, 0), (0.7, 0.0, -0.4)),
        "oscillating": PlanarWall.oscillating((0, 0, 0), (0, 1, 0), 0.2, 3.0),
    }
    params = FluidParams(rho0=1.3, mu=0.01, P0=1.0)
    worst = dict(reflection=0.0, density=0.0, pressure=0.0)
    ok = True
    n = 50
    for name, wall in walls.items():
        for t in (0.0, 0.37, 1.1):
            V = np.broadcast_to(wall.wall_velocity(t), (n, 3)).copy()  # no-slip
            z = np.zeros((n, 3))
            s = FluidSample(V=V, p=rng.uniform(-0.5, 0.5, n), f_ext=z, gradV=np.zeros((n, 3, 3)), lapV=z,
                            gradp=z, dtV=z, dtp=np.zeros(n))
            rep = kinetic_bc_check(s, wall, t, params)
            ok &= rep.ok
            worst["reflection"] = max(worst["reflection"], rep.reflection_error)
            worst["density"] = max(worst["density"], rep.density_error)
            worst["pressure"] = max(worst["pressure"], rep.pressure_error)
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 10
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f" (static, sliding, oscillating walls), {elapsed:.2f} s"
    record_verdict(8, "kinetic boundary constraints", ok, detail)
    assert ok, detail


# ---------------------------------------------------------------- criterion 9

COMMAND_LINES = [
    ["verify-moments", "--nx", "16"],
    ["verify-liouville", "--nx", "16", "--seed", "11"],
    ["trace", "--case", "poiseuille", "--t-end", "0.5", "--n-traj", "4", "--seed", "7"],
    ["solve-kinetic", "--nx", "16", "--quad", "4", "--dt", "0.02", "--t-end", "0.1"],
    ["solve-reference", "--nx", "16", "--dt", "0.02", "--t-end", "0.1"],
    ["compare", "--nx", "16", "--quad", "4", "--dt", "0.02", "--t-end", "0.1"],
]


def _outputs(out):
    files = {name: open(os.path.join(out, name), "rb").read() for name in sorted(os.listdir(out))}
    meta = json.loads(files.pop("metadata.json"))
    meta["config"].pop("out")  # the only field that differs between the two runs
    return files, meta


def test_criterion_9_reproducibility(tmp_path):
    identical = []
    for k, argv in enumerate(COMMAND_LINES):
        outs = []
        for rep in ("a", "b"):
            out = str(tmp_path / f"{k}{rep}")
            assert main(argv + ["--out", out]) == 0
            outs.append(_outputs(out))
        identical.append(outs[0] == outs[1])
    ok = all(identical)
    detail = ", ".join(f"{argv[0]} {'identical' if same else 'DIFFERS'}" for argv, same in zip(COMMAND_LINES, identical))
    record_verdict(9, "byte-identical reruns", ok, detail)
    assert ok, detail
