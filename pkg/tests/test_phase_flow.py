import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from iktflow import (AnalyticFlow, FluidParams, MaxwellianPdf, PhasePoint, PlanarWall, Trajectory, WallModel,
                     bounce_back, flow_map, integrate, jacobian_along)
from iktflow.errors import ContractError, GrazingEventError, InvariantViolation
from iktflow.phase_flow import MAX_REFLECTIONS

vec3 = arrays(np.float64, 3, elements=st.floats(-1e3, 1e3))


@pytest.fixture
def provider(tg2d):
    return MaxwellianPdf.from_flow(tg2d).context


def _points(rng, n):
    r = rng.random((n, 3)) * 2 * np.pi
    v = rng.normal(size=(n, 3))
    return r, v


def test_bounce_back_examples():
    assert np.array_equal(bounce_back([1.0, 2.0, 3.0], [0.0, 0.0, 0.0]), [-1.0, -2.0, -3.0])
    assert np.array_equal(bounce_back([2.0, 0.0, 0.0], [1.0, 0.0, 0.0]), [0.0, 0.0, 0.0])
    with pytest.raises(GrazingEventError):
        bounce_back([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])


@given(v=vec3, W=vec3)
def test_bounce_back_isometry_and_involution(v, W):
    if np.linalg.norm(v - W) == 0:
        return
    vp = bounce_back(v, W)
    assert np.linalg.norm(vp - W) == pytest.approx(np.linalg.norm(v - W), rel=1e-15, abs=1e-12)
    assert np.allclose(bounce_back(vp, W), v, rtol=0, atol=1e-12)


def test_free_streaming_in_rest_flow():
    provider = MaxwellianPdf.from_flow(AnalyticFlow("rest")).context
    x0 = PhasePoint(np.array([0.1, 0.2, 0.3]), np.array([1.0, 0.0, 0.0]), 0.0)
    tr = integrate(x0, 0.0, 2.0, 0.1, provider)
    assert np.allclose(tr.r[:, 0], 0.1 + tr.t, atol=1e-14)
    assert np.allclose(tr.v, [1.0, 0.0, 0.0])
    assert np.allclose(tr.J, 1.0)
    assert np.allclose(jacobian_along(tr, provider), 1.0)


def test_round_trip_and_time_reversal(provider, rng):
    r0, v0 = _points(rng, 30)
    r1, v1, J1 = flow_map(r0, v0, 0.0, 0.5, 0.01, provider)
    r2, v2, J2 = flow_map(r1, v1, 0.5, 0.0, 0.01, provider)
    assert np.max(np.abs(r2 - r0)) < 1e-8
    assert np.max(np.abs(v2 - v0)) < 1e-8
    assert np.max(np.abs(J1 * J2 - 1)) < 1e-8


def test_flow_composition(provider, rng):
    r0, v0 = _points(rng, 30)
    ra, va, Ja = flow_map(r0, v0, 0.0, 0.6, 0.01, provider)
    rb, vb, Jb = flow_map(r0, v0, 0.0, 0.25, 0.01, provider)
    rc, vc, Jc = flow_map(rb, vb, 0.25, 0.6, 0.01, provider)
    assert np.max(np.abs(ra - rc)) < 1e-8
    assert np.max(np.abs(va - vc)) < 1e-8
    assert np.max(np.abs(Ja - Jb * Jc)) < 1e-8


def test_rk4_order_on_frozen_field(provider, rng):
    frozen = lambda r, t: provider(r, 0.0)
    r0, v0 = _points(rng, 10)
    ref = flow_map(r0, v0, 0.0, 1.0, 0.1 / 16, frozen)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        r, v, _ = flow_map(r0, v0, 0.0, 1.0, dt, frozen)
        errs.append(max(np.max(np.abs(r - ref[0])), np.max(np.abs(v - ref[1]))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 4) < 0.2), orders


def test_jacobian_matches_neighbouring_trajectories(provider, rng):
    r0, v0 = _points(rng, 1)
    x0 = np.concatenate([r0[0], v0[0]])
    eps = 1e-5
    M = np.empty((6, 6))
    for k in range(6):
        d = np.zeros(6)
        d[k] = eps
        xp, xm = x0 + d, x0 - d
        rp, vp, _ = flow_map(xp[:3], xp[3:], 0.0, 0.8, 0.01, provider, track_jacobian=False)
        rm, vm, _ = flow_map(xm[:3], xm[3:], 0.0, 0.8, 0.01, provider, track_jacobian=False)
        M[:, k] = (np.concatenate([rp, vp]) - np.concatenate([rm, vm])) / (2 * eps)
    _, _, J = flow_map(r0[0], v0[0], 0.0, 0.8, 0.01, provider)
    assert abs(np.linalg.det(M) / J - 1) < 1e-6


def test_jacobian_along_reproduces_integrated_jacobian(provider):
    x0 = PhasePoint(np.array([1.0, 2.0, 0.0]), np.array([0.3, -0.8, 0.4]), 0.0)
    tr = integrate(x0, 0.0, 0.5, 0.05, provider)
    assert np.allclose(jacobian_along(tr, provider), tr.J, rtol=1e-13)
    assert np.all(tr.J > 0) and np.all(np.isfinite(tr.J))


def _channel():
    flow = AnalyticFlow("poiseuille", FluidParams.from_nu(0.05, 1.0, 1.0))
    walls = WallModel([PlanarWall.sliding((0, -1, 0), (0, 1, 0), (0, 0, 0)),
                       PlanarWall.sliding((0, 1, 0), (0, -1, 0), (0, 0, 0))])
    return MaxwellianPdf.from_flow(flow).context, walls


def test_channel_bounce_back_events(rng):
    provider, walls = _channel()
    for _ in range(5):
        x0 = PhasePoint(np.array([0.0, rng.uniform(-0.9, 0.9), 0.0]), rng.normal(size=3) * 2, 0.0)
        tr = integrate(x0, 0.0, 2.0, 0.02, provider, walls)
        assert np.all(np.abs(tr.r[:, 1]) <= 1 + 1e-9)
        assert np.all(tr.J > 0)
        for ev in tr.events:
            assert abs(abs(ev.r_W[1]) - 1) < 1e-8
            assert np.array_equal(ev.v_plus, 2 * ev.V_W - ev.v_minus)
            assert np.isclose(np.linalg.norm(ev.n_w), 1.0)
        assert np.allclose(jacobian_along(tr, provider, walls), tr.J, rtol=1e-10)


def test_moving_wall_reflection_uses_wall_velocity():
    provider = MaxwellianPdf.from_flow(AnalyticFlow("rest")).context
    wall = PlanarWall.sliding((0, 0, 0), (0, 1, 0), (0.5, 0.0, 0.0))
    tr = integrate(PhasePoint(np.array([0, 0.5, 0]), np.array([0.0, -1.0, 0.0])), 0.0, 1.0, 0.1, provider,
                   WallModel([wall]))
    assert len(tr.events) == 1
    ev = tr.events[0]
    assert ev.t_c == pytest.approx(0.5, abs=1e-9)
    assert np.allclose(ev.v_plus, [1.0, 1.0, 0.0])


def test_sliding_wall_must_be_tangential():
    with pytest.raises(ContractError):
        PlanarWall.sliding((0, 0, 0), (0, 1, 0), (0, 1, 0))


def test_reflection_cap_trips():
    provider = MaxwellianPdf.from_flow(AnalyticFlow("rest")).context
    gap = 1e-3
    walls = WallModel([PlanarWall((0, 0, 0), (0, 1, 0)), PlanarWall((0, gap, 0), (0, -1, 0))])
    x0 = PhasePoint(np.array([0, gap / 2, 0]), np.array([0, 1.0, 0]))
    with pytest.raises(InvariantViolation) as exc:
        integrate(x0, 0.0, 0.1, 0.1, provider, walls)
    assert exc.value.contract == "reflection count"
    assert MAX_REFLECTIONS == 32


def test_trajectory_requires_monotone_time():
    with pytest.raises(InvariantViolation):
        Trajectory(np.array([0.0, 1.0, 0.5]), np.zeros((3, 3)), np.zeros((3, 3)), np.ones(3))
