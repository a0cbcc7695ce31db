"""Integration of the NS dynamical system with Jacobian tracking and bounce-back walls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, GrazingEventError, InvariantViolation
from .vector_field import ContextProvider, PhasePoint, phase_divergence, vector_field_X

MAX_REFLECTIONS = 32
EVENT_TOL = 1e-10


def bounce_back(v_minus, V_W, *, tol: float = 0.0) -> np.ndarray:
    """Wall-frame velocity reversal ``v+ = 2 V_W - v-``.

    The caller keeps the position unchanged.  A vanishing relative velocity is a
    grazing contact, which the reflection law does not cover.
    """
    v_minus = np.asarray(v_minus, dtype=float)
    V_W = np.asarray(V_W, dtype=float)
    rel = np.linalg.norm(v_minus - V_W, axis=-1)
    if np.any(rel <= tol):
        raise GrazingEventError("zero relative velocity at wall contact")
    return 2.0 * V_W - v_minus


@dataclass
class PlanarWall:
    """Plane through ``position(t)`` with unit ``normal`` pointing into the fluid.

    ``velocity(t)`` is the wall velocity used by the reflection law; its normal
    component must match the motion of the plane, which ``displacement(t)``
    describes (``None`` for a plane that does not move along its normal).
    """

    point: np.ndarray
    normal: np.ndarray
    velocity: Optional[Callable[[float], np.ndarray]] = None
    displacement: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        self.point = np.asarray(self.point, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)

    @classmethod
    def sliding(cls, point, normal, speed) -> "PlanarWall":
        """Static plane moving tangentially with constant velocity ``speed``."""
        speed = np.asarray(speed, dtype=float)
        n = np.asarray(normal, dtype=float) / np.linalg.norm(normal)
        if abs(speed @ n) > 1e-14:
            raise ContractError("sliding wall velocity must be tangential")
        return cls(point, n, velocity=lambda t: speed)

    @classmethod
    def oscillating(cls, point, normal, amplitude: float, omega: float) -> "PlanarWall":
        """Plane oscillating along its normal, ``x_W = point + a sin(omega t) n`` (C-infinity in time)."""
        n = np.asarray(normal, dtype=float) / np.linalg.norm(normal)
        return cls(point, n,
                   velocity=lambda t: amplitude * omega * math.cos(omega * t) * n,
                   displacement=lambda t: amplitude * math.sin(omega * t) * n)

    def position(self, t: float) -> np.ndarray:
        return self.point if self.displacement is None else self.point + self.displacement(t)

    def wall_velocity(self, t: float) -> np.ndarray:
        return np.zeros(3) if self.velocity is None else np.asarray(self.velocity(t), dtype=float)

    def signed_distance(self, r, t: float) -> np.ndarray:
        return (np.asarray(r) - self.position(t)) @ self.normal


@dataclass
class WallModel:
    """Planar walls; directions without walls are treated as periodic/unbounded by the caller."""

    walls: Sequence[PlanarWall] = ()


@dataclass
class WallEvent:
    t_c: float
    r_W: np.ndarray
    n_w: np.ndarray  # unit vector pointing from the fluid toward the wall
    V_W: np.ndarray
    v_minus: np.ndarray
    v_plus: np.ndarray


@dataclass
class Trajectory:
    t: np.ndarray
    r: np.ndarray
    v: np.ndarray
    J: np.ndarray
    events: list[WallEvent] = field(default_factory=list)
    dt: float = 0.0

    def __post_init__(self):
        steps = np.diff(self.t)
        if steps.size and not (np.all(steps > 0) or np.all(steps < 0)):
            raise InvariantViolation("trajectory times are not strictly monotone")

    def point(self, i: int) -> PhasePoint:
        return PhasePoint(self.r[i], self.v[i], float(self.t[i]))

    @property
    def final(self) -> PhasePoint:
        return self.point(-1)


def _rhs(r, v, t, provider: ContextProvider, track_jacobian: bool):
    ctx = provider(r, t)
    x = PhasePoint(r, v, t)
    dr, dv = vector_field_X(x, ctx)
    div = phase_divergence(x, ctx) if track_jacobian else None
    return dr, dv, div


def rk4_step(r, v, J, t, h, provider: ContextProvider, track_jacobian: bool = True):
    """One classical RK4 step of ``(r, v, J)``; ``J`` may be ``None`` when not tracked."""
    track = track_jacobian and J is not None
    k1r, k1v, d1 = _rhs(r, v, t, provider, track)
    k2r, k2v, d2 = _rhs(r + 0.5 * h * k1r, v + 0.5 * h * k1v, t + 0.5 * h, provider, track)
    k3r, k3v, d3 = _rhs(r + 0.5 * h * k2r, v + 0.5 * h * k2v, t + 0.5 * h, provider, track)
    k4r, k4v, d4 = _rhs(r + h * k3r, v + h * k3v, t + h, provider, track)
    r_new = r + h / 6 * (k1r + 2 * k2r + 2 * k3r + k4r)
    v_new = v + h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
    if not (np.all(np.isfinite(r_new)) and np.all(np.isfinite(v_new))):
        raise InvariantViolation("non-finite phase point after RK4 step", contract="finite vector field")
    if not track:
        return r_new, v_new, J
    # J' = J div, integrated with the same stages
    j1 = J * d1
    j2 = (J + 0.5 * h * j1) * d2
    j3 = (J + 0.5 * h * j2) * d3
    j4 = (J + h * j3) * d4
    return r_new, v_new, J + h / 6 * (j1 + 2 * j2 + 2 * j3 + j4)


def _check_jacobian(J, t):
    if not np.all(np.isfinite(J)) or not np.all(J > 0):
        raise InvariantViolation(f"phase-space Jacobian left (0, inf) at t={t:.6g}",
                                 contract="Jacobian regularity")


def _n_steps(t0, t1, dt):
    if not dt > 0:
        raise ContractError("step size must be positive")
    return max(1, int(math.ceil(abs(t1 - t0) / dt - 1e-12)))


def flow_map(r0, v0, t0: float, t1: float, dt: float, provider: ContextProvider, track_jacobian: bool = True):
    """Batched flow map ``chi(x0, t0, t1)`` without walls.

    Returns ``(r, v, J)`` at ``t1``; ``t1 < t0`` integrates backward.  ``J`` is
    the determinant of the map from ``t0`` to ``t1``.
    """
    n = _n_steps(t0, t1, dt)
    h = (t1 - t0) / n
    r = np.array(r0, dtype=float)
    v = np.array(v0, dtype=float)
    J = np.ones(r.shape[:-1]) if track_jacobian else None
    for i in range(n):
        t = t0 + i * h
        r, v, J = rk4_step(r, v, J, t, h, provider, track_jacobian)
        if track_jacobian:
            _check_jacobian(J, t + h)
    return r, v, J


def _first_crossing(r, v, J, t, h, provider, walls, track):
    """Earliest wall crossing inside the step ``[t, t+h]``, or ``None``."""
    r1, v1, J1 = rk4_step(r, v, J, t, h, provider, track)
    best = None
    for w in walls:
        if w.signed_distance(r1, t + h) >= 0:
            continue
        lo, hi = 0.0, 1.0
        while (hi - lo) * abs(h) > EVENT_TOL:
            mid = 0.5 * (lo + hi)
            rm, _, _ = rk4_step(r, v, J, t, mid * h, provider, False)
            if w.signed_distance(rm, t + mid * h) >= 0:
                lo = mid
            else:
                hi = mid
        if best is None or lo < best[0]:
            best = (lo, w)
    return (r1, v1, J1), best


def integrate(x0: PhasePoint, t0: float, t1: float, dt: float, provider: ContextProvider,
              walls: Optional[WallModel] = None, track_jacobian: bool = True) -> Trajectory:
    """RK4 trajectory of a single phase point, with bounce-back at planar walls.

    Crossings are located by bisection on the signed wall distance to within
    ``1e-10`` in time; the position is left unchanged and the velocity is
    reflected in the wall frame.  ``t1 < t0`` runs the flow backward.
    """
    walls = list(walls.walls) if walls is not None else []
    n = _n_steps(t0, t1, dt)
    h = (t1 - t0) / n
    r = np.array(x0.r, dtype=float)
    v = np.array(x0.v, dtype=float)
    J = 1.0 if track_jacobian else None
    for w in walls:
        if w.signed_distance(r, t0) < 0:
            raise ContractError("initial point lies outside the walls")
    ts, rs, vs, Js, events = [t0], [r.copy()], [v.copy()], [1.0], []
    for i in range(n):
        t_start = t0 + i * h
        t_end = t0 + (i + 1) * h
        t, remaining = t_start, h
        reflections = 0
        while True:
            (r1, v1, J1), hit = _first_crossing(r, v, J, t, remaining, provider, walls, track_jacobian)
            if hit is None:
                r, v, J = r1, v1, J1
                break
            s, wall = hit
            reflections += 1
            if reflections > MAX_REFLECTIONS:
                raise InvariantViolation(f"more than {MAX_REFLECTIONS} reflections in one step at t={t:.6g}",
                                         contract="reflection count")
            r, v, J = rk4_step(r, v, J, t, s * remaining, provider, track_jacobian)
            t_c = t + s * remaining
            V_W = wall.wall_velocity(t_c)
            v_plus = bounce_back(v, V_W, tol=1e-12 * max(1.0, float(np.linalg.norm(v))))
            events.append(WallEvent(t_c, r.copy(), -wall.normal, V_W, v.copy(), v_plus.copy()))
            v = v_plus
            t, remaining = t_c, t_end - t_c
            if abs(remaining) <= EVENT_TOL:
                break
        if track_jacobian:
            _check_jacobian(J, t_end)
        ts.append(t_end)
        rs.append(r.copy())
        vs.append(v.copy())
        Js.append(J if track_jacobian else np.nan)
    return Trajectory(np.array(ts), np.array(rs), np.array(vs), np.array(Js, dtype=float), events, dt=abs(h))


def jacobian_along(traj: Trajectory, provider: ContextProvider, walls: Optional[WallModel] = None) -> np.ndarray:
    """``J(t)`` from ``dJ/dt = J div_x X`` on the trajectory's own RK4 grid, ``J(t0) = 1``.

    Each stored step is re-integrated from its recorded start point, splitting
    at recorded wall events (the reflection map has unit Jacobian).
    """
    J = [1.0]
    events = sorted(traj.events, key=lambda e: e.t_c, reverse=bool(traj.t[-1] < traj.t[0]))
    k = 0
    for i in range(len(traj.t) - 1):
        t, t_end = float(traj.t[i]), float(traj.t[i + 1])
        r, v, Jc = traj.r[i].copy(), traj.v[i].copy(), J[-1]
        while k < len(events) and (events[k].t_c - t) * (t_end - events[k].t_c) >= 0 and events[k].t_c != t:
            e = events[k]
            r, v, Jc = rk4_step(r, v, Jc, t, e.t_c - t, provider, True)
            v = e.v_plus.copy()
            t = e.t_c
            k += 1
        if abs(t_end - t) > 0:
            r, v, Jc = rk4_step(r, v, Jc, t, t_end - t, provider, True)
        _check_jacobian(Jc, t_end)
        J.append(Jc)
    return np.array(J)
