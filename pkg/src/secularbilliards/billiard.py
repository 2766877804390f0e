"""Billiards with confocal conic walls under Kepler-type and averaged flows.

Walls are level sets of focal-distance functions built from geodesic
distances ``r1, r2`` to two foci, which gives the confocal family on the
plane, the sphere and the hyperbolic plane with one definition:

* ellipse:          ``r1 + r2 - 2 s``
* hyperbola branch: ``branch (r1 - r2) - 2 s``
* focal line:       ``r1 - r2`` (the degenerate member, perpendicular bisector)

Flat walls live in standardized coordinates (foci at the origin and at the
secondary center); curved walls live in the raw chart (foci at ``(0, +-a)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import SecularBilliardsError, SingularityError
from .flow import (
    SystemSelector,
    Trajectory,
    _near_center,
    _status_of,
    canonical_field,
    first_integrals,
    from_canonical,
    to_canonical,
)
from .geometry import (
    PhaseState,
    Space,
    geodesic_distance,
    geodesic_distance_gradient,
    inverse_metric,
    metric,
    reflect_vector,
)
from .integrator import DenseSegment, StepperStats, dop853_steps
from .model import FirstIntegrals, ModelParams

__all__ = [
    "Wall",
    "BounceRecord",
    "BilliardRun",
    "confocal_wall",
    "wall_value",
    "wall_normal",
    "find_impact",
    "run_billiard",
    "WALL_KINDS",
]

WALL_KINDS = ("ellipse", "hyperbola_branch", "focal_line")
TIME_TOL = 1e-12
GRAZE_TOL = 1e-10
FOCUS_TOL = 1e-8
CORNER_TOL = 1e-8
NUDGE = 1e-12
SUBSAMPLES = 8


@dataclass(frozen=True, eq=False)
class Wall:
    """One member of a confocal family, optionally restricted to an arc.

    ``arc`` is a window ``(theta_min, theta_max)`` of the polar angle of the
    chart point about the midpoint of the foci; outside it the wall is open.
    """

    kind: str
    foci: tuple
    space: Space
    s: float = 0.0
    branch: int = 1
    arc: tuple | None = None

    def __post_init__(self):
        if self.kind not in WALL_KINDS:
            raise ValueError(f"unknown wall kind {self.kind!r}; expected one of {WALL_KINDS}")
        F1, F2 = (np.array(f, dtype=float).reshape(2) for f in self.foci)
        object.__setattr__(self, "foci", (F1, F2))
        half = 0.5 * float(geodesic_distance(F1, F2, self.space))
        if self.kind == "ellipse" and not self.s > half:
            raise ValueError(f"ellipse needs s > {half!r} (half the focal distance)")
        if self.kind == "hyperbola_branch":
            if not 0 < self.s < half:
                raise ValueError(f"hyperbola needs 0 < s < {half!r}")
            if self.branch not in (1, -1):
                raise ValueError("branch must be +1 or -1")
        if self.arc is not None:
            lo, hi = (float(v) for v in self.arc)
            if not lo < hi:
                raise ValueError("arc window must satisfy theta_min < theta_max")
            object.__setattr__(self, "arc", (lo, hi))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.foci[0] + self.foci[1])

    def arc_angle(self, q) -> float:
        d = np.asarray(q, dtype=float) - self.midpoint
        return math.atan2(d[1], d[0])

    def in_arc(self, q) -> bool:
        if self.arc is None:
            return True
        th = self.arc_angle(q)
        lo, hi = self.arc
        # compare modulo 2 pi
        rel = (th - lo) % (2 * math.pi)
        return rel <= hi - lo

    def corner_distance(self, q) -> float:
        """Chart distance from ``q`` to the nearest arc endpoint (inf if no arc)."""
        if self.arc is None:
            return math.inf
        r = float(np.hypot(*(np.asarray(q) - self.midpoint)))
        th = self.arc_angle(q)
        return min(r * abs(math.remainder(th - end, 2 * math.pi)) for end in self.arc)


def confocal_wall(kind: str, params: ModelParams, space: Space, s: float = 0.0, branch: int = 1,
                  arc=None, shift=(0.0, 0.0)) -> Wall:
    """Wall of the confocal family whose foci are the two Kepler centers.

    A nonzero ``shift`` translates both foci in the chart, which produces a
    non-confocal wall (used as a negative control).
    """
    if space.is_curved:
        F1, F2 = np.array([0.0, params.a]), np.array([0.0, -params.a])
    else:
        F1, F2 = np.zeros(2), np.array([0.0, -2.0 * params.h])
    sh = np.asarray(shift, dtype=float)
    return Wall(kind, (F1 + sh, F2 + sh), space, float(s), int(branch), arc)


def wall_value(wall: Wall, point, space: Space | None = None):
    space = wall.space if space is None else space
    r1 = geodesic_distance(point, wall.foci[0], space)
    r2 = geodesic_distance(point, wall.foci[1], space)
    if wall.kind == "ellipse":
        return r1 + r2 - 2 * wall.s
    if wall.kind == "hyperbola_branch":
        return wall.branch * (r1 - r2) - 2 * wall.s
    return r1 - r2


def _wall_gradient(wall: Wall, q, space: Space) -> np.ndarray:
    g1 = geodesic_distance_gradient(q, wall.foci[0], space)
    g2 = geodesic_distance_gradient(q, wall.foci[1], space)
    if wall.kind == "ellipse":
        return g1 + g2
    if wall.kind == "hyperbola_branch":
        return wall.branch * (g1 - g2)
    return g1 - g2


def wall_normal(wall: Wall, point, space: Space | None = None) -> np.ndarray:
    """Metric-unit normal (gradient direction of :func:`wall_value`)."""
    space = wall.space if space is None else space
    q = np.asarray(point, dtype=float)
    for F in wall.foci:
        if float(geodesic_distance(q, F, space)) < FOCUS_TOL:
            raise SingularityError("wall normal is undefined at a focus")
    dF = _wall_gradient(wall, q, space)
    n = inverse_metric(q, space) @ dF
    norm = math.sqrt(float(n @ metric(q, space) @ n))
    if norm < 1e-12:
        raise SingularityError("degenerate wall gradient")
    return n / norm


@dataclass(frozen=True, eq=False)
class BounceRecord:
    time: float
    point: np.ndarray
    v_pre: np.ndarray
    v_post: np.ndarray
    pre: FirstIntegrals
    post: FirstIntegrals
    wall_index: int = 0

    @property
    def dD(self) -> float:
        return self.post.D - self.pre.D

    @property
    def dE_kep(self) -> float:
        return self.post.E_kep - self.pre.E_kep

    @property
    def dE_target(self) -> float:
        return self.post.E_target - self.pre.E_target


@dataclass(frozen=True, eq=False)
class BilliardRun:
    trajectory: Trajectory
    bounces: list
    grazes: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return self.trajectory.status

    def __iter__(self):
        # allows ``traj, bounces = run_billiard(...)``
        return iter((self.trajectory, self.bounces))


def _normal_speed(sys: SystemSelector, wall: Wall, y) -> float:
    st = from_canonical(sys, y)
    n = wall_normal(wall, st.q, sys.space)
    return float(st.v @ metric(st.q, sys.space) @ n)


def find_impact(segment: DenseSegment, wall: Wall, space: Space | None = None, side: float | None = None,
                t_from: float | None = None):
    """Earliest crossing of ``wall`` within ``segment``.

    Returns ``(t, y)`` with the canonical state at the crossing (refined by
    bisection to ``1e-12`` in time) or ``None``. ``side`` is the sign of
    the wall function on the side the orbit starts from; by default the
    sign at the start of the segment.
    """
    space = wall.space if space is None else space
    t0 = segment.t0 if t_from is None else t_from
    t1 = segment.t_end

    def F(t):
        return float(wall_value(wall, segment(t)[:2], space))

    if side is None:
        side = 1.0 if F(t0) >= 0 else -1.0
    ts = np.linspace(t0, t1, SUBSAMPLES + 1)
    Y = segment(ts)
    vals = side * np.asarray(wall_value(wall, Y[:, :2], space))
    for j in range(1, len(ts)):
        if vals[j] < 0 <= vals[j - 1]:
            lo, hi = ts[j - 1], ts[j]
            tc = brentq(F, lo, hi, xtol=TIME_TOL, rtol=4 * np.finfo(float).eps)
            return tc, segment(tc)
    return None


def run_billiard(sys: SystemSelector, walls, state: PhaseState, t_end: float, max_bounces: int = 50,
                 tol: float = 1e-12) -> BilliardRun:
    """Integrate ``sys`` with elastic reflections at ``walls``.

    Stops at ``t_end``, after ``max_bounces`` reflections, or early with a
    flagged trajectory status (``singularity``, ``focus_degeneracy``,
    ``corner_degeneracy`` or the integration failure reason).
    """
    walls = [walls] if isinstance(walls, Wall) else list(walls)
    if not walls:
        raise ValueError("a billiard needs at least one wall")
    space = sys.space
    for w in walls:
        if w.space != space:
            raise ValueError("wall and system live on different surfaces")
    fun = canonical_field(sys)
    y = to_canonical(sys, state)
    t = state.t
    sides = []
    for w in walls:
        v = float(wall_value(w, y[:2], space))
        if v == 0.0:
            raise ValueError("initial state lies on a wall")
        sides.append(1.0 if v > 0 else -1.0)

    stats = StepperStats()
    times, Ys, segs = [t], [y], []
    bounces: list[BounceRecord] = []
    grazes: list[tuple] = []
    status, message = "completed", ""
    try:
        while status == "completed" and len(bounces) < max_bounces and t < t_end:
            hit = None
            for seg in dop853_steps(fun, t, y, t_end, tol, stats=stats):
                t_scan = seg.t0
                while True:
                    best = None
                    for i, w in enumerate(walls):
                        imp = find_impact(seg, w, space, sides[i], t_scan)
                        if imp is not None and (best is None or imp[0] < best[0]):
                            best = (imp[0], imp[1], i)
                    if best is None:
                        break
                    tc, yc, i = best
                    w = walls[i]
                    if not w.in_arc(yc[:2]):
                        sides[i] = -sides[i]
                        t_scan = tc + TIME_TOL
                        continue
                    if w.corner_distance(yc[:2]) < CORNER_TOL:
                        status, message = "corner_degeneracy", f"impact at an arc endpoint at t={tc!r}"
                        hit = (tc, yc, i)
                        break
                    if any(float(np.hypot(*(yc[:2] - F))) < FOCUS_TOL for F in w.foci):
                        status, message = "focus_degeneracy", f"impact at a focus at t={tc!r}"
                        hit = (tc, yc, i)
                        break
                    if abs(_normal_speed(sys, w, yc)) < GRAZE_TOL:
                        grazes.append((tc, i))
                        sides[i] = -sides[i]
                        t_scan = tc + TIME_TOL
                        continue
                    hit = (tc, yc, i)
                    break
                if hit is not None:
                    seg = DenseSegment(seg.t0, seg.t1, seg.y0, seg.F, hit[0])
                    segs.append(seg)
                    times.append(hit[0])
                    Ys.append(hit[1])
                    break
                segs.append(seg)
                times.append(seg.t1)
                Ys.append(seg.y1)
                if _near_center(sys, seg.y1[:2]):
                    status, message = "singularity", f"within 1e-6 of a center at t={seg.t1!r}"
                    break
            if hit is None or status != "completed":
                t = times[-1]
                break
            tc, yc, i = hit
            pre_state = from_canonical(sys, yc, tc)
            n = wall_normal(walls[i], pre_state.q, space)
            post_state = reflect_vector(pre_state, n, space)
            rec = BounceRecord(
                time=tc,
                point=pre_state.q.copy(),
                v_pre=pre_state.v.copy(),
                v_post=post_state.v.copy(),
                pre=first_integrals(sys, pre_state),
                post=first_integrals(sys, post_state),
                wall_index=i,
            )
            bounces.append(rec)
            v = post_state.v
            q_new = post_state.q + NUDGE * v / float(np.linalg.norm(v))
            y = to_canonical(sys, PhaseState(q_new, v, tc))
            t = tc
        if status == "completed" and len(bounces) >= max_bounces and t < t_end:
            status, message = "max_bounces", f"stopped after {len(bounces)} bounces"
    except SecularBilliardsError as exc:
        status, message = _status_of(exc), str(exc)

    traj = Trajectory(
        system=sys,
        times=np.array(times),
        canonical=np.array(Ys),
        segments=tuple(segs),
        status=status,
        message=message,
        stats={"n_steps": stats.n_steps, "n_rejected": stats.n_rejected, "n_fev": stats.n_fev,
               "n_bounces": len(bounces), "n_grazes": len(grazes)},
    )
    return BilliardRun(traj, bounces, grazes)
