"""Hamiltonian flows on chart phase space.

Every system is integrated in canonical chart coordinates ``y = (q, p)``.

* Flat systems live in standardized coordinates with ``p = v``.
* Curved systems live in the raw gnomonic chart with ``p = g_q v``, where
  ``v`` is the *Legendre velocity* ``g_q^{-1} p`` (the chart velocity for
  mechanical systems). Time is the curved-surface time.
* ``averaged`` systems add the orbit-averaged secondary potential, which
  depends on momenta as well, so ``q' != v`` along them.

First integrals of a curved state are reported at its flat correspondent:
same chart point, velocity divided by ``rho2``, then standardized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import model
from .errors import (
    ChartDomainError,
    QuadratureError,
    RegionError,
    SecularBilliardsError,
    SingularityError,
    StepSizeUnderflow,
)
from .geometry import (
    EUCLIDEAN,
    PhaseState,
    Space,
    check_chart_domain,
    inverse_metric,
    metric,
    standardize,
)
from .integrator import DenseSegment, StepperStats, dop853_steps
from .model import FirstIntegrals, ModelParams

__all__ = [
    "SystemSelector",
    "Trajectory",
    "SINGULARITY_DISTANCE",
    "to_canonical",
    "from_canonical",
    "canonical_field",
    "hamiltonian",
    "vector_field",
    "standardized_correspondent",
    "first_integrals",
    "integrate",
    "poisson_bracket_fd",
    "fd_gradient",
]

SINGULARITY_DISTANCE = 1e-6
SYSTEMS = ("kepler", "two_center", "lagrange", "averaged")


@dataclass(frozen=True)
class SystemSelector:
    """Which Hamiltonian to integrate, on which surface.

    ``kepler`` drops the secondary center and the Hooke term, ``two_center``
    drops the Hooke term, ``lagrange`` and ``averaged`` keep ``params`` as
    given. For a curved ``space`` the params are re-targeted to that
    curvature. ``qtol`` and ``node_cap`` configure the averaging quadrature.
    """

    which: str
    space: Space = EUCLIDEAN
    params: ModelParams = field(default_factory=ModelParams)
    qtol: float = 1e-12
    node_cap: int = 1 << 14

    def __post_init__(self):
        if self.which not in SYSTEMS:
            raise ValueError(f"unknown system {self.which!r}; expected one of {SYSTEMS}")
        p = self.params
        if self.space.is_curved and p.space != self.space:
            p = replace(p, space=self.space)
        if self.which == "kepler":
            p = replace(p, m2=0.0, f=0.0)
        elif self.which == "two_center":
            p = replace(p, f=0.0)
        if self.which == "averaged":
            if not p.m1 > 0:
                raise ValueError("averaged systems require m1 > 0")
            if not 1e-14 <= self.qtol <= 1e-6:
                raise ValueError("quadrature tolerance must lie in [1e-14, 1e-6]")
        object.__setattr__(self, "params", p)

    @property
    def curved(self) -> bool:
        return self.space.is_curved

    @property
    def kappa(self) -> int:
        return self.space.curvature

    def centers(self) -> list[np.ndarray]:
        """Singular centers in the integration chart."""
        p = self.params
        # the averaged potential is smooth at the secondary center itself
        with_secondary = p.m2 != 0.0 and self.which != "averaged"
        if self.curved:
            pts = [np.array([0.0, p.a])]
            if with_secondary:
                pts.append(np.array([0.0, -p.a]))
        else:
            pts = [np.zeros(2)]
            if with_secondary:
                pts.append(np.array([0.0, -2.0 * p.h]))
        return pts

    def averaged_system(self):
        from .secular import AveragedSystem

        return AveragedSystem(self.params, self.qtol, self.node_cap)


# ---------------------------------------------------------------------------
# canonical coordinates


def to_canonical(sys: SystemSelector, state: PhaseState) -> np.ndarray:
    if not sys.curved:
        return state.as_array()
    check_chart_domain(state.q, sys.space)
    p = metric(state.q, sys.space) @ state.v
    return np.concatenate([state.q, p])


def from_canonical(sys: SystemSelector, y, t: float = 0.0) -> PhaseState:
    y = np.asarray(y, dtype=float)
    if not sys.curved:
        return PhaseState(y[:2], y[2:], t)
    return PhaseState(y[:2], inverse_metric(y[:2], sys.space) @ y[2:], t)


def _canonical_to_std(y, sys: SystemSelector) -> np.ndarray:
    """Standardized flat correspondent(s) of canonical state(s) ``y`` (..., 4)."""
    y = np.asarray(y, dtype=float)
    if not sys.curved:
        return y
    k = sys.kappa
    q, p = y[..., :2], y[..., 2:]
    qp = np.sum(q * p, axis=-1)[..., None]
    v = p + k * qp * q  # = g^{-1} p / rho2
    s = math.sqrt(sys.params.c)
    a = sys.params.a
    out = np.empty_like(y)
    out[..., 0] = q[..., 0]
    out[..., 1] = (q[..., 1] - a) / s
    out[..., 2] = v[..., 0]
    out[..., 3] = v[..., 1] / s
    return out


def standardized_correspondent(sys: SystemSelector, state: PhaseState) -> np.ndarray:
    """Standardized flat state (xi, eta, vxi, veta) corresponding to ``state``."""
    if not sys.curved:
        return state.as_array()
    rho2 = 1.0 + sys.kappa * float(state.q @ state.q)
    x, y = state.q
    u, w = state.v / rho2
    return np.array(standardize(x, y, u, w, sys.params.a, sys.kappa))


def _kepler_params(sys):
    return replace(sys.params, m2=0.0, f=0.0)


def hamiltonian(sys: SystemSelector, y) -> float:
    """Value of the governing Hamiltonian at canonical ``y``."""
    y = np.asarray(y, dtype=float)
    q, p = y[:2], y[2:]
    mech = _kepler_params(sys) if sys.which == "averaged" else sys.params
    if sys.curved:
        k = sys.kappa
        rho2 = 1.0 + k * (q @ q)
        qp = q @ p
        H = 0.5 * rho2 * (p @ p + k * qp * qp) + model.curved_potential(q, mech)
    else:
        H = 0.5 * (p @ p) + model.euclidean_potential(q, mech)
    if sys.which == "averaged":
        from .secular import averaged_secondary_batch

        std = _canonical_to_std(y, sys)
        H += float(averaged_secondary_batch(std[None, :], sys.averaged_system(), sys.space)[0][0])
    return float(H)


def fd_gradient(fun: Callable[[np.ndarray], np.ndarray], y, step: float | None = None) -> np.ndarray:
    """Central-difference gradient with one Richardson level.

    ``fun`` maps a stack of points (m, n) to values (m,); all ``4 n``
    stencil points are evaluated in a single call.
    """
    y = np.asarray(y, dtype=float)
    n = len(y)
    if step is None:
        step = max(1e-5, 1e-5 * float(np.linalg.norm(y)))
    offsets = np.array([step, -step, step / 2, -step / 2])
    pts = np.repeat(y[None, :], 4 * n, axis=0)
    for i in range(n):
        pts[4 * i : 4 * i + 4, i] += offsets
    vals = np.asarray(fun(pts), dtype=float).reshape(n, 4)
    g1 = (vals[:, 0] - vals[:, 1]) / (2 * step)
    g2 = (vals[:, 2] - vals[:, 3]) / step
    return (4.0 * g2 - g1) / 3.0


def _averaged_gradient(sys: SystemSelector, y) -> np.ndarray:
    """Gradient in canonical ``(q, p)`` of the averaged secondary potential.

    The node count is adapted at ``y`` and then held fixed over the whole
    stencil, so every stencil point sees the same quadrature rule.
    """
    from .secular import averaged_secondary_stencil

    asys = sys.averaged_system()

    def W(Y):
        pts = np.vstack([y[None, :], Y])
        vals, _ = averaged_secondary_stencil(_canonical_to_std(pts, sys), asys, sys.space)
        return vals[1:]

    return fd_gradient(W, y)


def canonical_field(sys: SystemSelector) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side ``(dq/dt, dp/dt)`` of Hamilton's equations."""
    mech = _kepler_params(sys) if sys.which == "averaged" else sys.params
    k = sys.kappa
    m1, m2, f, a = mech.m1, mech.m2, mech.f, mech.a
    h = mech.h
    sqrt, hypot = math.sqrt, math.hypot
    tiny = model.SINGULAR_RADIUS

    if sys.curved:
        c = 1.0 + k * a * a

        def center_grad(x, yy, M, ac):
            # gradient of -M sqrt(c) (1 + k ac y) / sqrt((y - ac)^2 + c x^2)
            S = sqrt((yy - ac) ** 2 + c * x * x)
            if S < tiny:
                raise SingularityError("evaluation at a curved center")
            Ms = M * sqrt(c)
            N = 1.0 + k * ac * yy
            S3 = S * S * S
            return Ms * N * c * x / S3, -Ms * (k * ac / S - N * (yy - ac) / S3)

        def base(y):
            x, yy, px, py = y
            rho2 = 1.0 + k * (x * x + yy * yy)
            if rho2 <= 0:
                raise ChartDomainError("state left the hyperbolic chart")
            qp = x * px + yy * py
            pp = px * px + py * py
            gx, gy = center_grad(x, yy, m1, a)
            if m2 != 0.0:
                gx2, gy2 = center_grad(x, yy, m2, -a)
                gx += gx2
                gy += gy2
            gx += 2.0 * f * x
            gy += 2.0 * f * yy
            A = k * (pp + k * qp * qp)
            B = k * rho2 * qp
            return np.array([
                rho2 * (px + k * qp * x),
                rho2 * (py + k * qp * yy),
                -(A * x + B * px) - gx,
                -(A * yy + B * py) - gy,
            ])

    else:

        def base(y):
            x, e, u, w = y
            r = hypot(x, e)
            if r < tiny:
                raise SingularityError("evaluation at the primary center")
            r3 = r * r * r
            gx = m1 * x / r3 + 2.0 * f * x
            gy = m1 * e / r3 + 2.0 * f * (e + h)
            if m2 != 0.0:
                e2 = e + 2.0 * h
                R = hypot(x, e2)
                if R < tiny:
                    raise SingularityError("evaluation at the secondary center")
                R3 = R * R * R
                gx += m2 * x / R3
                gy += m2 * e2 / R3
            return np.array([u, w, -gx, -gy])

    if sys.which != "averaged":
        return lambda t, y: base(y)

    def averaged(t, y):
        g = _averaged_gradient(sys, y)
        out = base(y)
        out[:2] += g[2:]
        out[2:] -= g[:2]
        return out

    return averaged


def vector_field(sys: SystemSelector, state: PhaseState):
    """Phase derivative ``(dq/dt, dv/dt)`` in the state's own variables."""
    y = to_canonical(sys, state)
    dy = canonical_field(sys)(state.t, y)
    dq, dp = dy[:2], dy[2:]
    if not sys.curved:
        return dq, dp
    k = sys.kappa
    q, p = y[:2], y[2:]
    rho2 = 1.0 + k * (q @ q)
    P = np.eye(2) + k * np.outer(q, q)
    # v = rho2 (I + k q q^T) p
    dG_p = 2 * k * (q @ dq) * (P @ p) + rho2 * k * (np.outer(dq, q) + np.outer(q, dq)) @ p
    dv = dG_p + rho2 * (P @ dp)
    return dq, dv


def first_integrals(sys: SystemSelector, state: PhaseState) -> FirstIntegrals:
    """First integrals at the standardized correspondent of ``state``."""
    y = to_canonical(sys, state)
    std = standardized_correspondent(sys, state)
    return model.first_integrals(std, sys.params, E_target=hamiltonian(sys, y))


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Accepted-step samples of an integrated orbit plus dense output.

    ``status`` is ``"completed"`` or the reason for an early stop
    (``"singularity"``, ``"underflow"``, ``"chart_domain"``, ``"region"``,
    ``"max_steps"``).
    """

    system: SystemSelector
    times: np.ndarray
    canonical: np.ndarray
    segments: tuple
    status: str = "completed"
    message: str = ""
    stats: dict = field(default_factory=dict)

    @property
    def samples(self) -> list[PhaseState]:
        return [from_canonical(self.system, y, t) for t, y in zip(self.times, self.canonical)]

    @property
    def final(self) -> PhaseState:
        return from_canonical(self.system, self.canonical[-1], self.times[-1])

    @property
    def ok(self) -> bool:
        return self.status == "completed"

    def canonical_at(self, t) -> np.ndarray:
        """Dense-output canonical state(s) at time(s) ``t``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not self.segments:
            return np.repeat(self.canonical[:1], len(t), axis=0)
        fwd = self.times[-1] >= self.times[0]
        ends = np.array([s.t_end for s in self.segments])
        if fwd:
            idx = np.searchsorted(ends, t, side="left")
        else:
            idx = np.searchsorted(-ends, -t, side="left")
        idx = np.clip(idx, 0, len(self.segments) - 1)
        out = np.empty((len(t), self.canonical.shape[1]))
        for j in np.unique(idx):
            m = idx == j
            out[m] = self.segments[j](t[m])
        return out

    def states_at(self, t) -> np.ndarray:
        """Dense-output ``(q, v)`` rows at time(s) ``t``."""
        Y = self.canonical_at(t)
        if not self.system.curved:
            return Y
        out = Y.copy()
        for i, y in enumerate(Y):
            out[i, 2:] = inverse_metric(y[:2], self.system.space) @ y[2:]
        return out

    def standardized_at(self, t) -> np.ndarray:
        """Standardized flat correspondents at time(s) ``t``."""
        return _canonical_to_std(self.canonical_at(t), self.system)


def _near_center(sys: SystemSelector, q) -> bool:
    return any(np.hypot(*(q - c)) < SINGULARITY_DISTANCE for c in sys.centers())


_STATUS = (
    (SingularityError, "singularity"),
    (ChartDomainError, "chart_domain"),
    (RegionError, "region"),
    (QuadratureError, "region"),
    (StepSizeUnderflow, "underflow"),
)


def _status_of(exc: SecularBilliardsError) -> str:
    for cls, name in _STATUS:
        if isinstance(exc, cls):
            return name
    return "error"


def integrate(
    sys: SystemSelector,
    state: PhaseState,
    t_end: float,
    tol: float = 1e-10,
    *,
    max_steps: int = 1_000_000,
    max_step: float = math.inf,
    track_energy: bool = True,
) -> Trajectory:
    """Integrate ``sys`` from ``state`` to ``t_end`` (forward or backward).

    Stops early with a flagged status instead of raising when the orbit
    comes within ``1e-6`` of a center or leaves the admissible domain.
    """
    if not 1e-14 <= tol <= 1e-4:
        raise ValueError("tol must lie in [1e-14, 1e-4]")
    y0 = to_canonical(sys, state)
    if sys.which == "averaged":
        _check_region(sys, y0)
    fun = canonical_field(sys)
    stats = StepperStats()
    times = [state.t]
    Ys = [y0]
    segs: list[DenseSegment] = []
    status, message = "completed", ""
    H0 = hamiltonian(sys, y0) if track_energy else math.nan
    max_drift = 0.0
    if _near_center(sys, y0[:2]):
        status, message = "singularity", "initial state within 1e-6 of a center"
    else:
        try:
            for seg in dop853_steps(fun, state.t, y0, t_end, tol, max_step=max_step, stats=stats):
                segs.append(seg)
                y1 = seg.y0 + seg.F[0]
                times.append(seg.t1)
                Ys.append(y1)
                if track_energy:
                    max_drift = max(max_drift, abs(hamiltonian(sys, y1) - H0))
                if _near_center(sys, y1[:2]):
                    status, message = "singularity", f"within 1e-6 of a center at t={seg.t1!r}"
                    break
                if len(segs) >= max_steps:
                    status, message = "max_steps", "step budget exhausted"
                    break
        except SecularBilliardsError as exc:
            status, message = _status_of(exc), str(exc)
    return Trajectory(
        system=sys,
        times=np.array(times),
        canonical=np.array(Ys),
        segments=tuple(segs),
        status=status,
        message=message,
        stats={
            "n_steps": stats.n_steps,
            "n_rejected": stats.n_rejected,
            "n_fev": stats.n_fev,
            "max_energy_drift": max_drift,
        },
    )


def _check_region(sys: SystemSelector, y):
    std = _canonical_to_std(y, sys)
    E = model.kepler_energy(std, sys.params.m1)
    C = std[0] * std[3] - std[1] * std[2]
    if not E < 0:
        raise RegionError("averaged system needs E_Kep < 0 (region R)")
    if abs(C) < 1e-12:
        raise RegionError("averaged system needs C != 0 (region R)")


# ---------------------------------------------------------------------------
# Poisson brackets


def poisson_bracket_fd(
    F: Callable[[np.ndarray], float],
    G: Callable[[np.ndarray], float],
    state,
    step: float | None = None,
    kinetic_metric: Callable[[np.ndarray], np.ndarray] | None = None,
) -> float:
    """Finite-difference Poisson bracket ``{F, G}`` at a chart state.

    ``F`` and ``G`` take a 4-vector ``(q, v)``. Momenta are ``p = M(q) v``
    with ``M = kinetic_metric`` (identity by default, which is the
    Legendre identification of the standardized flat chart). Partial
    derivatives use central differences with one Richardson level and
    ``step = max(1e-5, 1e-5 |state|)``.
    """
    s = state.as_array() if isinstance(state, PhaseState) else np.asarray(state, dtype=float)
    if kinetic_metric is None:
        y = s
        to_state = None
    else:
        y = np.concatenate([s[:2], kinetic_metric(s[:2]) @ s[2:]])

        def to_state(Y):
            out = Y.copy()
            for i, row in enumerate(Y):
                out[i, 2:] = np.linalg.solve(kinetic_metric(row[:2]), row[2:])
            return out

    def wrap(fn):
        def batch(Y):
            X = Y if to_state is None else to_state(Y)
            return np.array([fn(x) for x in X])

        return batch

    gF = fd_gradient(wrap(F), y, step)
    gG = fd_gradient(wrap(G), y, step)
    return float(np.dot(gF[:2], gG[2:]) - np.dot(gF[2:], gG[:2]))
