"""Configuration surfaces of constant curvature and their gnomonic charts.

The plane, the sphere and the hyperbolic plane are handled through one
family of charts. A chart point ``q = (x, y)`` sits at ``(x, y, -1)`` in
ambient space; central projection from the origin puts it on the unit
sphere (curvature +1, ambient form ``diag(1, 1, 1)``) or on the lower sheet
of the unit pseudosphere (curvature -1, ambient form ``diag(1, 1, -1)``).
With ``rho2 = 1 + curvature * |q|**2`` the lifted point is
``(x, y, -1) / sqrt(rho2)`` and the pulled-back metric reads::

    g_q = (rho2 * I - curvature * q q^T) / rho2**2

which degenerates to the identity for the plane (curvature 0).

Flat dynamics are written in *standardized* coordinates ``(xi, eta)``
where the scaled norm ``||.||_a`` becomes the Euclidean one; curved
dynamics stay in the raw gnomonic chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ChartDomainError

__all__ = [
    "Space",
    "EUCLIDEAN",
    "SPHERICAL",
    "HYPERBOLIC",
    "PhaseState",
    "ChartJacobianPair",
    "scaled_norm",
    "standardize",
    "unstandardize",
    "standardize_state",
    "unstandardize_state",
    "chart_rho2",
    "metric",
    "inverse_metric",
    "kinetic_energy",
    "lift_point",
    "lift_to_surface",
    "project_to_chart",
    "ambient_form",
    "curved_to_flat",
    "flat_to_curved",
    "reflect_vector",
    "geodesic_distance",
    "geodesic_distance_gradient",
    "check_chart_domain",
]

# sphere: lifted third coordinate must stay below -EQUATOR_GUARD
EQUATOR_GUARD = 1e-9
# hyperbolic: 1 - |q|^2 must stay above this
LIGHT_CONE_GUARD = 1e-12


@dataclass(frozen=True)
class Space:
    """A two-dimensional configuration surface of constant curvature."""

    kind: str
    curvature: int

    def __post_init__(self):
        expected = {"euclidean": 0, "spherical": 1, "hyperbolic": -1}
        if self.kind not in expected:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.curvature != expected[self.kind]:
            raise ValueError(
                f"curvature {self.curvature} does not match kind {self.kind!r}"
            )

    @classmethod
    def from_name(cls, name: str) -> "Space":
        name = name.lower()
        aliases = {"plane": "euclidean", "sphere": "spherical", "hyperbolic_plane": "hyperbolic"}
        name = aliases.get(name, name)
        return {"euclidean": EUCLIDEAN, "spherical": SPHERICAL, "hyperbolic": HYPERBOLIC}[name]

    @property
    def is_curved(self) -> bool:
        return self.curvature != 0

    def __str__(self):
        return self.kind


EUCLIDEAN = Space("euclidean", 0)
SPHERICAL = Space("spherical", 1)
HYPERBOLIC = Space("hyperbolic", -1)


def _vec2(x) -> np.ndarray:
    arr = np.array(x, dtype=float).reshape(2)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Chart position, chart velocity and time.

    For curved surfaces ``v`` is the Legendre velocity, i.e. ``g_q^{-1} p``
    for the canonical momentum ``p``. For the pure mechanical systems this is
    the ordinary chart velocity.
    """

    q: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q", _vec2(self.q))
        object.__setattr__(self, "v", _vec2(self.v))
        object.__setattr__(self, "t", float(self.t))
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.v)) and math.isfinite(self.t)):
            raise ValueError("phase state has non-finite components")

    @classmethod
    def from_array(cls, y, t: float = 0.0) -> "PhaseState":
        y = np.asarray(y, dtype=float)
        return cls(y[:2], y[2:4], t)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.q, self.v])

    def with_velocity(self, v) -> "PhaseState":
        return PhaseState(self.q, v, self.t)

    def __repr__(self):
        return (
            f"PhaseState(q=({self.q[0]:.17g}, {self.q[1]:.17g}), "
            f"v=({self.v[0]:.17g}, {self.v[1]:.17g}), t={self.t:.17g})"
        )

    def allclose(self, other: "PhaseState", atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.q, other.q, rtol=0, atol=atol)
            and np.allclose(self.v, other.v, rtol=0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class ChartJacobianPair:
    """A lifted point on the surface together with its lifted velocity."""

    point: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "point", np.array(self.point, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.array(self.velocity, dtype=float).reshape(3))


def scaled_norm(v, a: float, curvature: int = 1) -> float:
    """The affine norm ``sqrt(u**2 + w**2 / (1 + curvature * a**2))``.

    With the default curvature this is the norm under which the flat
    problem corresponds to the hemispherical one.
    """
    u, w = np.asarray(v, dtype=float)
    c = 1.0 + curvature * a * a
    if a == 0:
        return math.hypot(u, w)
    return math.sqrt(u * u + w * w / c)


def _scale(a: float, curvature: int) -> float:
    if a < 0:
        raise ValueError("center parameter a must be non-negative")
    c = 1.0 + curvature * a * a
    if c <= 0:
        raise ValueError(f"a={a} is outside the hyperbolic chart (need a < 1)")
    return math.sqrt(c)


def standardize(x, y, vx, vy, a: float, curvature: int = 1):
    """Map raw chart data to standardized coordinates.

    ``xi = x``, ``eta = (y - a) / sqrt(1 + curvature a^2)``; velocities follow
    the same linear map. The first center ``(0, a)`` goes to the origin.
    """
    s = _scale(a, curvature)
    return x, (y - a) / s, vx, vy / s


def unstandardize(xi, eta, vxi, veta, a: float, curvature: int = 1):
    s = _scale(a, curvature)
    return xi, s * eta + a, vxi, s * veta


def standardize_state(state: PhaseState, a: float, curvature: int = 1) -> PhaseState:
    x, y, u, w = standardize(*state.q, *state.v, a, curvature)
    return PhaseState((x, y), (u, w), state.t)


def unstandardize_state(state: PhaseState, a: float, curvature: int = 1) -> PhaseState:
    x, y, u, w = unstandardize(*state.q, *state.v, a, curvature)
    return PhaseState((x, y), (u, w), state.t)


def chart_rho2(q, curvature: int):
    q = np.asarray(q, dtype=float)
    return 1.0 + curvature * np.sum(q * q, axis=-1)


def check_chart_domain(q, space: Space):
    """Raise :class:`ChartDomainError` if ``q`` cannot be lifted."""
    if space.curvature == 0:
        return
    rho2 = float(chart_rho2(q, space.curvature))
    if space.curvature > 0:
        # third lifted coordinate is -1/sqrt(rho2)
        if not math.isfinite(rho2) or 1.0 / math.sqrt(rho2) <= EQUATOR_GUARD:
            raise ChartDomainError(f"point {tuple(q)} is at or beyond the equator")
    elif rho2 <= LIGHT_CONE_GUARD:
        raise ChartDomainError(f"point {tuple(q)} is at or beyond the light cone")


def metric(q, space: Space) -> np.ndarray:
    """Riemannian metric of ``space`` in its chart at ``q``."""
    q = np.asarray(q, dtype=float)
    k = space.curvature
    if k == 0:
        return np.eye(2)
    rho2 = 1.0 + k * (q @ q)
    return (rho2 * np.eye(2) - k * np.outer(q, q)) / (rho2 * rho2)


def inverse_metric(q, space: Space) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    k = space.curvature
    if k == 0:
        return np.eye(2)
    rho2 = 1.0 + k * (q @ q)
    return rho2 * (np.eye(2) + k * np.outer(q, q))


def kinetic_energy(state: PhaseState, space: Space) -> float:
    v = state.v
    return 0.5 * float(v @ metric(state.q, space) @ v)


def ambient_form(X, Y, curvature: int):
    """The ambient bilinear form ``x1 y1 + x2 y2 + curvature x3 y3``."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    return X[..., 0] * Y[..., 0] + X[..., 1] * Y[..., 1] + curvature * X[..., 2] * Y[..., 2]


def lift_point(q, curvature: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    rho = np.sqrt(chart_rho2(q, curvature))
    P = np.stack([q[..., 0], q[..., 1], -np.ones_like(q[..., 0])], axis=-1)
    return P / rho[..., None]


def lift_to_surface(state: PhaseState, space: Space) -> ChartJacobianPair:
    """Lift a chart state to the sphere or pseudosphere by central projection."""
    if not space.is_curved:
        raise ValueError("lift_to_surface needs a curved space")
    check_chart_domain(state.q, space)
    k = space.curvature
    q, v = state.q, state.v
    rho2 = 1.0 + k * (q @ q)
    rho = math.sqrt(rho2)
    P = np.array([q[0], q[1], -1.0])
    V = np.array([v[0], v[1], 0.0])
    point = P / rho
    velocity = V / rho - P * (k * (q @ v)) / (rho2 * rho)
    return ChartJacobianPair(point, velocity)


def project_to_chart(ambient: ChartJacobianPair, space: Space, t: float = 0.0) -> PhaseState:
    """Inverse of :func:`lift_to_surface`, including the velocity pushforward."""
    if not space.is_curved:
        raise ValueError("project_to_chart needs a curved space")
    X, dX = ambient.point, ambient.velocity
    if not X[2] < -EQUATOR_GUARD:
        raise ChartDomainError(f"ambient point {tuple(X)} is not centrally projectable")
    q = -X[:2] / X[2]
    v = -dX[:2] / X[2] + X[:2] * dX[2] / (X[2] * X[2])
    return PhaseState(q, v, t)


def curved_to_flat(state: PhaseState, a: float, curvature: int) -> PhaseState:
    """Standardized flat state corresponding to a curved chart state.

    Orbits correspond under the time change ``dt_flat = rho2 dt_curved``,
    so the flat velocity is the chart velocity divided by ``rho2``.
    The time stamp is carried over unchanged.
    """
    rho2 = float(chart_rho2(state.q, curvature))
    x, y, u, w = standardize(state.q[0], state.q[1], state.v[0] / rho2, state.v[1] / rho2, a, curvature)
    return PhaseState((x, y), (u, w), state.t)


def flat_to_curved(state: PhaseState, a: float, curvature: int) -> PhaseState:
    x, y, u, w = unstandardize(*state.q, *state.v, a, curvature)
    rho2 = 1.0 + curvature * (x * x + y * y)
    return PhaseState((x, y), (u * rho2, w * rho2), state.t)


def reflect_vector(state: PhaseState, normal, space: Space) -> PhaseState:
    """Elastic reflection of the velocity across the line orthogonal to ``normal``.

    ``normal`` is a tangent vector at ``state.q``; it is normalized in the
    metric of ``space`` before use.
    """
    n = np.asarray(normal, dtype=float).reshape(2)
    g = metric(state.q, space)
    nn = float(n @ g @ n)
    if not nn > 0:
        raise ValueError("reflection normal must be nonzero")
    n = n / math.sqrt(nn)
    v = state.v
    vn = float(v @ g @ n)
    return PhaseState(state.q, v - 2.0 * vn * n, state.t)


def geodesic_distance(q, center, space: Space):
    """Distance on ``space`` between chart points (vectorized over ``q``)."""
    q = np.asarray(q, dtype=float)
    center = np.asarray(center, dtype=float)
    k = space.curvature
    if k == 0:
        d = q - center
        return np.hypot(d[..., 0], d[..., 1])
    Q = lift_point(q, k)
    Z = lift_point(center, k)
    if k > 0:
        cross = np.cross(Q, Z)
        return np.arctan2(np.linalg.norm(cross, axis=-1), np.sum(Q * Z, axis=-1))
    diff = Q - Z
    chord2 = np.maximum(ambient_form(diff, diff, k), 0.0)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(chord2))


def geodesic_distance_gradient(q, center, space: Space) -> np.ndarray:
    """Chart gradient (covector) of the distance to ``center`` at ``q``."""
    q = np.asarray(q, dtype=float).reshape(2)
    center = np.asarray(center, dtype=float).reshape(2)
    k = space.curvature
    if k == 0:
        d = q - center
        r = math.hypot(*d)
        return d / r
    rho2 = 1.0 + k * (q @ q)
    rho = math.sqrt(rho2)
    P = np.array([q[0], q[1], -1.0])
    # columns: dQ/dq_i = e_i / rho - P k q_i / rho^3
    J = np.zeros((3, 2))
    J[0, 0] = J[1, 1] = 1.0 / rho
    J -= np.outer(P, k * q) / (rho2 * rho)
    Z = lift_point(center, k)
    theta = float(geodesic_distance(q, center, space))
    S = math.sin(theta) if k > 0 else math.sinh(theta)
    BZ = np.array([Z[0], Z[1], k * Z[2]])
    return -(J.T @ BZ) / S
