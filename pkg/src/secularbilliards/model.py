"""Potentials, energies and first integrals of the Kepler family.

Flat quantities are written in standardized coordinates ``(xi, eta)``: the
primary center (mass ``m1``) sits at the origin, the secondary center (mass
``m2``) at ``(0, -2h)`` with ``h = a / sqrt(1 + kappa a^2)``, and the Hooke
center at ``(0, -h)``, the standardized image of the raw-chart origin.

Curved quantities are written in the raw gnomonic chart ``(x, y)`` with the
centers at ``(0, +a)`` and ``(0, -a)`` and the Hooke center at the contact
point. A flat state and a curved state correspond when they share the chart
point and the curved chart velocity is ``rho2`` times the flat one; in these
*corresponding* variables the curved energy reads::

    E_curved = 1/2 (|v|^2 + kappa (x vy - y vx)^2)
               - m1 sqrt(c) (1 + kappa a y) / sqrt((y - a)^2 + c x^2)
               - m2 sqrt(c) (1 - kappa a y) / sqrt((y + a)^2 + c x^2)
               + f (x^2 + y^2),          c = 1 + kappa a^2

and factors as ``c (E_Kep + V_2 + kappa (D + K) / 2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ChartDomainError, SingularityError
from .geometry import (
    EUCLIDEAN,
    HYPERBOLIC,
    SPHERICAL,
    PhaseState,
    Space,
    check_chart_domain,
    unstandardize,
)

__all__ = [
    "ModelParams",
    "FirstIntegrals",
    "SINGULAR_RADIUS",
    "energy_euclidean",
    "energy_curved",
    "energy_spherical",
    "energy_hyperbolic",
    "kepler_energy",
    "secondary_potential",
    "kepler_first_integrals",
    "integral_D",
    "remainder_K",
    "identity_residual",
    "euclidean_potential",
    "euclidean_potential_gradient",
    "curved_potential",
    "curved_potential_gradient",
    "curved_kepler_gradient",
    "first_integrals",
]

SINGULAR_RADIUS = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Masses, Hooke factor and center placement.

    ``space`` selects the curvature of the curved partner problem (and of the
    governing problem when it is curved); for ``EUCLIDEAN`` the spherical
    partner is used, so ``kappa`` is -1 only for the hyperbolic plane.
    """

    m1: float = 1.0
    m2: float = 0.0
    f: float = 0.0
    a: float = 1.0
    space: Space = EUCLIDEAN

    def __post_init__(self):
        for name in ("m1", "m2", "f", "a"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if isinstance(self.space, str):
            object.__setattr__(self, "space", Space.from_name(self.space))
        if self.a < 0:
            raise ValueError("a must be non-negative")
        if self.kappa < 0 and self.a >= 1:
            raise ValueError("hyperbolic centers need a < 1 to lie in the chart")

    @property
    def kappa(self) -> int:
        return -1 if self.space.curvature < 0 else 1

    @property
    def c(self) -> float:
        return 1.0 + self.kappa * self.a * self.a

    @property
    def h(self) -> float:
        """Half the distance from the primary to the secondary (standardized)."""
        return self.a / math.sqrt(self.c)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class FirstIntegrals:
    E_target: float
    E_kep: float
    C: float
    A: np.ndarray
    D: float
    K: float
    E_sph: float

    @property
    def A1(self) -> float:
        """LRL component toward the secondary center (negative eta axis)."""
        return float(-self.A[1])

    def as_dict(self) -> dict:
        return {
            "E_target": self.E_target,
            "E_kep": self.E_kep,
            "C": self.C,
            "A1": self.A1,
            "D": self.D,
            "K": self.K,
            "E_sph": self.E_sph,
        }


def _unpack(state):
    if isinstance(state, PhaseState):
        return state.q[0], state.q[1], state.v[0], state.v[1]
    x, y, u, w = np.asarray(state, dtype=float)
    return x, y, u, w


def _radius(x, y, what: str) -> float:
    r = math.hypot(x, y)
    if r < SINGULAR_RADIUS:
        raise SingularityError(f"evaluation at the {what}")
    return r


def kepler_energy(state, m1: float) -> float:
    xi, eta, u, w = _unpack(state)
    r = _radius(xi, eta, "primary center")
    return 0.5 * (u * u + w * w) - m1 / r


def secondary_potential(q, params: ModelParams) -> float:
    """Flat secondary potential ``-m2/R2 + f |q - hooke|^2`` (standardized)."""
    xi, eta = q[0], q[1]
    h = params.h
    val = params.f * (xi * xi + (eta + h) ** 2)
    if params.m2 != 0.0:
        val -= params.m2 / _radius(xi, eta + 2 * h, "secondary center")
    return val


def energy_euclidean(state, params: ModelParams) -> float:
    """Energy of the flat Kepler / two-center / Lagrange problem."""
    xi, eta, u, w = _unpack(state)
    return kepler_energy(state, params.m1) + secondary_potential((xi, eta), params)


def euclidean_potential(q, params: ModelParams) -> float:
    r = _radius(q[0], q[1], "primary center")
    return -params.m1 / r + secondary_potential(q, params)


def euclidean_potential_gradient(q, params: ModelParams) -> np.ndarray:
    xi, eta = float(q[0]), float(q[1])
    h = params.h
    r = _radius(xi, eta, "primary center")
    g = params.m1 * np.array([xi, eta]) / r**3
    if params.m2 != 0.0:
        R = _radius(xi, eta + 2 * h, "secondary center")
        g += params.m2 * np.array([xi, eta + 2 * h]) / R**3
    g += 2.0 * params.f * np.array([xi, eta + h])
    return g


def _curved_center_terms(x, y, params: ModelParams, kappa: int):
    a = params.a
    c = 1.0 + kappa * a * a
    S1 = math.sqrt((y - a) ** 2 + c * x * x)
    S2 = math.sqrt((y + a) ** 2 + c * x * x)
    return c, S1, S2


def curved_potential(q, params: ModelParams, curvature: int | None = None) -> float:
    """Curved potential in the raw chart (cotangent / tangent-squared form)."""
    k = params.kappa if curvature is None else curvature
    x, y = float(q[0]), float(q[1])
    a = params.a
    c, S1, S2 = _curved_center_terms(x, y, params, k)
    if S1 < SINGULAR_RADIUS:
        raise SingularityError("evaluation at the primary center")
    sc = math.sqrt(c)
    val = -params.m1 * sc * (1 + k * a * y) / S1 + params.f * (x * x + y * y)
    if params.m2 != 0.0:
        if S2 < SINGULAR_RADIUS:
            raise SingularityError("evaluation at the secondary center")
        val -= params.m2 * sc * (1 - k * a * y) / S2
    return val


def curved_kepler_gradient(q, mass: float, a: float, kappa: int) -> np.ndarray:
    """Gradient of ``-mass sqrt(c) (1 + kappa a y) / sqrt((y-a)^2 + c x^2)``.

    The secondary center is obtained with ``a -> -a``.
    """
    x, y = float(q[0]), float(q[1])
    c = 1.0 + kappa * a * a
    M = mass * math.sqrt(c)
    N = 1.0 + kappa * a * y
    S = math.sqrt((y - a) ** 2 + c * x * x)
    if S < SINGULAR_RADIUS:
        raise SingularityError("evaluation at a curved center")
    S3 = S**3
    return np.array([M * N * c * x / S3, -M * (kappa * a / S - N * (y - a) / S3)])


def curved_potential_gradient(q, params: ModelParams, curvature: int | None = None) -> np.ndarray:
    k = params.kappa if curvature is None else curvature
    g = curved_kepler_gradient(q, params.m1, params.a, k)
    if params.m2 != 0.0:
        g += curved_kepler_gradient(q, params.m2, -params.a, k)
    g += 2.0 * params.f * np.asarray(q, dtype=float)
    return g


def energy_curved(state, params: ModelParams, curvature: int | None = None) -> float:
    """Curved energy from a raw-chart state in corresponding variables.

    ``state`` holds the raw chart point and the velocity of the corresponding
    flat motion (see the module docstring).
    """
    k = params.kappa if curvature is None else curvature
    x, y, u, w = _unpack(state)
    check_chart_domain((x, y), SPHERICAL if k > 0 else HYPERBOLIC)
    L = x * w - y * u
    return 0.5 * (u * u + w * w + k * L * L) + curved_potential((x, y), params, k)


def energy_spherical(state, params: ModelParams) -> float:
    return energy_curved(state, params, 1)


def energy_hyperbolic(state, params: ModelParams) -> float:
    return energy_curved(state, params, -1)


def kepler_first_integrals(state, m1: float):
    """Angular momentum ``C`` and Laplace-Runge-Lenz vector ``A``."""
    xi, eta, u, w = _unpack(state)
    r = _radius(xi, eta, "primary center")
    C = xi * w - eta * u
    A = np.array([C * w - m1 * xi / r, -C * u - m1 * eta / r])
    return C, A


def integral_D(state, params: ModelParams) -> float:
    """``D = C^2 - 2 h A1`` with ``A1 = C u + m1 eta / r``."""
    xi, eta, u, w = _unpack(state)
    r = _radius(xi, eta, "primary center")
    C = xi * w - eta * u
    return C * C - 2.0 * params.h * (C * u + params.m1 * eta / r)


def remainder_K(state, params: ModelParams) -> float:
    """Remainder term ``K`` of the energy factorization (linear in m2 and f)."""
    xi, eta, _, _ = _unpack(state)
    a, c = params.a, params.c
    K = -2.0 * a * a * params.f * xi * xi / c
    if params.m2 != 0.0:
        R = _radius(xi, eta + 2 * params.h, "secondary center")
        K += 2.0 * params.m2 * (a * math.sqrt(c) * eta + 2 * a * a) / (c * R)
    return K


def _curved_of_standardized(state, params: ModelParams):
    return unstandardize(*_unpack(state), params.a, params.kappa)


def identity_residual(state, params: ModelParams) -> float:
    """``E_curved - c (E_Kep + V_2 + kappa (D + K) / 2)`` at a standardized state."""
    raw = _curved_of_standardized(state, params)
    E_c = energy_curved(raw, params)
    xi, eta, _, _ = _unpack(state)
    rhs = params.c * (
        kepler_energy(state, params.m1)
        + secondary_potential((xi, eta), params)
        + 0.5 * params.kappa * (integral_D(state, params) + remainder_K(state, params))
    )
    return E_c - rhs


def first_integrals(state, params: ModelParams, E_target: float | None = None) -> FirstIntegrals:
    """All first integrals at a standardized flat state.

    ``E_sph`` is the energy of the curved partner problem; ``E_target``
    defaults to the flat energy.
    """
    C, A = kepler_first_integrals(state, params.m1)
    E_kep = kepler_energy(state, params.m1)
    try:
        E_sph = energy_curved(_curved_of_standardized(state, params), params)
    except (SingularityError, ChartDomainError):
        E_sph = math.nan
    if E_target is None:
        E_target = energy_euclidean(state, params)
    return FirstIntegrals(
        E_target=float(E_target),
        E_kep=float(E_kep),
        C=float(C),
        A=A,
        D=float(integral_D(state, params)),
        K=float(remainder_K(state, params)),
        E_sph=float(E_sph),
    )
