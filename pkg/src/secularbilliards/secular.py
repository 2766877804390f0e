"""Osculating Kepler elements and orbit averaging of the secondary potential.

Averages are taken over the closed orbits of the primary Kepler problem.
On the plane the measure is the mean anomaly (uniform in time). On curved
surfaces it is the curved-surface time along the closed Kepler orbit; since
the curved orbit is the central projection of a flat Kepler ellipse traversed
with ``dt_curved = dt_flat / rho2``, that average equals::

    <V>_curved = int V rho2^-1 dl / int rho2^-1 dl

over the corresponding flat ellipse (``l`` the flat mean anomaly). Both
measures are sampled with the periodic trapezoid rule in the *eccentric
longitude* ``F`` (nonsingular at ``e = 0``), using ``dl/dF = 1 - k cos F -
h_e sin F``; no Kepler equation has to be solved per node. A direct
time-average along a numerically integrated curved Kepler period is
available as an independent route (``method="integrate"``).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import model
from .errors import (
    KeplerConvergenceError,
    PeriodDetectionError,
    QuadratureError,
    RegionError,
)
from .geometry import EUCLIDEAN, PhaseState, Space, flat_to_curved
from .model import ModelParams

__all__ = [
    "solve_kepler",
    "OrbitElements",
    "AveragedSystem",
    "state_to_elements",
    "elements_to_state",
    "ellipse_nodes",
    "averaged_secondary_batch",
    "averaged_secondary_potential",
    "averaged_hamiltonian",
    "averaged_vector_field",
    "reduced_secular_field",
    "element_rates",
    "convergence_table",
    "EXCLUSION_RADIUS",
]

EXCLUSION_RADIUS = 1e-6
CONTAINMENT_GUARD = 1e-9
START_NODES = 32


def solve_kepler(ell, e):
    """Eccentric anomaly ``E`` with ``E - e sin E = ell`` (vectorized).

    Safeguarded Newton iteration: each iterate is kept inside a bracket
    that shrinks monotonically, falling back to bisection when a Newton
    step would leave it.
    """
    ell_arr, e_arr = np.broadcast_arrays(np.asarray(ell, dtype=float), np.asarray(e, dtype=float))
    scalar = ell_arr.ndim == 0
    ell_arr = np.atleast_1d(ell_arr).astype(float)
    e_arr = np.atleast_1d(e_arr).astype(float)
    if np.any((e_arr < 0) | (e_arr >= 1 - 1e-12)):
        raise ValueError("eccentricity must lie in [0, 1 - 1e-12)")
    # reduce to M in [-pi, pi]
    turns = np.round(ell_arr / (2 * np.pi))
    M = ell_arr - 2 * np.pi * turns
    lo = M - e_arr
    hi = M + e_arr
    E = M + e_arr * np.sin(M) / np.maximum(1 - np.sin(M + e_arr) + np.sin(M), 1e-3)
    E = np.clip(E, lo, hi)
    done = e_arr == 0
    E[done] = M[done]
    for _ in range(100):
        if np.all(done):
            break
        act = ~done
        Ea, ea, Ma = E[act], e_arr[act], M[act]
        f = Ea - ea * np.sin(Ea) - Ma
        # shrink the bracket using the sign of f (f is increasing in E)
        lo_a = np.where(f < 0, Ea, lo[act])
        hi_a = np.where(f > 0, Ea, hi[act])
        fp = 1 - ea * np.cos(Ea)
        step = f / fp
        En = Ea - step
        bad = (En <= lo_a) | (En >= hi_a) | ~np.isfinite(En)
        En = np.where(bad, 0.5 * (lo_a + hi_a), En)
        conv = (np.abs(En - Ea) <= 4e-16 * np.maximum(1.0, np.abs(En))) | (f == 0)
        E[act], lo[act], hi[act] = En, lo_a, hi_a
        idx = np.flatnonzero(act)
        done[idx[conv]] = True
    else:
        if not np.all(done):
            raise KeplerConvergenceError("Kepler solver did not converge in 100 iterations")
    E = E + 2 * np.pi * turns
    return float(E[0]) if scalar else E.reshape(np.shape(np.broadcast_arrays(ell, e)[0]))


@dataclass(frozen=True)
class OrbitElements:
    """Nonsingular planar Kepler elements.

    ``Lambda`` is the circular angular momentum at the orbit's energy
    (``E_Kep = -m1^2 / (2 Lambda^2)``), ``(k, h_e) = e (cos g, sin g)``,
    ``ell`` the mean anomaly and ``orientation`` the sign of ``C``.
    """

    Lambda: float
    k: float
    h_e: float
    ell: float = 0.0
    orientation: int = 1

    def __post_init__(self):
        if not self.Lambda > 0:
            raise ValueError("Lambda must be positive")
        if not self.e < 1:
            raise ValueError("eccentricity must be < 1")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")

    @property
    def e(self) -> float:
        return math.hypot(self.k, self.h_e)

    @property
    def g(self) -> float:
        return math.atan2(self.h_e, self.k) if self.e > 0 else 0.0

    @property
    def C(self) -> float:
        return self.orientation * self.Lambda * math.sqrt(1 - self.e**2)

    def semi_major_axis(self, m1: float) -> float:
        return self.Lambda**2 / m1

    def mean_motion(self, m1: float) -> float:
        return m1**2 / self.Lambda**3


@dataclass(frozen=True)
class AveragedSystem:
    """Parameters of a partially averaged system."""

    params: ModelParams
    qtol: float = 1e-12
    node_cap: int = 1 << 14

    def __post_init__(self):
        if not self.params.m1 > 0:
            raise ValueError("averaging requires m1 > 0")
        if not 1e-14 <= self.qtol <= 1e-6:
            raise ValueError("quadrature tolerance must lie in [1e-14, 1e-6]")
        if self.node_cap < START_NODES:
            raise ValueError(f"node cap must be at least {START_NODES}")


def _as_array(state):
    return state.as_array() if isinstance(state, PhaseState) else np.asarray(state, dtype=float)


def state_to_elements(state, m1: float) -> OrbitElements:
    """Elements of the osculating Kepler ellipse of a standardized state."""
    xi, eta, u, w = _as_array(state)
    E = model.kepler_energy((xi, eta, u, w), m1)
    if not E < 0:
        raise RegionError("state is not elliptic (E_Kep >= 0); outside region R")
    C, A = model.kepler_first_integrals((xi, eta, u, w), m1)
    if abs(C) < 1e-12:
        raise RegionError("zero angular momentum (collision orbit); outside region R")
    Lam = m1 / math.sqrt(-2 * E)
    k, h = A / m1
    e = math.hypot(k, h)
    if e >= 1:
        raise RegionError("numerically non-elliptic state")
    sig = 1 if C > 0 else -1
    r = math.hypot(xi, eta)
    g = math.atan2(h, k) if e > 0 else 0.0
    if e > 0.1:
        # e cos E = 1 - r/a and e sin E = (q.v)/sqrt(m1 a) are well conditioned
        a_s = Lam * Lam / m1
        ecosE = 1 - r / a_s
        esinE = (xi * u + eta * w) / math.sqrt(m1 * a_s)
        Ean = math.atan2(esinE, ecosE)
        ell = (Ean - esinE) % (2 * math.pi)
    else:
        cg, sg = math.cos(g), math.sin(g)
        # position in the perifocal frame; y axis along the direction of motion
        px = (xi * cg + eta * sg) / r
        py = sig * (-xi * sg + eta * cg) / r
        cosE = (e + px) / (1 + e * px)
        sinE = math.sqrt(1 - e * e) * py / (1 + e * px)
        Ean = math.atan2(sinE, cosE)
        ell = (Ean - e * sinE) % (2 * math.pi)
    return OrbitElements(Lam, float(k), float(h), float(ell), sig)


def elements_to_state(el: OrbitElements, m1: float, ell: float | None = None) -> PhaseState:
    ell = el.ell if ell is None else ell
    e, g, sig = el.e, el.g, el.orientation
    a = el.semi_major_axis(m1)
    n = el.mean_motion(m1)
    E = solve_kepler(ell, e)
    cE, sE = math.cos(E), math.sin(E)
    b = math.sqrt(1 - e * e)
    Edot = n / (1 - e * cE)
    px, py = a * (cE - e), sig * a * b * sE
    vx, vy = -a * sE * Edot, sig * a * b * cE * Edot
    cg, sg = math.cos(g), math.sin(g)
    return PhaseState(
        (px * cg - py * sg, px * sg + py * cg),
        (vx * cg - vy * sg, vx * sg + vy * cg),
    )


def _batch_elements(Y, m1):
    """Semi-major axis and eccentricity vector of stacked standardized states."""
    x, y, u, w = Y.T
    r = np.hypot(x, y)
    E = 0.5 * (u * u + w * w) - m1 / r
    C = x * w - y * u
    if np.any(~(E < 0)):
        raise RegionError("osculating orbit is not elliptic (E_Kep >= 0); outside region R")
    if np.any(np.abs(C) < 1e-12):
        raise RegionError("zero angular momentum; outside region R")
    k = (C * w - m1 * x / r) / m1
    h = (-C * u - m1 * y / r) / m1
    return -m1 / (2 * E), k, h


@functools.lru_cache(maxsize=32)
def _unit_circle(N: int, shifted: bool = False):
    F = 2 * np.pi * (np.arange(N) + (0.5 if shifted else 0.0)) / N
    cF, sF = np.cos(F), np.sin(F)
    cF.setflags(write=False)
    sF.setflags(write=False)
    return cF, sF


def _ellipse_coefficients(a_s, k, h):
    """Column coefficients of the equinoctial ellipse parametrization."""
    a_s = np.reshape(np.asarray(a_s, dtype=float), (-1, 1))
    k = np.reshape(np.asarray(k, dtype=float), (-1, 1))
    h = np.reshape(np.asarray(h, dtype=float), (-1, 1))
    beta = 1.0 / (1.0 + np.sqrt(1 - k * k - h * h))
    hk = a_s * h * k * beta
    return a_s * (1 - h * h * beta), hk, a_s * k, a_s * (1 - k * k * beta), a_s * h, k, h


def _nodes_from(coef, N: int, shifted: bool = False):
    cxx, hk, ak, cyy, ah, k, h = coef
    cF, sF = _unit_circle(int(N), bool(shifted))
    X = cxx * cF + hk * sF - ak
    Yp = cyy * sF + hk * cF - ah
    wt = 1 - k * cF - h * sF
    return X, Yp, wt


def ellipse_nodes(a_s, k, h, N: int, shifted: bool = False):
    """Points and ``dl/dF`` weights at ``N`` equispaced eccentric longitudes.

    Accepts arrays of shape (m,) and returns arrays of shape (m, N). The
    traversal direction does not matter for averages. ``shifted`` offsets
    the nodes by half a spacing, i.e. returns the nodes that a doubling to
    ``2 N`` adds.
    """
    return _nodes_from(_ellipse_coefficients(a_s, k, h), N, shifted)


def _node_sums(X, Yn, wt, params: ModelParams, space: Space):
    """Weighted node sums ``(sum V w, sum w)`` of the secondary potential."""
    if not space.is_curved:
        V = params.f * (X * X + (Yn + params.h) ** 2)
        if params.m2 != 0.0:
            V = V - params.m2 / np.hypot(X, Yn + 2 * params.h)
        return np.sum(V * wt, axis=1), np.sum(wt, axis=1)
    kap = params.kappa
    c, a = params.c, params.a
    x = X
    y = math.sqrt(c) * Yn + a
    rho2 = 1.0 + kap * (x * x + y * y)
    if np.any(rho2 <= CONTAINMENT_GUARD if kap < 0 else ~np.isfinite(rho2)):
        raise RegionError("averaged orbit leaves the chart domain")
    V = params.f * (x * x + y * y)
    if params.m2 != 0.0:
        V = V - params.m2 * math.sqrt(c) * (1 - kap * a * y) / np.sqrt((y + a) ** 2 + c * x * x)
    w = wt / rho2
    return np.sum(V * w, axis=1), np.sum(w, axis=1)


def _node_values(X, Yn, wt, params: ModelParams, space: Space):
    """Orbit averages of the secondary potential at given nodes."""
    num, den = _node_sums(X, Yn, wt, params, space)
    return num / den


def _doubling(a_s, k, h, asys: "AveragedSystem", space: Space, check_rows: slice):
    """Yield ``(N, averages)`` for N = 32, 64, ...; each level reuses the previous nodes."""
    params = asys.params
    coef = _ellipse_coefficients(a_s, k, h)
    N = START_NODES
    X, Yn, wt = _nodes_from(coef, N)
    _check_exclusion(a_s[check_rows], k[check_rows], h[check_rows], params, X[check_rows], Yn[check_rows])
    num, den = _node_sums(X, Yn, wt, params, space)
    yield N, num / den
    while True:
        if 2 * N > asys.node_cap:
            raise QuadratureError(f"averaging did not converge within {asys.node_cap} nodes")
        dn, dd = _node_sums(*_nodes_from(coef, N, shifted=True), params, space)
        num, den, N = num + dn, den + dd, 2 * N
        yield N, num / den


def _check_exclusion(a_s, k, h, params: ModelParams, X, Yn):
    """Reject orbits passing within ``EXCLUSION_RADIUS`` of the secondary."""
    if params.m2 == 0.0:
        return
    d = np.hypot(X, Yn + 2 * params.h)
    N = X.shape[1]
    for i in range(X.shape[0]):
        j = int(np.argmin(d[i]))
        dmin = float(d[i, j])
        if dmin > 1e-2 * a_s[i]:
            continue

        def dist(F, i=i):
            Xf, Yf = _point(a_s[i], k[i], h[i], F)
            return math.hypot(Xf, Yf + 2 * params.h)

        F0 = 2 * math.pi * j / N
        res = minimize_scalar(dist, bounds=(F0 - 2 * math.pi / N, F0 + 2 * math.pi / N), method="bounded",
                              options={"xatol": 1e-12})
        dmin = min(dmin, float(res.fun))
        if dmin < EXCLUSION_RADIUS:
            raise RegionError(
                f"osculating orbit passes within {dmin:.3g} of the secondary center (excluded set)"
            )


def _point(a_s, k, h, F):
    beta = 1.0 / (1.0 + math.sqrt(1 - k * k - h * h))
    cF, sF = math.cos(F), math.sin(F)
    X = a_s * ((1 - h * h * beta) * cF + h * k * beta * sF - k)
    Y = a_s * ((1 - k * k * beta) * sF + h * k * beta * cF - h)
    return X, Y


def averaged_secondary_batch(Y, asys: AveragedSystem, space: Space = EUCLIDEAN, nodes: int | None = None):
    """Orbit-averaged secondary potential of stacked standardized states.

    With ``nodes=None`` the node count is doubled from 32 until successive
    values agree to ``qtol * max(1, |I|)`` for every row, and the exclusion
    and containment checks are run. Passing ``nodes`` evaluates at that
    fixed count (used for finite-difference stencils, where the same rule
    must be applied at every stencil point). Returns ``(values, N)``.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    params = asys.params
    a_s, k, h = _batch_elements(Y, params.m1)
    if nodes is not None:
        X, Yn, wt = ellipse_nodes(a_s, k, h, nodes)
        return _node_values(X, Yn, wt, params, space), nodes
    levels = _doubling(a_s, k, h, asys, space, slice(None))
    _, prev = next(levels)
    for N, cur in levels:
        if np.all(np.abs(cur - prev) <= asys.qtol * np.maximum(1.0, np.abs(cur))):
            return cur, N
        prev = cur


def averaged_secondary_stencil(Y, asys: AveragedSystem, space: Space = EUCLIDEAN):
    """Orbit averages of stacked states, all at the node count adapted to row 0.

    Equivalent to adapting the node count on ``Y[0]`` with
    :func:`averaged_secondary_batch` and then evaluating every row at that
    fixed count, but shares the node evaluations of the doubling sequence.
    Finite-difference stencils use this with the base point in row 0.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    a_s, k, h = _batch_elements(Y, asys.params.m1)
    levels = _doubling(a_s, k, h, asys, space, slice(0, 1))
    _, prev = next(levels)
    for N, cur in levels:
        if abs(cur[0] - prev[0]) <= asys.qtol * max(1.0, abs(cur[0])):
            return cur, N
        prev = cur


def _curved_average_by_integration(std, asys: AveragedSystem, space: Space, tol: float):
    """Time average of the curved secondary potential over one Kepler period."""
    from .flow import SystemSelector, canonical_field, to_canonical
    from .integrator import dop853_steps

    params = replace(asys.params, space=space)
    sys = SystemSelector("kepler", space, params)
    start = flat_to_curved(PhaseState(std[:2], std[2:]), params.a, params.kappa)
    y0 = to_canonical(sys, start)
    kep = canonical_field(sys)
    sec = replace(params, m1=0.0)

    def fun(t, z):
        out = np.empty(5)
        out[:4] = kep(t, z[:4])
        out[4] = model.curved_potential(z[:2], sec)
        return out

    q0, v0 = y0[:2], kep(0.0, y0)[:2]
    scale = float(np.linalg.norm(y0[:4]))

    def section(z):
        return float((z[:2] - q0) @ v0)

    z0 = np.concatenate([y0, [0.0]])
    left = False
    for seg in dop853_steps(fun, 0.0, z0, 1e6, tol):
        s1 = section(seg.y1)
        if not left:
            left = s1 < 0
            continue
        if s1 >= 0:
            T = brentq(lambda t: section(seg(t)), seg.t0, seg.t1, xtol=1e-14, rtol=4 * np.finfo(float).eps)
            zT = seg(T)
            miss = float(np.linalg.norm(zT[:4] - y0))
            if miss > 1e-9 * max(1.0, scale):
                raise PeriodDetectionError(f"orbit did not close (return miss {miss:.3g})")
            return float(zT[4] / T), T
    raise PeriodDetectionError("no return to the Poincare section")


def averaged_secondary_potential(
    el: OrbitElements,
    asys: AveragedSystem,
    space: Space = EUCLIDEAN,
    method: str = "quadrature",
    tol: float = 1e-12,
) -> float:
    """Average of the secondary potential over the Kepler orbit of ``el``.

    For curved spaces ``el`` describes the flat correspondent of the curved
    orbit. ``method="integrate"`` (curved only) time-averages along one
    numerically detected period of the curved Kepler flow.
    """
    std = elements_to_state(el, asys.params.m1).as_array()
    if method == "quadrature":
        return float(averaged_secondary_batch(std, asys, space)[0][0])
    if method == "integrate":
        if not space.is_curved:
            raise ValueError("method='integrate' applies to curved spaces")
        return _curved_average_by_integration(std, asys, space, tol)[0]
    raise ValueError(f"unknown averaging method {method!r}")


def _selector(asys: AveragedSystem, space: Space):
    from .flow import SystemSelector

    return SystemSelector("averaged", space, asys.params, asys.qtol, asys.node_cap)


def averaged_hamiltonian(state: PhaseState, asys: AveragedSystem, space: Space = EUCLIDEAN) -> float:
    """Kepler energy plus orbit-averaged secondary potential.

    ``state`` is in the chart convention of ``space`` (standardized for the
    plane, raw chart with Legendre velocity for curved surfaces).
    """
    from .flow import hamiltonian, to_canonical

    sys = _selector(asys, space)
    return hamiltonian(sys, to_canonical(sys, state))


def averaged_vector_field(state: PhaseState, asys: AveragedSystem, space: Space = EUCLIDEAN):
    from .flow import vector_field

    return vector_field(_selector(asys, space), state)


def reduced_secular_field(Lambda: float, k: float, h_e: float, asys: AveragedSystem, orientation: int = 1,
                          step: float = 1e-6):
    """Secular drift of ``(k, h_e)`` at fixed ``Lambda`` (plane only).

    Uses the Delaunay pair ``(G, g)`` with ``G = C``: ``dG/dt = -dW/dg``,
    ``dg/dt = dW/dG``, derivatives by central differences with one
    Richardson level.
    """
    m1 = asys.params.m1
    e = math.hypot(k, h_e)
    if not 1e-8 < e < 1:
        raise ValueError("reduced field needs 0 < e < 1")
    G = orientation * Lambda * math.sqrt(1 - e * e)
    g = math.atan2(h_e, k)

    def W(Gv, gv):
        ev = math.sqrt(max(0.0, 1 - (Gv / Lambda) ** 2))
        el = OrbitElements(Lambda, ev * math.cos(gv), ev * math.sin(gv), 0.0, 1 if Gv > 0 else -1)
        return averaged_secondary_batch(elements_to_state(el, m1).as_array(), asys, EUCLIDEAN, nodes=N)[0][0]

    N = averaged_secondary_batch(
        elements_to_state(OrbitElements(Lambda, k, h_e, 0.0, orientation), m1).as_array(), asys
    )[1]

    def d(fun, s):
        g1 = (fun(s) - fun(-s)) / (2 * s)
        g2 = (fun(s / 2) - fun(-s / 2)) / s
        return (4 * g2 - g1) / 3

    sG = step * Lambda
    dWdG = d(lambda s: W(G + s, g), sG)
    dWdg = d(lambda s: W(G, g + s), step)
    Gdot, gdot = -dWdg, dWdG
    edot = -G * Gdot / (Lambda**2 * e)
    kdot = edot * math.cos(g) - e * math.sin(g) * gdot
    hdot = edot * math.sin(g) + e * math.cos(g) * gdot
    return np.array([kdot, hdot])


def element_rates(state: PhaseState, asys: AveragedSystem, eps: float = 1e-6) -> np.ndarray:
    """``(dk/dt, dh_e/dt)`` along the full phase-space averaged field (plane)."""
    dq, dv = averaged_vector_field(state, asys, EUCLIDEAN)
    y = state.as_array()
    dy = np.concatenate([dq, dv])
    m1 = asys.params.m1

    def kh(z):
        el = state_to_elements(z, m1)
        return np.array([el.k, el.h_e])

    g1 = (kh(y + eps * dy) - kh(y - eps * dy)) / (2 * eps)
    g2 = (kh(y + eps / 2 * dy) - kh(y - eps / 2 * dy)) / eps
    return (4 * g2 - g1) / 3


def convergence_table(el: OrbitElements, asys: AveragedSystem, space: Space = EUCLIDEAN,
                      nodes=(8, 16, 32, 64, 128, 256), reference_nodes: int = 4096):
    """Rows ``(N, I_N, |I_N - I_ref|)`` of the node-doubling sequence."""
    std = elements_to_state(el, asys.params.m1).as_array()
    ref = averaged_secondary_batch(std, asys, space, nodes=reference_nodes)[0][0]
    rows = []
    for N in nodes:
        val = averaged_secondary_batch(std, asys, space, nodes=N)[0][0]
        rows.append((int(N), float(val), float(abs(val - ref))))
    return rows
