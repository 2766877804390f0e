"""Self-check suites for the identities, brackets, correspondence and quadrature.

Each suite returns a :class:`CheckReport` with the worst observed value and
the threshold it is held to. Random draws come from a
``numpy.random.default_rng(seed)`` stream, so reports are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.spatial import cKDTree

from . import model
from .flow import SystemSelector, integrate, poisson_bracket_fd
from .geometry import (
    EUCLIDEAN,
    HYPERBOLIC,
    SPHERICAL,
    PhaseState,
    Space,
    chart_rho2,
    flat_to_curved,
    metric,
    standardize,
)
from .model import ModelParams
from .secular import AveragedSystem, OrbitElements, START_NODES, convergence_table, ellipse_nodes

__all__ = [
    "CheckReport",
    "SUITES",
    "THRESHOLDS",
    "check_identities",
    "check_brackets",
    "check_projective",
    "check_quadrature",
    "hausdorff_to_trajectory",
    "run_suite",
]

THRESHOLDS = {
    "identities": 1e-10,
    "brackets": 1e-6,
    "projective": 1e-6,
    # minimum error reduction per node doubling
    "quadrature": 10.0,
}
TRIVIAL_BRACKET_TOL = 1e-12


@dataclass
class CheckReport:
    suite: str
    value: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        return f"{word} {self.suite}: {self.value:.3e} (threshold {self.threshold:.1e})"

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "value": self.value,
            "threshold": self.threshold,
            "passed": self.passed,
            "details": self.details,
        }


def _random_raw_state(rng, params: ModelParams, radius: float, clearance: float, speed: float):
    """Raw-chart point away from both centers, with a flat-correspondent velocity."""
    a = params.a
    while True:
        r = radius * math.sqrt(rng.uniform())
        th = rng.uniform(0, 2 * math.pi)
        x, y = r * math.cos(th), r * math.sin(th)
        if math.hypot(x, y - a) > clearance and math.hypot(x, y + a) > clearance:
            u, w = speed * rng.standard_normal(2)
            return np.array([x, y, u, w])


def _random_params(rng, space: Space, lagrange: bool) -> ModelParams:
    a = rng.uniform(0.05, 0.9) if space is SPHERICAL else rng.uniform(0.05, 0.6)
    return ModelParams(
        m1=rng.uniform(0.2, 2.0),
        m2=rng.uniform(0.0, 2.0),
        f=rng.uniform(0.0, 1.0) if lagrange else 0.0,
        a=a,
        space=space,
    )


def check_identities(samples: int = 1000, seed: int = 0) -> CheckReport:
    """Max ``|identity_residual|`` of the energy factorization over random draws.

    Draws alternate between sphere and hyperbolic plane and between the
    two-center (``f = 0``) and Lagrange (``f > 0``) problems.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    where = None
    for i in range(samples):
        space = SPHERICAL if i % 2 == 0 else HYPERBOLIC
        p = _random_params(rng, space, lagrange=(i // 2) % 2 == 1)
        raw = _random_raw_state(rng, p, radius=0.9 if space is SPHERICAL else 0.8, clearance=0.05, speed=1.0)
        std = np.array(standardize(*raw, p.a, p.kappa))
        res = abs(model.identity_residual(std, p))
        if res > worst:
            worst, where = res, {"space": space.kind, "params": [p.m1, p.m2, p.f, p.a], "state": std.tolist()}
    thr = THRESHOLDS["identities"]
    return CheckReport("identities", worst, thr, worst <= thr, {"samples": samples, "worst_at": where})


def _bracket_pairs(p: ModelParams):
    """The commuting pairs, as ``(name, F, G, kinetic_metric, on_chart)``."""

    def E_eucl(s):
        return model.energy_euclidean(s, p)

    def E_partner(s):
        return model.energy_curved(model._curved_of_standardized(s, p), p)

    def E_kep_V2(s):
        return model.kepler_energy(s, p.m1) + model.secondary_potential(s[:2], p)

    def D_K(s):
        return model.integral_D(s, p) + model.remainder_K(s, p)

    # on the curved chart: s = (q, v) with chart velocity v and momenta g v
    k = p.kappa

    def E_curved_chart(s):
        rho2 = chart_rho2(s[:2], k)
        return model.energy_curved(np.concatenate([s[:2], s[2:] / rho2]), p)

    def D_K_chart(s):
        rho2 = chart_rho2(s[:2], k)
        return D_K(np.array(standardize(s[0], s[1], s[2] / rho2, s[3] / rho2, p.a, k)))

    space = SPHERICAL if k > 0 else HYPERBOLIC
    return [
        ("E_Eucl,E_curved", E_eucl, E_partner, None, False),
        ("E_Kep+V2,D+K", E_kep_V2, D_K, None, False),
        ("E_curved,D+K", E_curved_chart, D_K_chart, lambda q: metric(q, space), True),
    ]


def check_brackets(samples: int = 100, seed: int = 0) -> CheckReport:
    """Max finite-difference bracket of the commuting pairs over random states.

    ``{E_Eucl, E_curved}`` and ``{E_Kep + V2, D + K}`` are evaluated on the
    standardized flat phase space; ``{E_curved, D + K}`` on the curved chart
    with momenta ``g v``. The trivial ``{E_Eucl, E_Eucl}`` is reported as well
    and held to ``1e-12``.
    """
    rng = np.random.default_rng(seed)
    worst: dict[str, float] = {}
    trivial = 0.0
    for i in range(samples):
        space = SPHERICAL if i % 2 == 0 else HYPERBOLIC
        p = _random_params(rng, space, lagrange=(i // 2) % 2 == 1)
        p = p.with_(a=min(p.a, 0.8))
        raw = _random_raw_state(rng, p, radius=0.45, clearance=0.1, speed=0.7)
        std = np.array(standardize(*raw, p.a, p.kappa))
        for name, F, G, M, on_chart in _bracket_pairs(p):
            if on_chart:
                st = flat_to_curved(PhaseState(std[:2], std[2:]), p.a, p.kappa).as_array()
            else:
                st = std
            val = abs(poisson_bracket_fd(F, G, st, kinetic_metric=M))
            key = f"{{{name}}}"
            worst[key] = max(worst.get(key, 0.0), val)
        E = _bracket_pairs(p)[0][1]
        trivial = max(trivial, abs(poisson_bracket_fd(E, E, std)))
    value = max(worst.values()) if worst else 0.0
    thr = THRESHOLDS["brackets"]
    passed = value <= thr and trivial <= TRIVIAL_BRACKET_TOL
    details = {"samples": samples, "max_by_pair": worst, "{E_Eucl,E_Eucl}": trivial}
    return CheckReport("brackets", value, thr, passed, details)


# ---------------------------------------------------------------------------
# projective correspondence


@dataclass(frozen=True)
class ProjectivePair:
    """A flat/curved pair integrated from corresponding initial conditions."""

    name: str
    which: str
    space: Space
    params: ModelParams
    std_state: tuple
    t_curved: float


DEFAULT_PAIRS = (
    ProjectivePair("two_center/spherical", "two_center", SPHERICAL,
                   ModelParams(1.0, 0.5, 0.0, 0.3, SPHERICAL), (0.05, 0.25, -1.6, 0.2), 6.0),
    ProjectivePair("lagrange/spherical", "lagrange", SPHERICAL,
                   ModelParams(1.0, 0.5, 0.3, 0.3, SPHERICAL), (0.05, 0.25, -1.6, 0.2), 6.0),
    ProjectivePair("two_center/hyperbolic", "two_center", HYPERBOLIC,
                   ModelParams(1.0, 0.5, 0.0, 0.3, HYPERBOLIC), (0.05, 0.25, -1.6, 0.2), 6.0),
    ProjectivePair("lagrange/hyperbolic", "lagrange", HYPERBOLIC,
                   ModelParams(1.0, 0.5, 0.3, 0.3, HYPERBOLIC), (0.05, 0.25, -1.6, 0.2), 6.0),
)


def hausdorff_to_trajectory(points: np.ndarray, traj, n_ref: int = 20000, candidates: int = 4,
                            iterations: int = 8) -> float:
    """One-sided distance ``max_P min_t |P - xi(t)|`` to a flat trajectory.

    The nearest dense samples are found with a k-d tree; from each of them
    the squared distance is minimized by vectorized Newton steps on the
    dense output, confined to the neighbouring sample intervals. Several
    candidates are refined because near a self-crossing the nearest sample
    may sit on the wrong branch.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    t0, t1 = traj.times[0], traj.times[-1]
    ts = np.linspace(t0, t1, n_ref)
    dt = ts[1] - ts[0]
    ref = traj.standardized_at(ts)[:, :2]
    _, idx = cKDTree(ref).query(points, k=candidates)
    idx = idx.reshape(len(points), -1)
    P = np.repeat(points, idx.shape[1], axis=0)
    j = idx.ravel()
    lo = ts[np.maximum(j - 1, 0)]
    hi = ts[np.minimum(j + 1, n_ref - 1)]
    t = ts[j]
    best = np.sum((ref[j] - P) ** 2, axis=1)
    step = 1e-3 * dt

    def pos(tt):
        return traj.standardized_at(tt)[:, :2]

    for _ in range(iterations):
        x0, xp, xm = pos(t), pos(np.minimum(t + step, t1)), pos(np.maximum(t - step, t0))
        d1 = (xp - xm) / (2 * step)
        d2 = (xp - 2 * x0 + xm) / step**2
        r = x0 - P
        g = np.sum(r * d1, axis=1)
        H = np.sum(d1 * d1, axis=1) + np.sum(r * d2, axis=1)
        newton = np.where(H > 0, -g / np.where(H > 0, H, 1.0), 0.0)
        t = np.clip(t + newton, lo, hi)
    best = np.minimum(best, np.sum((pos(t) - P) ** 2, axis=1))
    return float(np.sqrt(np.max(np.min(best.reshape(len(points), -1), axis=1))))


def projective_distance(pair: ProjectivePair, n_points: int = 2000, tol: float = 1e-12) -> dict:
    """Hausdorff distance between the projected curved orbit and the flat orbit."""
    std = PhaseState(pair.std_state[:2], pair.std_state[2:])
    curved_sys = SystemSelector(pair.which, pair.space, pair.params)
    flat_sys = SystemSelector(pair.which, EUCLIDEAN, pair.params)
    start = flat_to_curved(std, pair.params.a, pair.params.kappa)
    ct = integrate(curved_sys, start, pair.t_curved, tol, track_energy=False)
    if not ct.ok:
        raise RuntimeError(f"curved orbit stopped early: {ct.status} ({ct.message})")
    ts = np.linspace(0.0, pair.t_curved, n_points)
    projected = ct.standardized_at(ts)[:, :2]
    # matched arc: flat time runs as d(tau) = rho2 dt along the curved orbit
    q = ct.canonical_at(ts)[:, :2]
    rho2 = chart_rho2(q, pair.params.kappa)
    tau = float(trapezoid(rho2, ts))
    ft = integrate(flat_sys, std, 1.05 * tau, tol, track_energy=False)
    if not ft.ok:
        raise RuntimeError(f"flat orbit stopped early: {ft.status} ({ft.message})")
    dist = hausdorff_to_trajectory(projected, ft)
    return {"pair": pair.name, "distance": dist, "points": n_points, "flat_span": tau}


def check_projective(pairs=DEFAULT_PAIRS, n_points: int = 2000, tol: float = 1e-12) -> CheckReport:
    rows = [projective_distance(p, n_points, tol) for p in pairs]
    value = max(r["distance"] for r in rows)
    thr = THRESHOLDS["projective"]
    return CheckReport("projective", value, thr, value <= thr, {"pairs": rows})


# ---------------------------------------------------------------------------
# quadrature


def _clearance(el: OrbitElements, params: ModelParams, n: int = 2048) -> float:
    """Minimum distance of the orbit to the secondary center, over ``a_s``."""
    a_s = el.semi_major_axis(params.m1)
    X, Y, _ = ellipse_nodes(a_s, el.k, el.h_e, n)
    return float(np.min(np.hypot(X, Y + 2 * params.h)) / a_s)


def check_quadrature(samples: int = 30, seed: int = 0, e_max: float = 0.9, min_clearance: float = 0.2,
                     floor: float = 1e-12) -> CheckReport:
    """Error reduction per node doubling of the orbit average.

    Orbits are drawn with ``e <= e_max`` on each surface and kept when they
    stay at least ``min_clearance * a_s`` away from the secondary center
    (closer orbits approach the logarithmic singularity of the average and
    converge only slowly). Doublings start at the quadrature's initial node
    count and are counted while the coarse error exceeds
    ``floor * max(1, |I|)``.
    """
    rng = np.random.default_rng(seed)
    setups = (
        (EUCLIDEAN, ModelParams(1.0, 0.1, 0.5, 0.3 / math.sqrt(0.91)), 1.0),
        (SPHERICAL, ModelParams(1.0, 0.1, 0.5, 0.3, SPHERICAL), 1.0),
        (HYPERBOLIC, ModelParams(1.0, 0.1, 0.5, 0.15, HYPERBOLIC), 0.6),
    )
    nodes = tuple(START_NODES * 2**j for j in range(4))
    worst = math.inf
    rows = []
    for space, params, Lam in setups:
        asys = AveragedSystem(params)
        kept = 0
        while kept < samples:
            e = rng.uniform(0.0, e_max)
            g = rng.uniform(0.0, 2 * math.pi)
            el = OrbitElements(Lam, e * math.cos(g), e * math.sin(g))
            if _clearance(el, params) < min_clearance:
                continue
            table = convergence_table(el, asys, space, nodes=nodes, reference_nodes=8192)
            kept += 1
            errs = [r[2] for r in table]
            scale = max(1.0, abs(table[-1][1]))
            for j in range(len(errs) - 1):
                if errs[j] > floor * scale:
                    ratio = errs[j] / max(errs[j + 1], 1e-300)
                    if ratio < worst:
                        worst = ratio
            rows.append({"space": space.kind, "e": e, "g": g, "errors": errs})
    thr = THRESHOLDS["quadrature"]
    return CheckReport("quadrature", worst, thr, worst >= thr, {"nodes": list(nodes), "tables": rows})


SUITES = {
    "identities": check_identities,
    "brackets": check_brackets,
    "projective": lambda samples=None, seed=0: check_projective(),
    "quadrature": check_quadrature,
}


def run_suite(name: str, samples: int | None = None, seed: int = 0) -> CheckReport:
    """Run one suite by name; ``samples=None`` keeps the suite default."""
    if name not in SUITES:
        raise ValueError(f"unknown check suite {name!r}; expected one of {tuple(SUITES)}")
    fn = SUITES[name]
    if name == "projective":
        return fn()
    return fn(seed=seed) if samples is None else fn(samples=samples, seed=seed)
