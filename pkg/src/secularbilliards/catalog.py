"""Named, ready-to-run scenarios.

These are the configurations used by the test-suite, the ``--scenario
builtin:NAME`` form of the command line and the demo scripts. Each entry
is a function returning a fresh :class:`~secularbilliards.scenario.Scenario`.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import EUCLIDEAN, HYPERBOLIC, SPHERICAL, PhaseState, geodesic_distance
from .model import ModelParams
from .scenario import BoundsSpec, InitialSpec, ParamsSpec, RunSpec, Scenario, WallSpec

__all__ = ["CATALOG", "get", "names", "half_focal_distance", "averaging_deviation"]

# h = 0.3 for the flat averaged runs (c = 1 + a^2 with the spherical partner)
A_AVERAGED = 0.3 / math.sqrt(0.91)
KEPLER_STATE = (0.05, 0.25, -2.4, 0.3)
OUTER_STATE = (0.0, 0.8, -1.2247, 0.0)


def half_focal_distance(space: str, a: float) -> float:
    """Half the geodesic distance between the two wall foci."""
    if space == "euclidean":
        # standardized foci at the origin and (0, -2h), spherical partner
        return a / math.sqrt(1 + a * a)
    sp = SPHERICAL if space == "spherical" else HYPERBOLIC
    return 0.5 * float(geodesic_distance(np.array([0.0, a]), np.array([0.0, -a]), sp))


def _kepler_billiard(space: str, kind: str, a: float, factor: float = 0.0, state=KEPLER_STATE,
                     shift=(0.0, 0.0), name=None, bound=True) -> Scenario:
    s = factor * half_focal_distance(space, a)
    return Scenario(
        name=name or f"kepler-{kind.replace('_', '-')}-{space}",
        system="kepler",
        space=space,
        params=ParamsSpec(a=a),
        initial=InitialSpec(tuple(state)),
        walls=(WallSpec(kind, s, 1, None, tuple(shift)),),
        run=RunSpec(t_end=2000.0, tol=1e-12, max_bounces=50, samples=2001),
        bounds=BoundsSpec(bounce=(("D", 1e-10),)) if bound else BoundsSpec(),
    )


def _averaged(space: str, a: float, f: float = 0.0, state=OUTER_STATE, name=None) -> Scenario:
    return Scenario(
        name=name or f"averaged-{'lagrange-' if f else ''}{space}",
        system="averaged",
        space=space,
        params=ParamsSpec(m2=0.1, f=f, a=a),
        initial=InitialSpec(tuple(state)),
        run=RunSpec(t_end=200.0, tol=1e-10, qtol=1e-12, samples=1001),
        bounds=BoundsSpec(drift=(("D", 1e-6), ("Lambda", 1e-6))),
    )


def _averaged_billiard(kind: str, s: float, state, branch: int = 1, name=None) -> Scenario:
    return Scenario(
        name=name or f"averaged-billiard-{kind.replace('_', '-')}",
        system="averaged",
        space="euclidean",
        params=ParamsSpec(m2=0.1, a=A_AVERAGED),
        initial=InitialSpec(tuple(state)),
        walls=(WallSpec(kind, s, branch),),
        run=RunSpec(t_end=400.0, tol=1e-10, qtol=1e-12, max_bounces=30, samples=2001),
        bounds=BoundsSpec(
            drift=(("E_kep", 1e-6), ("D", 1e-6)),
            bounce=(("D", 1e-8), ("E_kep", 1e-10)),
        ),
    )


CATALOG = {
    "kepler-minimal": lambda: Scenario(name="kepler-minimal"),
    "kepler-circular": lambda: Scenario(
        name="kepler-circular",
        params=ParamsSpec(a=1.0),
        initial=InitialSpec((1.0, 0.0, 0.0, 1.0)),
        run=RunSpec(t_end=10.0, tol=1e-10),
        bounds=BoundsSpec(drift=tuple((k, 1e-9) for k in ("E_target", "E_kep", "C", "A1", "D", "E_sph"))),
    ),
    "two-center-commuting": lambda: Scenario(
        name="two-center-commuting",
        system="two_center",
        params=ParamsSpec(m2=0.2, a=0.3),
        initial=InitialSpec((0.05, 0.6, -1.1, 0.1)),
        run=RunSpec(t_end=100.0, tol=1e-10, samples=4001),
        bounds=BoundsSpec(drift=(("E_sph", 1e-7),)),
    ),
    # full two-center flow: D is conserved only on average
    "two-center-d-oscillation": lambda: Scenario(
        name="two-center-d-oscillation",
        system="two_center",
        params=ParamsSpec(m2=0.1, a=A_AVERAGED),
        initial=InitialSpec(OUTER_STATE),
        run=RunSpec(t_end=200.0, tol=1e-10, samples=4001),
    ),
    "averaged-euclidean": lambda: _averaged("euclidean", A_AVERAGED),
    "averaged-spherical": lambda: _averaged("spherical", 0.3),
    "averaged-lagrange-euclidean": lambda: _averaged("euclidean", A_AVERAGED, f=0.05),
    "averaged-lagrange-spherical": lambda: _averaged("spherical", 0.3, f=0.05),
    "averaged-hyperbolic": lambda: _averaged("hyperbolic", 0.15, state=(0.0, 0.45, -1.63, 0.0)),
    "kepler-focal-line-euclidean": lambda: _kepler_billiard("euclidean", "focal_line", 0.5),
    "kepler-ellipse-euclidean": lambda: _kepler_billiard("euclidean", "ellipse", 0.5, 1.3),
    "kepler-hyperbola-euclidean": lambda: _kepler_billiard("euclidean", "hyperbola_branch", 0.5, 0.5),
    "kepler-focal-line-spherical": lambda: _kepler_billiard("spherical", "focal_line", 0.5),
    "kepler-ellipse-spherical": lambda: _kepler_billiard("spherical", "ellipse", 0.5, 1.3),
    "kepler-hyperbola-spherical": lambda: _kepler_billiard("spherical", "hyperbola_branch", 0.5, 0.5),
    "kepler-focal-line-hyperbolic": lambda: _kepler_billiard("hyperbolic", "focal_line", 0.3),
    "kepler-ellipse-hyperbolic": lambda: _kepler_billiard(
        "hyperbolic", "ellipse", 0.3, 1.6, state=(0.05, 0.15, -3.2, 0.3)
    ),
    "kepler-hyperbola-hyperbolic": lambda: _kepler_billiard("hyperbolic", "hyperbola_branch", 0.3, 0.5),
    # non-confocal control: the ellipse foci are shifted off the centers
    "kepler-shifted-ellipse": lambda: _kepler_billiard(
        "euclidean", "ellipse", 0.5, 1.3, shift=(0.1, 0.05), name="kepler-shifted-ellipse", bound=False
    ),
    "averaged-billiard-focal-line": lambda: _averaged_billiard("focal_line", 0.0, (0.02, 0.8, -1.2247, 0.05)),
    "averaged-billiard-ellipse": lambda: _averaged_billiard("ellipse", 1.0, (0.05, -0.9, 1.054, 0.1)),
    "averaged-billiard-hyperbola": lambda: _averaged_billiard(
        "hyperbola_branch", 0.15, (0.02, 0.8, -1.2247, 0.05), branch=-1
    ),
}

KEPLER_BILLIARDS = tuple(
    f"kepler-{k}-{s}" for s in ("euclidean", "spherical", "hyperbolic") for k in ("focal-line", "ellipse", "hyperbola")
)
AVERAGED_VARIANTS = (
    "averaged-euclidean",
    "averaged-spherical",
    "averaged-lagrange-euclidean",
    "averaged-lagrange-spherical",
    "averaged-hyperbolic",
)
AVERAGED_BILLIARDS = ("averaged-billiard-focal-line", "averaged-billiard-ellipse", "averaged-billiard-hyperbola")


def names() -> list[str]:
    return sorted(CATALOG)


def get(name: str) -> Scenario:
    try:
        return CATALOG[name]()
    except KeyError:
        raise KeyError(f"no built-in scenario {name!r}; available: {', '.join(names())}") from None


def averaging_deviation(m2: float, state=OUTER_STATE, a: float = A_AVERAGED, samples: int = 201,
                        tol: float = 1e-12) -> float:
    """Max deviation of ``(Lambda, k, h_e)`` between full and averaged flows.

    Both flows start from the same osculating state and run for one Kepler
    period of that state; the deviation is the largest absolute element
    difference over ``samples`` equispaced times.
    """
    from .flow import SystemSelector, integrate
    from .secular import state_to_elements

    p = ModelParams(1.0, m2, 0.0, a, EUCLIDEAN)
    st = PhaseState(state[:2], state[2:])
    el = state_to_elements(st.as_array(), p.m1)
    T = 2 * math.pi / el.mean_motion(p.m1)
    full = integrate(SystemSelector("two_center", EUCLIDEAN, p), st, T, tol, track_energy=False)
    avg = integrate(SystemSelector("averaged", EUCLIDEAN, p), st, T, tol, track_energy=False)
    if not (full.ok and avg.ok):
        raise RuntimeError(f"integration stopped early: {full.status}/{avg.status}")
    ts = np.linspace(0.0, T, samples)

    def elements(Y):
        return np.array([[e.Lambda, e.k, e.h_e] for e in (state_to_elements(y, p.m1) for y in Y)])

    return float(np.max(np.abs(elements(full.standardized_at(ts)) - elements(avg.standardized_at(ts)))))
