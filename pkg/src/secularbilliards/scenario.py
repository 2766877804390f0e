"""Scenario documents: one JSON object describing a run.

A scenario names the governing system, surface, parameters, initial
state, optional walls, run controls, drift/bounce bounds and an RNG seed.
Parsing is strict: unknown keys and wrong types are rejected with a
diagnostic that names the offending location (``walls[1].kind``), and
``Scenario.to_json`` re-emits a document that parses back to an equal
value.

Layout and defaults::

    {
      "name": "scenario",
      "system": "kepler",            # kepler | two_center | lagrange | averaged
      "space": "euclidean",          # euclidean | spherical | hyperbolic
      "params": {"m1": 1.0, "m2": 0.0, "f": 0.0, "a": 1.0,
                 "partner": "spherical"},   # curved partner for flat runs
      "initial": {"state": [1.0, 0.0, 0.0, 1.0],
                  "frame": "standardized"}, # or "chart" (raw chart, curved)
      "walls": [{"kind": "ellipse", "s": 1.2, "branch": 1,
                 "arc": null, "shift": [0.0, 0.0]}],
      "run": {"t_end": 10.0, "tol": 1e-10, "qtol": 1e-12,
              "max_bounces": 50, "samples": 1001},
      "bounds": {"drift": {"D": 1e-6}, "bounce": {"D": 1e-10}},
      "checks": [],
      "seed": 0,
      "sweep": null                  # {"path": "params.m2", "values": [...]}
    }
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path


from .billiard import WALL_KINDS, Wall, confocal_wall, wall_value
from .errors import ChartDomainError, RegionError, ScenarioError
from .flow import SYSTEMS, SystemSelector, _check_region, to_canonical
from .geometry import PhaseState, Space, check_chart_domain, flat_to_curved
from .model import ModelParams

__all__ = [
    "Scenario",
    "ParamsSpec",
    "InitialSpec",
    "WallSpec",
    "RunSpec",
    "BoundsSpec",
    "SweepSpec",
    "DRIFT_KEYS",
    "BOUNCE_KEYS",
    "parse_scenario",
    "parse_scenario_text",
    "scenario_from_dict",
    "expand_sweep",
]

SPACES = ("euclidean", "spherical", "hyperbolic")
FRAMES = ("standardized", "chart")
DRIFT_KEYS = ("E_target", "E_kep", "C", "A1", "D", "E_sph", "Lambda")
BOUNCE_KEYS = ("D", "E_kep", "E_target")
CHECK_SUITES = ("identities", "brackets", "projective", "quadrature")


@dataclass(frozen=True)
class ParamsSpec:
    m1: float = 1.0
    m2: float = 0.0
    f: float = 0.0
    a: float = 1.0
    partner: str = "spherical"


@dataclass(frozen=True)
class InitialSpec:
    state: tuple = (1.0, 0.0, 0.0, 1.0)
    frame: str = "standardized"


@dataclass(frozen=True)
class WallSpec:
    kind: str
    s: float = 0.0
    branch: int = 1
    arc: tuple | None = None
    shift: tuple = (0.0, 0.0)


@dataclass(frozen=True)
class RunSpec:
    t_end: float = 10.0
    tol: float = 1e-10
    qtol: float = 1e-12
    max_bounces: int = 50
    samples: int = 1001


@dataclass(frozen=True)
class BoundsSpec:
    drift: tuple = ()
    bounce: tuple = ()

    def drift_dict(self) -> dict:
        return dict(self.drift)

    def bounce_dict(self) -> dict:
        return dict(self.bounce)


@dataclass(frozen=True)
class SweepSpec:
    path: str
    values: tuple


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    system: str = "kepler"
    space: str = "euclidean"
    params: ParamsSpec = field(default_factory=ParamsSpec)
    initial: InitialSpec = field(default_factory=InitialSpec)
    walls: tuple = ()
    run: RunSpec = field(default_factory=RunSpec)
    bounds: BoundsSpec = field(default_factory=BoundsSpec)
    checks: tuple = ()
    seed: int = 0
    sweep: SweepSpec | None = None

    # -- derived objects -------------------------------------------------

    @property
    def surface(self) -> Space:
        return Space.from_name(self.space)

    def model_params(self) -> ModelParams:
        p = self.params
        space = self.surface if self.surface.is_curved else Space.from_name(p.partner)
        return ModelParams(p.m1, p.m2, p.f, p.a, space)

    def selector(self) -> SystemSelector:
        return SystemSelector(self.system, self.surface, self.model_params(), qtol=self.run.qtol)

    def initial_state(self) -> PhaseState:
        """Initial state in the integration chart of the governing system."""
        st = PhaseState(self.initial.state[:2], self.initial.state[2:])
        if not self.surface.is_curved or self.initial.frame == "chart":
            return st
        p = self.model_params()
        return flat_to_curved(st, p.a, p.kappa)

    def build_walls(self) -> list[Wall]:
        p = self.model_params()
        return [confocal_wall(w.kind, p, self.surface, w.s, w.branch, w.arc, w.shift) for w in self.walls]

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        p, i, r, b = self.params, self.initial, self.run, self.bounds
        return {
            "name": self.name,
            "system": self.system,
            "space": self.space,
            "params": {"m1": p.m1, "m2": p.m2, "f": p.f, "a": p.a, "partner": p.partner},
            "initial": {"state": list(i.state), "frame": i.frame},
            "walls": [
                {
                    "kind": w.kind,
                    "s": w.s,
                    "branch": w.branch,
                    "arc": None if w.arc is None else list(w.arc),
                    "shift": list(w.shift),
                }
                for w in self.walls
            ],
            "run": {
                "t_end": r.t_end,
                "tol": r.tol,
                "qtol": r.qtol,
                "max_bounces": r.max_bounces,
                "samples": r.samples,
            },
            "bounds": {"drift": dict(b.drift), "bounce": dict(b.bounce)},
            "checks": list(self.checks),
            "seed": self.seed,
            "sweep": None if self.sweep is None else {"path": self.sweep.path, "values": list(self.sweep.values)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


# ---------------------------------------------------------------------------
# strict parsing helpers


class _Reader:
    """Typed access to one JSON object with location-bearing errors."""

    def __init__(self, obj, where: str, source: str):
        self.source = source
        self.where = where
        if not isinstance(obj, dict):
            self.fail(f"expected an object, got {type(obj).__name__}")
        self.obj = obj

    def fail(self, msg: str, key: str | None = None):
        loc = self.where if key is None else (f"{self.where}.{key}" if self.where else key)
        raise ScenarioError(f"{self.source}: {loc or '<root>'}: {msg}")

    def check_keys(self, allowed):
        for key in self.obj:
            if key not in allowed:
                self.fail(f"unknown key {key!r} (allowed: {', '.join(allowed)})", key)

    def loc(self, key):
        return f"{self.where}.{key}" if self.where else key

    def number(self, key, default, *, integer=False):
        if key not in self.obj:
            return default
        val = self.obj[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(f"expected a number, got {json.dumps(val)}", key)
        if integer:
            if isinstance(val, float) and not val.is_integer():
                self.fail(f"expected an integer, got {val!r}", key)
            return int(val)
        val = float(val)
        if not math.isfinite(val):
            self.fail("must be finite", key)
        return val

    def string(self, key, default, choices=None):
        if key not in self.obj:
            return default
        val = self.obj[key]
        if not isinstance(val, str):
            self.fail(f"expected a string, got {json.dumps(val)}", key)
        if choices is not None and val not in choices:
            self.fail(f"must be one of {', '.join(choices)}; got {val!r}", key)
        return val

    def vector(self, key, default, length):
        if key not in self.obj:
            return default
        val = self.obj[key]
        if val is None and default is None:
            return None
        if not isinstance(val, list) or len(val) != length:
            self.fail(f"expected a list of {length} numbers", key)
        out = []
        for j, x in enumerate(val):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(float(x)):
                self.fail(f"entry {j} must be a finite number", key)
            out.append(float(x))
        return tuple(out)

    def sub(self, key):
        if key not in self.obj or self.obj[key] is None:
            return None
        return _Reader(self.obj[key], self.loc(key), self.source)


def _bounds_table(r: _Reader | None, allowed) -> tuple:
    if r is None:
        return ()
    r.check_keys(allowed)
    out = []
    for key in allowed:
        if key in r.obj:
            val = r.number(key, None)
            if not val > 0:
                r.fail("bound must be positive", key)
            out.append((key, val))
    return tuple(out)


def scenario_from_dict(doc, source: str = "<scenario>") -> Scenario:
    """Validate a decoded JSON document and build a :class:`Scenario`."""
    root = _Reader(doc, "", source)
    root.check_keys(tuple(Scenario().to_dict()))
    name = root.string("name", "scenario")
    if not name or any(ch in name for ch in "/\\") or name in (".", ".."):
        root.fail("must be a non-empty name without path separators", "name")
    system = root.string("system", "kepler", SYSTEMS)
    space = root.string("space", "euclidean", SPACES)

    pr = root.sub("params") or _Reader({}, "params", source)
    pr.check_keys(("m1", "m2", "f", "a", "partner"))
    d = ParamsSpec()
    params = ParamsSpec(
        m1=pr.number("m1", d.m1),
        m2=pr.number("m2", d.m2),
        f=pr.number("f", d.f),
        a=pr.number("a", d.a),
        partner=pr.string("partner", d.partner, ("spherical", "hyperbolic")),
    )

    ir = root.sub("initial") or _Reader({}, "initial", source)
    ir.check_keys(("state", "frame"))
    initial = InitialSpec(
        state=ir.vector("state", InitialSpec().state, 4),
        frame=ir.string("frame", "standardized", FRAMES),
    )

    walls = []
    raw_walls = root.obj.get("walls", [])
    if raw_walls is None:
        raw_walls = []
    if not isinstance(raw_walls, list):
        root.fail("expected a list of wall objects", "walls")
    for j, wobj in enumerate(raw_walls):
        wr = _Reader(wobj, f"walls[{j}]", source)
        wr.check_keys(("kind", "s", "branch", "arc", "shift"))
        if "kind" not in wr.obj:
            wr.fail("missing required key 'kind'")
        branch = wr.number("branch", 1, integer=True)
        if branch not in (1, -1):
            wr.fail("must be +1 or -1", "branch")
        walls.append(
            WallSpec(
                kind=wr.string("kind", None, WALL_KINDS),
                s=wr.number("s", 0.0),
                branch=branch,
                arc=wr.vector("arc", None, 2),
                shift=wr.vector("shift", (0.0, 0.0), 2),
            )
        )

    rr = root.sub("run") or _Reader({}, "run", source)
    rr.check_keys(("t_end", "tol", "qtol", "max_bounces", "samples"))
    d = RunSpec()
    run = RunSpec(
        t_end=rr.number("t_end", d.t_end),
        tol=rr.number("tol", d.tol),
        qtol=rr.number("qtol", d.qtol),
        max_bounces=rr.number("max_bounces", d.max_bounces, integer=True),
        samples=rr.number("samples", d.samples, integer=True),
    )
    if not run.t_end > 0:
        rr.fail("must be positive", "t_end")
    if not 1e-14 <= run.tol <= 1e-4:
        rr.fail("must lie in [1e-14, 1e-4]", "tol")
    if not 1e-14 <= run.qtol <= 1e-6:
        rr.fail("must lie in [1e-14, 1e-6]", "qtol")
    if not run.max_bounces >= 1:
        rr.fail("must be at least 1", "max_bounces")
    if not 2 <= run.samples <= 1_000_000:
        rr.fail("must lie in [2, 1000000]", "samples")

    br = root.sub("bounds") or _Reader({}, "bounds", source)
    br.check_keys(("drift", "bounce"))
    bounds = BoundsSpec(_bounds_table(br.sub("drift"), DRIFT_KEYS), _bounds_table(br.sub("bounce"), BOUNCE_KEYS))

    checks = root.obj.get("checks", [])
    if checks is None:
        checks = []
    if not isinstance(checks, list) or any(c not in CHECK_SUITES for c in checks):
        root.fail(f"expected a list drawn from {', '.join(CHECK_SUITES)}", "checks")

    seed = root.number("seed", 0, integer=True)
    if seed < 0:
        root.fail("must be non-negative", "seed")

    sweep = None
    sr = root.sub("sweep")
    if sr is not None:
        sr.check_keys(("path", "values"))
        path = sr.string("path", None)
        vals = sr.obj.get("values")
        if path is None or not isinstance(vals, list) or not vals:
            sr.fail("needs 'path' and a non-empty 'values' list")
        sweep = SweepSpec(path, tuple(vals))

    sc = Scenario(name, system, space, params, initial, tuple(walls), run, bounds, tuple(checks), seed, sweep)
    _validate_physics(sc, source)
    if sweep is not None:
        # every variant must validate on its own
        for variant in expand_sweep(sc, source):
            _validate_physics(variant, source)
    return sc


def _validate_physics(sc: Scenario, source: str):
    """Checks that need the model: parameter ranges, domains, region R, walls."""

    def fail(loc, msg):
        raise ScenarioError(f"{source}: {loc}: {msg}")

    try:
        params = sc.model_params()
    except ValueError as exc:
        fail("params", str(exc))
    if sc.space != "euclidean" and sc.params.partner != "spherical" and sc.params.partner != sc.space:
        fail("params.partner", "curved scenarios use their own surface as partner")
    try:
        sys = sc.selector()
    except ValueError as exc:
        fail("system", str(exc))
    if sc.initial.frame == "chart" and not sc.surface.is_curved:
        fail("initial.frame", "'chart' applies to curved surfaces only")
    try:
        state = sc.initial_state()
        if sc.surface.is_curved:
            check_chart_domain(state.q, sc.surface)
        y = to_canonical(sys, state)
    except (ChartDomainError, ValueError) as exc:
        fail("initial.state", str(exc))
    if sc.system == "averaged":
        try:
            _check_region(sys, y)
        except RegionError as exc:
            fail("initial.state", f"outside the averaging region R ({exc})")
    for j, w in enumerate(sc.walls):
        try:
            wall = confocal_wall(w.kind, params, sc.surface, w.s, w.branch, w.arc, w.shift)
        except ValueError as exc:
            fail(f"walls[{j}]", str(exc))
        if abs(float(wall_value(wall, state.q, sc.surface))) <= 1e-12:
            fail(f"walls[{j}]", "initial state lies on the wall")


def expand_sweep(sc: Scenario, source: str = "<scenario>") -> list[Scenario]:
    """Variants of a scenario with a ``sweep`` block (the scenario itself if none).

    ``path`` is a dotted key into the document, e.g. ``params.m2`` or
    ``run.t_end``; variant ``i`` is named ``<name>-<i:03d>``.
    """
    if sc.sweep is None:
        return [sc]
    out = []
    base = sc.to_dict()
    base["sweep"] = None
    keys = sc.sweep.path.split(".")
    for i, val in enumerate(sc.sweep.values):
        doc = copy.deepcopy(base)
        node = doc
        for k in keys[:-1]:
            if not isinstance(node, dict) or k not in node:
                raise ScenarioError(f"{source}: sweep.path: {sc.sweep.path!r} does not name a scenario key")
            node = node[k]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ScenarioError(f"{source}: sweep.path: {sc.sweep.path!r} does not name a scenario key")
        node[keys[-1]] = val
        doc["name"] = f"{sc.name}-{i:03d}"
        out.append(scenario_from_dict(doc, f"{source} (sweep value {i})"))
    return out


def parse_scenario_text(text: str, source: str = "<scenario>") -> Scenario:
    try:
        doc = json.loads(text, object_pairs_hook=_no_duplicates(source))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    return scenario_from_dict(doc, source)


def _no_duplicates(source):
    def hook(pairs):
        seen = {}
        for k, v in pairs:
            if k in seen:
                raise ScenarioError(f"{source}: duplicate key {k!r}")
            seen[k] = v
        return seen

    return hook


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read scenario ({exc.strerror})") from None
    return parse_scenario_text(text, str(path))
