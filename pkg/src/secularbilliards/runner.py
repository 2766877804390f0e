"""Execute scenarios and write their artifacts.

Artifacts are plain files: ``trajectory.csv``, ``bounces.csv``,
``summary.json`` and an optional hand-written SVG. Numbers are written in
the shortest decimal form that round-trips to the same binary64 value, so
identical inputs give byte-identical files. Every file is written to a
temporary sibling first and moved into place.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model
from .billiard import BilliardRun, run_billiard, wall_value
from .flow import Trajectory, _canonical_to_std, hamiltonian, integrate, standardized_correspondent
from .geometry import PhaseState
from .scenario import Scenario

__all__ = [
    "TRAJECTORY_COLUMNS",
    "BOUNCE_COLUMNS",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_SINGULARITY",
    "EXIT_DEGENERACY",
    "EXIT_CHECK",
    "RunResult",
    "simulate",
    "billiard",
    "execute",
    "write_artifacts",
    "format_number",
    "render_svg",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SINGULARITY = 3
EXIT_DEGENERACY = 4
EXIT_CHECK = 5

TRAJECTORY_COLUMNS = {
    "t": "time of the governing system (curved-surface time on curved runs)",
    "xi": "standardized flat position, primary center at the origin",
    "eta": "standardized flat position, secondary center at (0, -2h)",
    "vxi": "standardized flat velocity (flat correspondent on curved runs)",
    "veta": "standardized flat velocity",
    "E_target": "value of the governing Hamiltonian",
    "E_kep": "Kepler energy about the primary center",
    "C": "Kepler angular momentum xi*veta - eta*vxi",
    "A1": "Laplace-Runge-Lenz component toward the secondary center",
    "D": "the secular first integral C^2 - 2 h A1",
    "E_sph": "energy of the curved partner problem at the same point",
    "identity_residual": "E_sph - c (E_kep + V2 + kappa (D + K) / 2)",
}

_INTEGRALS = ("E_target", "E_kep", "C", "A1", "D", "E_sph")
BOUNCE_COLUMNS = {
    "index": "bounce number, from 0",
    "t": "impact time",
    "wall": "index of the wall hit",
    "xi": "standardized impact position",
    "eta": "standardized impact position",
    "vxi_pre": "standardized velocity before reflection",
    "veta_pre": "standardized velocity before reflection",
    "vxi_post": "standardized velocity after reflection",
    "veta_post": "standardized velocity after reflection",
    **{f"{k}_pre": f"{k} before reflection" for k in _INTEGRALS},
    **{f"{k}_post": f"{k} after reflection" for k in _INTEGRALS},
    "dE_target": "jump of the governing Hamiltonian (may be nonzero for averaged flows)",
    "dE_kep": "jump of the Kepler energy",
    "dD": "jump of D",
}

_STATUS_EXIT = {
    "completed": EXIT_OK,
    "max_bounces": EXIT_OK,
    "corner_degeneracy": EXIT_DEGENERACY,
    "focus_degeneracy": EXIT_DEGENERACY,
}


def format_number(x) -> str:
    """Shortest round-trip decimal of a float (``nan``/``inf`` spelled out)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


@dataclass
class RunResult:
    scenario: Scenario
    trajectory: Trajectory
    rows: np.ndarray
    summary: dict
    bounce_rows: np.ndarray | None = None
    run: BilliardRun | None = None
    exit_code: int = EXIT_OK
    extras: dict = field(default_factory=dict)


def _safe(fn, *args):
    try:
        return fn(*args)
    except Exception:
        return math.nan


def _integral_row(sys, y, std) -> list[float]:
    p = sys.params
    fi = _safe(model.first_integrals, std, p)
    vals = [math.nan] * 5 if isinstance(fi, float) else [fi.E_kep, fi.C, fi.A1, fi.D, fi.E_sph]
    return [_safe(hamiltonian, sys, y), *vals, _safe(model.identity_residual, std, p)]


def _sample_rows(traj: Trajectory, samples: int) -> np.ndarray:
    sys = traj.system
    t0, t1 = float(traj.times[0]), float(traj.times[-1])
    ts = np.linspace(t0, t1, samples) if t1 != t0 else np.full(1, t0)
    Y = traj.canonical_at(ts)
    S = _canonical_to_std(Y, sys)
    rows = np.empty((len(ts), len(TRAJECTORY_COLUMNS)))
    for i, (t, y, s) in enumerate(zip(ts, Y, S)):
        rows[i, 0] = t
        rows[i, 1:5] = s
        rows[i, 5:] = _integral_row(sys, y, s)
    return rows


def _drifts(rows: np.ndarray, m1: float) -> dict:
    """Scaled drifts ``max |X - X(0)| / max(1, |X(0)|)`` of the integral columns."""
    cols = list(TRAJECTORY_COLUMNS)
    out = {}
    series = {k: rows[:, cols.index(k)] for k in _INTEGRALS}
    E = series["E_kep"]
    with np.errstate(invalid="ignore", divide="ignore"):
        series["Lambda"] = np.where(E < 0, m1 / np.sqrt(-2 * np.where(E < 0, E, -1.0)), np.nan)
    for k, x in series.items():
        ok = np.isfinite(x)
        if not ok.any() or not np.isfinite(x[0]):
            out[k] = math.nan
            continue
        out[k] = float(np.max(np.abs(x[ok] - x[0])) / max(1.0, abs(x[0])))
    return out


def _base_summary(sc: Scenario, traj: Trajectory, rows: np.ndarray) -> dict:
    sys = traj.system
    drift = _drifts(rows, sys.params.m1)
    return {
        "name": sc.name,
        "system": sc.system,
        "space": sc.space,
        "status": traj.status,
        "message": traj.message,
        "t_final": float(traj.times[-1]),
        "samples": int(len(rows)),
        "stats": {k: v for k, v in traj.stats.items()},
        "initial_integrals": dict(zip(_INTEGRALS, rows[0, 5:11].tolist())),
        "max_drift": drift,
        "max_identity_residual": float(np.nanmax(np.abs(rows[:, -1]))) if np.isfinite(rows[:, -1]).any() else None,
    }


def _check_bounds(table: dict, observed: dict, kind: str) -> list[str]:
    out = []
    for key, bound in table.items():
        val = observed.get(key, math.nan)
        if not (val <= bound):
            out.append(f"{kind} {key}: {val!r} exceeds {bound!r}")
    return out


def _finish(summary: dict, status: str, violations: list[str]) -> int:
    code = _STATUS_EXIT.get(status, EXIT_SINGULARITY)
    if code == EXIT_OK and violations:
        code = EXIT_CHECK
    summary["violations"] = violations
    summary["bounds_ok"] = not violations
    summary["exit_code"] = code
    return code


def simulate(sc: Scenario) -> RunResult:
    """Integrate a scenario without walls and evaluate drifts."""
    sys = sc.selector()
    traj = integrate(sys, sc.initial_state(), sc.run.t_end, sc.run.tol)
    rows = _sample_rows(traj, sc.run.samples)
    summary = _base_summary(sc, traj, rows)
    summary["bounds"] = {"drift": sc.bounds.drift_dict()}
    violations = _check_bounds(sc.bounds.drift_dict(), summary["max_drift"], "drift")
    code = _finish(summary, traj.status, violations)
    return RunResult(sc, traj, rows, summary, exit_code=code)


def _bounce_rows(sys, run: BilliardRun) -> np.ndarray:
    rows = np.empty((len(run.bounces), len(BOUNCE_COLUMNS)))
    for i, b in enumerate(run.bounces):
        pre = standardized_correspondent(sys, PhaseState(b.point, b.v_pre))
        post = standardized_correspondent(sys, PhaseState(b.point, b.v_post))
        pre_i = b.pre.as_dict()
        post_i = b.post.as_dict()
        rows[i] = [
            i,
            b.time,
            b.wall_index,
            pre[0],
            pre[1],
            pre[2],
            pre[3],
            post[2],
            post[3],
            *(pre_i[k] for k in _INTEGRALS),
            *(post_i[k] for k in _INTEGRALS),
            b.dE_target,
            b.dE_kep,
            b.dD,
        ]
    return rows


def billiard(sc: Scenario) -> RunResult:
    """Run a scenario with walls; bounds apply per bounce and to drifts."""
    if not sc.walls:
        from .errors import ScenarioError

        raise ScenarioError(f"{sc.name}: walls: a billiard scenario needs at least one wall")
    sys = sc.selector()
    run = run_billiard(sys, sc.build_walls(), sc.initial_state(), sc.run.t_end, sc.run.max_bounces, sc.run.tol)
    traj = run.trajectory
    rows = _sample_rows(traj, sc.run.samples)
    brows = _bounce_rows(sys, run)
    summary = _base_summary(sc, traj, rows)
    jumps = {
        "D": float(max((abs(b.dD) for b in run.bounces), default=0.0)),
        "E_kep": float(max((abs(b.dE_kep) for b in run.bounces), default=0.0)),
        "E_target": float(max((abs(b.dE_target) for b in run.bounces), default=0.0)),
    }
    summary["bounces"] = len(run.bounces)
    summary["grazes"] = len(run.grazes)
    summary["max_bounce_jump"] = jumps
    summary["bounds"] = {"drift": sc.bounds.drift_dict(), "bounce": sc.bounds.bounce_dict()}
    violations = _check_bounds(sc.bounds.drift_dict(), summary["max_drift"], "drift")
    violations += _check_bounds(sc.bounds.bounce_dict(), jumps, "bounce")
    code = _finish(summary, traj.status, violations)
    return RunResult(sc, traj, rows, summary, brows, run, exit_code=code)


def execute(sc: Scenario) -> RunResult:
    return billiard(sc) if sc.walls else simulate(sc)


# ---------------------------------------------------------------------------
# files


def _atomic_write(path: Path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns, rows: np.ndarray, integer_columns=()) -> str:
    lines = [",".join(columns)]
    ints = {columns.index(c) for c in integer_columns}
    for r in rows:
        lines.append(",".join(str(int(v)) if j in ints else format_number(v) for j, v in enumerate(r)))
    return "\n".join(lines) + "\n"


def write_artifacts(result: RunResult, out_dir, svg_path=None) -> list[Path]:
    """Write ``trajectory.csv``, ``summary.json`` and, for billiards, ``bounces.csv``."""
    out = Path(out_dir)
    written = []
    p = out / "trajectory.csv"
    _atomic_write(p, csv_text(list(TRAJECTORY_COLUMNS), result.rows))
    written.append(p)
    if result.bounce_rows is not None:
        p = out / "bounces.csv"
        _atomic_write(p, csv_text(list(BOUNCE_COLUMNS), result.bounce_rows, ("index", "wall")))
        written.append(p)
    p = out / "summary.json"
    _atomic_write(p, json.dumps(_json_safe(result.summary), indent=2) + "\n")
    written.append(p)
    if svg_path is not None:
        p = Path(svg_path)
        _atomic_write(p, render_svg(result))
        written.append(p)
    return written


def write_json(path, obj) -> Path:
    _atomic_write(Path(path), json.dumps(_json_safe(obj), indent=2) + "\n")
    return Path(path)


# ---------------------------------------------------------------------------
# SVG


def _wall_polyline(wall, space, center, radius, n_angles=721):
    """Points of a wall found by bisection along rays from ``center``."""
    pts = []
    rs = np.linspace(1e-6, radius, 400)
    for th in np.linspace(-math.pi, math.pi, n_angles):
        d = np.array([math.cos(th), math.sin(th)])
        Q = center + rs[:, None] * d
        if space.curvature < 0:
            keep = np.sum(Q * Q, axis=1) < 1 - 1e-9
            Q, r_ok = Q[keep], rs[keep]
        else:
            r_ok = rs
        if len(Q) < 2:
            pts.append(None)
            continue
        vals = np.asarray(wall_value(wall, Q, space))
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        if len(idx) == 0:
            pts.append(None)
            continue
        j = idx[0]
        lo, hi = r_ok[j], r_ok[j + 1]
        flo = vals[j]
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            fm = float(wall_value(wall, center + mid * d, space))
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        q = center + 0.5 * (lo + hi) * d
        pts.append(q if wall.in_arc(q) else None)
    return pts


def render_svg(result: RunResult, size: int = 640) -> str:
    """Static drawing of the chart trajectory, the walls and the centers."""
    traj = result.trajectory
    sys = traj.system
    ts = np.linspace(traj.times[0], traj.times[-1], max(2, min(20000, 20 * result.scenario.run.samples)))
    Q = traj.canonical_at(ts)[:, :2]
    p = sys.params
    if sys.curved:
        centers = [np.array([0.0, p.a]), np.array([0.0, -p.a])]
    else:
        centers = [np.zeros(2), np.array([0.0, -2.0 * p.h])]
    lo = np.min(np.vstack([Q, *centers]), axis=0)
    hi = np.max(np.vstack([Q, *centers]), axis=0)
    span = float(max(hi - lo)) or 1.0
    pad = 0.08 * span
    lo, hi = lo - pad, hi + pad
    span = float(max(hi - lo))
    scale = size / span

    def xy(q):
        return (q[0] - lo[0]) * scale, size - (q[1] - lo[1]) * scale

    def path(points):
        segs, cur = [], []
        for q in points:
            if q is None:
                if len(cur) > 1:
                    segs.append(cur)
                cur = []
            else:
                cur.append("%.2f,%.2f" % xy(q))
        if len(cur) > 1:
            segs.append(cur)
        return segs

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f"<title>{result.scenario.name}</title>",
    ]
    if sys.space.curvature < 0:
        cx, cy = xy(np.zeros(2))
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="{scale:.2f}" fill="none" stroke="#bbbbbb"/>')
    for seg in path(list(Q)):
        out.append(f'<polyline fill="none" stroke="#1f4e9a" stroke-width="0.8" points="{" ".join(seg)}"/>')
    if result.run is not None:
        walls = result.scenario.build_walls()
        for wall in walls:
            center = wall.midpoint
            for seg in path(_wall_polyline(wall, sys.space, center, 1.5 * span)):
                out.append(f'<polyline fill="none" stroke="#b02020" stroke-width="1.5" points="{" ".join(seg)}"/>')
        for b in result.run.bounces:
            x, y = xy(b.point)
            out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="#b02020"/>')
    for c in centers:
        x, y = xy(c)
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
