import math

import numpy as np
import pytest

from secularbilliards import catalog
from secularbilliards.billiard import (
    Wall,
    confocal_wall,
    find_impact,
    run_billiard,
    wall_normal,
    wall_value,
)
from secularbilliards.flow import SystemSelector, fd_gradient, integrate
from secularbilliards.geometry import EUCLIDEAN, HYPERBOLIC, SPHERICAL, PhaseState, geodesic_distance, kinetic_energy
from secularbilliards.model import ModelParams

P = ModelParams(1.0, 0.0, 0.0, 0.5)
FREE = SystemSelector("kepler", EUCLIDEAN, ModelParams(0.0, 0.0, 0.0, 0.5))
H = P.h


def test_wall_validation():
    with pytest.raises(ValueError):
        confocal_wall("ellipse", P, EUCLIDEAN, s=0.1)
    with pytest.raises(ValueError):
        confocal_wall("hyperbola_branch", P, EUCLIDEAN, s=1.0)
    with pytest.raises(ValueError):
        confocal_wall("circle", P, EUCLIDEAN)


def test_wall_value_examples():
    w = Wall("ellipse", ((0, 0), (0, -1)), EUCLIDEAN, 1.0)
    assert wall_value(w, (0, 0.5)) == pytest.approx(0.0, abs=1e-15)
    line = Wall("focal_line", ((0, 0), (0, -1)), EUCLIDEAN)
    assert wall_value(line, (0.37, -0.5)) == pytest.approx(0.0, abs=1e-15)
    sw = confocal_wall("ellipse", ModelParams(1, 0, 0, 0.5, SPHERICAL), SPHERICAL, s=0.6)
    mid = np.array([0.0, 0.0])  # the chart origin is the geodesic midpoint of (0, +-a)
    d1 = math.acos(1 / math.sqrt(1.25))
    assert wall_value(sw, mid) == pytest.approx(2 * d1 - 1.2, abs=1e-14)


def test_wall_normal_examples():
    line = confocal_wall("focal_line", P, EUCLIDEAN)
    n = wall_normal(line, (0.3, -H))
    assert abs(n[0]) < 1e-14 and abs(abs(n[1]) - 1) < 1e-14
    ell = confocal_wall("ellipse", P, EUCLIDEAN, s=1.0)
    # apsis on the focal axis, above the primary: r1 + r2 = 2 s
    apsis = (0.0, 1.0 - H)
    assert abs(wall_value(ell, apsis)) < 1e-14
    n = wall_normal(ell, apsis)
    assert abs(n[0]) < 1e-14


@pytest.mark.parametrize("space, a", [(EUCLIDEAN, 0.5), (SPHERICAL, 0.5), (HYPERBOLIC, 0.3)])
def test_wall_normal_fd(space, a, rng):
    p = ModelParams(1, 0, 0, a, space)
    w = confocal_wall("ellipse", p, space, s=1.3 * 0.5 * float(geodesic_distance(*confocal_wall(
        "focal_line", p, space).foci, space)))
    from secularbilliards.geometry import inverse_metric, metric

    for _ in range(5):
        q = rng.uniform(-0.3, 0.3, 2)
        g = fd_gradient(lambda Y: np.asarray(wall_value(w, Y[:, :2], space)), np.concatenate([q, [0, 0]]))[:2]
        n = wall_normal(w, q)
        expect = inverse_metric(q, space) @ g
        expect /= math.sqrt(expect @ metric(q, space) @ expect)
        assert np.allclose(n, expect, atol=1e-6)


def _free_segment(q, v, t_end):
    tr = integrate(FREE, PhaseState(q, v), t_end, 1e-12)
    return tr.segments


def test_find_impact_none_and_exact():
    line = confocal_wall("focal_line", P, EUCLIDEAN)
    for seg in _free_segment((0.2, 0.5), (0.1, 0.2), 1.0):
        assert find_impact(seg, line) is None
    # eta(t) = 0.5 - t crosses eta = -h at t = 0.5 + h
    hits = [find_impact(seg, line) for seg in _free_segment((0.2, 0.5), (0.0, -1.0), 2.0)]
    hits = [x for x in hits if x is not None]
    assert len(hits) == 1 and hits[0][0] == pytest.approx(0.5 + H, abs=1e-12)


def test_kepler_impact_on_wall():
    sys = SystemSelector("kepler", EUCLIDEAN, P)
    ell = confocal_wall("ellipse", P, EUCLIDEAN, s=1.3 * H)
    tr = integrate(sys, PhaseState((0.05, 0.25), (-2.4, 0.3)), 5.0, 1e-12)
    hits = [x for x in (find_impact(s, ell) for s in tr.segments) if x is not None]
    assert hits
    for t, y in hits:
        assert abs(wall_value(ell, y[:2])) <= 1e-10


def test_no_bounce_short_run():
    sys = SystemSelector("kepler", EUCLIDEAN, P)
    run = run_billiard(sys, confocal_wall("ellipse", P, EUCLIDEAN, s=3.0), PhaseState((0.5, 0), (0, 1.3)), 0.1)
    assert run.bounces == [] and run.status == "completed"
    traj, bounces = run
    assert traj.times[-1] == pytest.approx(0.1)


def test_start_on_wall_rejected():
    sys = SystemSelector("kepler", EUCLIDEAN, P)
    line = confocal_wall("focal_line", P, EUCLIDEAN)
    with pytest.raises(ValueError):
        run_billiard(sys, line, PhaseState((0.5, -H), (0, 1)), 1.0)


@pytest.mark.parametrize("name", ["kepler-focal-line-euclidean", "kepler-ellipse-spherical",
                                  "kepler-hyperbola-hyperbolic"])
def test_kepler_billiard_conservation(name):
    sc = catalog.get(name)
    space = sc.surface
    run = run_billiard(sc.selector(), sc.build_walls(), sc.initial_state(), sc.run.t_end, 15, 1e-12)
    assert len(run.bounces) == 15
    for b in run.bounces:
        assert abs(b.dD) <= 1e-10 * (1 + abs(b.pre.D))
        assert abs(b.dE_kep) <= 1e-12 * (1 + abs(b.pre.E_kep))
        assert abs(b.dE_target) <= 1e-12 * (1 + abs(b.pre.E_target))
        ke = [kinetic_energy(PhaseState(b.point, v), space) for v in (b.v_pre, b.v_post)]
        assert abs(ke[0] - ke[1]) <= 1e-13 * (1 + ke[0])


def test_arc_window_pass_through():
    line = confocal_wall("focal_line", P, EUCLIDEAN, arc=(-0.5, 0.5))
    run = run_billiard(FREE, line, PhaseState((-0.3, 0.5), (0.0, -1.0)), 2.0)
    assert run.bounces == []
    run = run_billiard(FREE, line, PhaseState((0.3, 0.5), (0.0, -1.0)), 2.0)
    assert len(run.bounces) == 1 and run.bounces[0].v_post[1] == pytest.approx(1.0)


def test_corner_degeneracy():
    ell = confocal_wall("ellipse", P, EUCLIDEAN, s=1.0, arc=(0.3, 1.0))
    mid = np.array([0.0, -H])
    th = 0.3 + 1e-10  # just inside the window, well within the corner tolerance
    d = np.array([math.cos(th), math.sin(th)])
    run = run_billiard(FREE, ell, PhaseState(mid + 0.1 * d, d), 3.0)
    assert run.status == "corner_degeneracy" and run.bounces == []


def test_shifted_wall_breaks_D():
    sys = SystemSelector("kepler", EUCLIDEAN, P)
    ell = confocal_wall("ellipse", P, EUCLIDEAN, s=1.3 * H, shift=(0.1, 0.05))
    run = run_billiard(sys, ell, PhaseState((0.05, 0.25), (-2.4, 0.3)), 200.0, 20, 1e-12)
    assert max(abs(b.dD) for b in run.bounces) >= 1e-3
