import math

import numpy as np
import pytest

from secularbilliards.errors import ChartDomainError
from secularbilliards.geometry import (
    EUCLIDEAN,
    HYPERBOLIC,
    SPHERICAL,
    ChartJacobianPair,
    PhaseState,
    Space,
    ambient_form,
    check_chart_domain,
    curved_to_flat,
    flat_to_curved,
    geodesic_distance,
    kinetic_energy,
    lift_to_surface,
    metric,
    project_to_chart,
    reflect_vector,
    scaled_norm,
    standardize,
    unstandardize,
)


def test_space_validation():
    assert Space.from_name("sphere") is SPHERICAL
    with pytest.raises(ValueError):
        Space("spherical", -1)
    with pytest.raises(ValueError):
        Space("torus", 0)


@pytest.mark.parametrize(
    "v, a, expected",
    [((3, 4), 0.0, 5.0), ((0, 1), 1.0, 1 / math.sqrt(2)), ((1, 1), math.sqrt(3), math.sqrt(1.25))],
)
def test_scaled_norm_examples(v, a, expected):
    assert scaled_norm(v, a) == pytest.approx(expected, rel=1e-15)


def test_scaled_norm_euclidean_exact(rng):
    for v in rng.normal(size=(1000, 2)):
        assert scaled_norm(v, 0.0) == math.hypot(*v)


def test_standardize_examples():
    a = 0.7
    assert standardize(0.0, a, 0.0, 0.0, a) == pytest.approx((0, 0, 0, 0), abs=1e-15)
    out = standardize(0.0, -1.0, 0.0, 0.0, 1.0)
    assert out == pytest.approx((0.0, -math.sqrt(2), 0.0, 0.0), abs=1e-15)
    s = (0.3, -1.2, 0.5, 2.0)
    assert standardize(*s, 0.0) == s


def test_standardize_round_trip(rng):
    for _ in range(200):
        s = rng.normal(size=4)
        a = rng.uniform(0, 3)
        back = unstandardize(*standardize(*s, a), a)
        assert np.allclose(back, s, rtol=0, atol=1e-13)


def test_lift_examples():
    pair = lift_to_surface(PhaseState((0, 0), (0, 0)), SPHERICAL)
    assert np.allclose(pair.point, (0, 0, -1)) and np.allclose(pair.velocity, 0)
    a = 0.4
    c = math.sqrt(1 + a * a)
    pair = lift_to_surface(PhaseState((0, a), (0, 0)), SPHERICAL)
    assert np.allclose(pair.point, (0, a / c, -1 / c), atol=1e-15)
    back = project_to_chart(ChartJacobianPair(np.array([0, a, -1]) / c), SPHERICAL)
    assert np.allclose(back.q, (0, a), atol=1e-15) and np.allclose(back.v, 0)


@pytest.mark.parametrize("space", [SPHERICAL, HYPERBOLIC])
def test_lift_project_round_trip(space, rng):
    for _ in range(200):
        q = rng.uniform(-0.6, 0.6, 2)
        st = PhaseState(q, rng.normal(size=2))
        pair = lift_to_surface(st, space)
        k = space.curvature
        assert abs(ambient_form(pair.point, pair.point, k) - k) <= 1e-12
        assert abs(ambient_form(pair.point, pair.velocity, k)) <= 1e-12
        back = project_to_chart(pair, space)
        assert back.allclose(st, 1e-12)
    pair = lift_to_surface(PhaseState((0.3, -0.2), rng.normal(size=2)), space)
    assert project_to_chart(pair, space).allclose(PhaseState((0.3, -0.2), project_to_chart(pair, space).v))


def test_lift_kinetic_energy_matches_metric(rng):
    for space in (SPHERICAL, HYPERBOLIC):
        st = PhaseState(rng.uniform(-0.5, 0.5, 2), rng.normal(size=2))
        pair = lift_to_surface(st, space)
        amb = 0.5 * ambient_form(pair.velocity, pair.velocity, space.curvature) * space.curvature
        # sphere: positive-definite; hyperbolic: the (2,1) form restricted to the sheet
        assert abs(abs(amb) - kinetic_energy(st, space)) <= 1e-12


def test_chart_domain_guard():
    with pytest.raises(ChartDomainError):
        check_chart_domain(np.array([1.0, 0.0]), HYPERBOLIC)
    with pytest.raises(ChartDomainError):
        project_to_chart(ChartJacobianPair((1.0, 0.0, 0.0)), SPHERICAL)
    check_chart_domain(np.array([50.0, 0.0]), SPHERICAL)


@pytest.mark.parametrize(
    "v, n, expected", [((1, 0), (0, 1), (1, 0)), ((0, 1), (0, 1), (0, -1)), ((1, 1), (0, 1), (1, -1))]
)
def test_reflect_examples(v, n, expected):
    out = reflect_vector(PhaseState((0.2, 0.1), v), n, EUCLIDEAN)
    assert np.allclose(out.v, expected, atol=1e-15)


@pytest.mark.parametrize("space", [EUCLIDEAN, SPHERICAL, HYPERBOLIC])
def test_reflect_involution_and_energy(space, rng):
    for _ in range(200):
        st = PhaseState(rng.uniform(-0.5, 0.5, 2), rng.normal(size=2))
        n = rng.normal(size=2)
        once = reflect_vector(st, n, space)
        twice = reflect_vector(once, n, space)
        assert np.allclose(twice.v, st.v, rtol=0, atol=1e-13)
        assert abs(kinetic_energy(once, space) - kinetic_energy(st, space)) <= 1e-13 * (1 + kinetic_energy(st, space))
        assert np.array_equal(once.q, st.q) and once.t == st.t


def test_reflect_zero_normal():
    with pytest.raises(ValueError):
        reflect_vector(PhaseState((0, 0), (1, 0)), (0, 0), EUCLIDEAN)


def test_geodesic_distance_oracles():
    # sphere: angle between lifted unit vectors; hyperbolic: arccosh of -<X,Y>
    p, q = np.array([0.2, -0.1]), np.array([-0.3, 0.4])
    X = np.append(p, -1) / np.sqrt(1 + p @ p)
    Y = np.append(q, -1) / np.sqrt(1 + q @ q)
    assert geodesic_distance(p, q, SPHERICAL) == pytest.approx(math.acos(X @ Y), rel=1e-13)
    X = np.append(p, 1) / np.sqrt(1 - p @ p)
    Y = np.append(q, 1) / np.sqrt(1 - q @ q)
    assert geodesic_distance(p, q, HYPERBOLIC) == pytest.approx(math.acosh(X[2] * Y[2] - X[:2] @ Y[:2]), rel=1e-12)


def test_metric_symmetric_positive(rng):
    for space in (SPHERICAL, HYPERBOLIC):
        G = metric(rng.uniform(-0.5, 0.5, 2), space)
        assert np.allclose(G, G.T) and np.all(np.linalg.eigvalsh(G) > 0)


def test_flat_curved_round_trip(rng):
    for k in (1, -1):
        st = PhaseState(rng.uniform(-0.4, 0.4, 2), rng.normal(size=2))
        back = curved_to_flat(flat_to_curved(st, 0.3, k), 0.3, k)
        assert back.allclose(st, 1e-12)
