import math

import numpy as np
import pytest
from scipy.optimize import brentq

from secularbilliards.errors import RegionError
from secularbilliards.flow import fd_gradient, poisson_bracket_fd
from secularbilliards.geometry import EUCLIDEAN, SPHERICAL, PhaseState
from secularbilliards.model import ModelParams, integral_D, kepler_energy, kepler_first_integrals
from secularbilliards.secular import (
    AveragedSystem,
    OrbitElements,
    averaged_hamiltonian,
    averaged_secondary_potential,
    averaged_vector_field,
    convergence_table,
    element_rates,
    elements_to_state,
    reduced_secular_field,
    solve_kepler,
    state_to_elements,
)

H_FLAT = 0.3
A_FLAT = H_FLAT / math.sqrt(1 - H_FLAT**2)  # h = a / sqrt(1 + a^2) = 0.3


def test_solve_kepler_examples():
    assert solve_kepler(0.0, 0.7) == 0.0
    assert solve_kepler(math.pi / 3, 0.0) == pytest.approx(math.pi / 3, abs=1e-15)
    oracle = brentq(lambda E: E - 0.5 * math.sin(E) - 1.0, 0, math.pi, xtol=1e-15)
    assert solve_kepler(1.0, 0.5) == pytest.approx(oracle, abs=1e-14)
    assert solve_kepler(1.0, 0.5) == pytest.approx(1.49870, abs=1e-5)


def test_solve_kepler_residual_and_vectorized(rng):
    ell = rng.uniform(-10, 10, 10000)
    e = rng.uniform(0, 0.99, 10000)
    E = solve_kepler(ell, e)
    assert np.max(np.abs(E - e * np.sin(E) - ell)) <= 1e-14 * 10
    with pytest.raises(ValueError):
        solve_kepler(0.3, 1.0)


def test_elements_examples():
    el = state_to_elements((1, 0, 0, 1), 1.0)
    assert el.Lambda == pytest.approx(1.0) and abs(el.k) < 1e-15 and abs(el.h_e) < 1e-15
    el = state_to_elements((1, 0, 0, 1.1), 1.0)
    C, A = kepler_first_integrals((1, 0, 0, 1.1), 1.0)
    assert el.e == pytest.approx(np.linalg.norm(A), rel=1e-14)
    assert el.k == pytest.approx(0.21, rel=1e-13) and abs(el.h_e) < 1e-15


def test_elements_region_errors():
    with pytest.raises(RegionError):
        state_to_elements((1, 0, 0, 1.5), 1.0)
    with pytest.raises(RegionError):
        state_to_elements((1, 0, 0.3, 0.0), 1.0)


def test_elements_round_trip(rng):
    worst = 0.0
    for _ in range(1000):
        el = OrbitElements(rng.uniform(0.5, 2), *(rng.uniform(-0.65, 0.65, 2)), rng.uniform(0, 2 * np.pi),
                           int(rng.choice([-1, 1])))
        st = elements_to_state(el, 1.3)
        back = state_to_elements(st.as_array(), 1.3)
        st2 = elements_to_state(back, 1.3)
        worst = max(worst, np.max(np.abs(st2.as_array() - st.as_array())))
        assert back.orientation == el.orientation
    assert worst <= 1e-10


def test_averaged_linear_and_zero(rng):
    el = OrbitElements(0.9, 0.2, -0.1)
    p = ModelParams(1.0, 0.0, 0.0, A_FLAT)
    assert averaged_secondary_potential(el, AveragedSystem(p)) == 0.0
    v1 = averaged_secondary_potential(el, AveragedSystem(p.with_(m2=0.1, f=0.05)))
    v2 = averaged_secondary_potential(el, AveragedSystem(p.with_(m2=0.2, f=0.1)))
    assert v2 == pytest.approx(2 * v1, rel=1e-12)


def test_averaged_far_field():
    # circle of radius 0.1 about the primary, secondary at distance 2h = 1
    a = 0.5 / math.sqrt(0.75)
    p = ModelParams(1.0, 1.0, 0.0, a)
    el = OrbitElements(math.sqrt(0.1), 0.0, 0.0)
    val = averaged_secondary_potential(el, AveragedSystem(p))
    assert val == pytest.approx(-1.0, rel=3e-3)
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    oracle = np.mean(-1.0 / np.hypot(0.1 * np.cos(th), 0.1 * np.sin(th) + 1.0))
    assert val == pytest.approx(oracle, abs=1e-12)


def test_averaged_hooke_circle():
    # Hooke center at (0, -h); the mean of |q - hooke|^2 over a circle of radius R is R^2 + h^2
    p = ModelParams(1.0, 0.0, 0.7, A_FLAT)
    R = 0.6
    el = OrbitElements(math.sqrt(R), 0.0, 0.0)
    assert averaged_secondary_potential(el, AveragedSystem(p)) == pytest.approx(0.7 * (R * R + H_FLAT**2), rel=1e-13)


def test_averaged_eccentric_oracle():
    # independent oracle: trapezoid in mean anomaly with a separate Kepler solve
    p = ModelParams(1.0, 0.1, 0.0, 1.0)
    el = OrbitElements(0.8, 0.3, 0.2)
    a_s, e, g = el.semi_major_axis(1.0), el.e, el.g
    ell = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    E = np.array([brentq(lambda x: x - e * math.sin(x) - m, -10, 10, xtol=1e-15) for m in ell])
    px, py = a_s * (np.cos(E) - e), a_s * math.sqrt(1 - e * e) * np.sin(E)
    x, y = px * math.cos(g) - py * math.sin(g), px * math.sin(g) + py * math.cos(g)
    oracle = np.mean(-0.1 / np.hypot(x, y + 2 * p.h))
    assert averaged_secondary_potential(el, AveragedSystem(p)) == pytest.approx(oracle, abs=1e-12)


def test_averaged_hamiltonian_examples():
    p = ModelParams(1.0, 0.1, 0.0, 1.0)
    st = PhaseState((0.6, 0.1), (-0.2, 1.1))
    assert averaged_hamiltonian(st, AveragedSystem(p.with_(m2=0.0))) == kepler_energy(st, 1.0)
    el = state_to_elements(st.as_array(), 1.0)
    vals = [averaged_hamiltonian(elements_to_state(el, 1.0, ell), AveragedSystem(p)) for ell in (0.3, 2.0, 4.5)]
    assert max(vals) - min(vals) <= 1e-10
    assert vals[0] == pytest.approx(kepler_energy(st, 1.0) + averaged_secondary_potential(el, AveragedSystem(p)),
                                    abs=1e-12)


def test_exclusion():
    # orbit through the secondary center
    p = ModelParams(1.0, 0.1, 0.0, A_FLAT)
    el = OrbitElements(math.sqrt(0.6), 0.0, 0.0)
    with pytest.raises(RegionError, match="excluded"):
        averaged_secondary_potential(el, AveragedSystem(p))


def test_curved_average_two_methods():
    p = ModelParams(1.0, 0.1, 0.0, 0.3, SPHERICAL)
    el = state_to_elements((0.0, 0.8, -1.2247, 0.0), 1.0)
    q = averaged_secondary_potential(el, AveragedSystem(p), SPHERICAL)
    t = averaged_secondary_potential(el, AveragedSystem(p), SPHERICAL, method="integrate")
    assert q == pytest.approx(t, abs=1e-8)


def test_quadrature_doubling():
    p = ModelParams(1.0, 0.1, 0.0, A_FLAT)
    el = OrbitElements(1.0, 0.0, 0.5)
    rows = convergence_table(el, AveragedSystem(p), nodes=(8, 16, 32, 64), reference_nodes=8192)
    errs = [r[2] for r in rows]
    for e0, e1 in zip(errs, errs[1:]):
        if e0 > 1e-13:
            assert e0 / max(e1, 1e-16) >= 10
    assert errs[-1] <= 1e-13


def test_averaged_field_without_perturbation():
    from secularbilliards.flow import SystemSelector, vector_field

    p = ModelParams(1.0, 0.0, 0.0, 1.0)
    st = PhaseState((0.6, 0.1), (-0.2, 1.1))
    dq, dv = averaged_vector_field(st, AveragedSystem(p))
    kq, kv = vector_field(SystemSelector("kepler", EUCLIDEAN, p), st)
    assert np.allclose(dq, kq, atol=1e-8) and np.allclose(dv, kv, atol=1e-8)


def random_R_state(rng):
    while True:
        el = OrbitElements(rng.uniform(0.9, 1.2), *(rng.uniform(-0.5, 0.5, 2)), rng.uniform(0, 2 * np.pi))
        st = elements_to_state(el, 1.0)
        # keep the orbit clear of the secondary at (0, -0.6)
        ell = np.linspace(0, 2 * np.pi, 64)
        pts = np.array([elements_to_state(el, 1.0, x).q for x in ell])
        if np.min(np.hypot(pts[:, 0], pts[:, 1] + 0.6)) > 0.2:
            return st


def test_reduced_field_matches_full(rng):
    asys = AveragedSystem(ModelParams(1.0, 0.1, 0.0, A_FLAT))
    for _ in range(5):
        st = random_R_state(rng)
        el = state_to_elements(st.as_array(), 1.0)
        full = element_rates(st, asys)
        red = reduced_secular_field(el.Lambda, el.k, el.h_e, asys, el.orientation)
        assert np.allclose(full, red, atol=1e-6)


def test_D_constant_along_averaged_field(rng):
    asys = AveragedSystem(ModelParams(1.0, 0.1, 0.0, A_FLAT))
    for _ in range(10):
        st = random_R_state(rng)
        dq, dv = averaged_vector_field(st, asys)
        g = fd_gradient(lambda Y: np.array([integral_D(y, asys.params) for y in Y]), st.as_array())
        assert abs(g @ np.concatenate([dq, dv])) <= 1e-6


def test_zero_average_of_brackets():
    el = OrbitElements(1.0, 0.3, 0.1)
    F = lambda y: y[0] ** 3 + y[1] * y[2] - 0.5 * y[3] ** 2  # noqa: E731
    Ek = lambda y: kepler_energy(y, 1.0)  # noqa: E731
    ells = np.linspace(0, 2 * np.pi, 256, endpoint=False)
    vals = [poisson_bracket_fd(Ek, F, elements_to_state(el, 1.0, x).as_array()) for x in ells]
    assert abs(np.mean(vals)) <= 1e-8
