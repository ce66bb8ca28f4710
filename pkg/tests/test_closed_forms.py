import json
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sepness import closed_forms as cf
from sepness import exact
from sepness.lattice import (CapacityError, ParameterError, homogeneous_segment, mask_of,
                             standard_battery)


def test_harmonic_values():
    assert cf.harmonic_h(5, 1, 1, 0) == 0
    assert cf.harmonic_h(5, 1, 1, 3) == 3
    assert cf.harmonic_h(5, 1, 1, 5) == 5
    assert cf.harmonic_h(5, Fraction(1, 2), 2, 1) == 2
    assert cf.harmonic_h(5, Fraction(1, 2), 2, 5) == Fraction(2) + Fraction(1, 2) + 3


def test_product_formula_rational():
    # 1/4 * 1/3 * 1/2 on the unit segment with N = 4
    assert cf.absorption_product(4, 1, 1, (1, 2, 3)) == Fraction(1, 24)
    assert cf.absorption_product(3, 1, 1, (1, 2)) == Fraction(1, 6)
    assert cf.absorption_product(4, 1, 1, ()) == 1


def test_levels_rational():
    assert cf.absorption_levels(3, 1, 1, (1, 2)) == [Fraction(1, 6), Fraction(2, 3), Fraction(1, 6)]


def test_float_fallback_above_limit():
    v = cf.absorption_product(14, 1, 1, (3, 7))
    assert isinstance(v, float)
    assert v == pytest.approx(3 / 14 * 6 / 13)


@settings(max_examples=30, deadline=None)
@given(st.integers(3, 7), st.sampled_from([0.5, 1.0, 3.0]), st.sampled_from([0.5, 1.0, 2.0]),
       st.data())
def test_product_matches_exact(N, wl, wr, data):
    k = data.draw(st.integers(1, min(3, N - 1)))
    xs = tuple(sorted(data.draw(st.sets(st.integers(1, N - 1), min_size=k, max_size=k))))
    exact_v = exact.all_absorbed_at_N(homogeneous_segment(N - 1, wl, wr), xs)
    assert float(cf.absorption_product(N, wl, wr, xs)) == pytest.approx(exact_v, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 7), st.data())
def test_levels_sum_to_one(N, data):
    xs = tuple(sorted(data.draw(st.sets(st.integers(1, N - 1), min_size=1, max_size=N - 1))))
    levels = cf.absorption_levels(N, 1, 1, xs)
    assert sum(levels) == 1
    assert min(levels) >= 0


def test_levels_general_graph_oracle():
    g = dict(standard_battery())["cycle-chord-5"]
    table = exact.all_absorbed_table(g)
    oracle = lambda J: float(table[mask_of(J)])
    got = cf.absorption_levels(g.N, g.omega_left, g.omega_right, (1, 3, 4), all_at_n=oracle)
    np.testing.assert_allclose(got, exact.absorption_distribution(g, (1, 3, 4)).probs, atol=1e-12)


@pytest.mark.parametrize("name, g", standard_battery())
def test_mixture_weights_sum_and_sign(name, g):
    w = cf.mixture_weights(g)
    vals = np.array([float(v) for v in w.weights])
    assert vals.sum() == pytest.approx(1.0, abs=1e-12)
    assert vals.min() > 0


@pytest.mark.parametrize("name, g", standard_battery())
def test_mixture_equals_stationary(name, g):
    mu = cf.mixture_measure(g).probs
    pi = exact.stationary_distribution(g).probs
    np.testing.assert_allclose(mu, pi, atol=1e-12)


@pytest.mark.parametrize("name, g", standard_battery()[:5])
def test_mixture_methods_agree(name, g):
    a = cf.mixture_measure(g, method="direct").probs
    b = cf.mixture_measure(g, method="classes").probs
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_single_weight_matches_transform():
    g = homogeneous_segment(4, 0.5, 3)
    w = cf.mixture_weights(g)
    for I in [(), (2,), (1, 4), (1, 2, 3, 4)]:
        assert float(cf.mixture_weight(g, I)) == pytest.approx(w[I], abs=1e-15)


def test_weights_small_unit_segment():
    w = cf.mixture_weights(homogeneous_segment(2))
    np.testing.assert_array_equal(w.weights, [1 / 6, 1 / 6, 1 / 2, 1 / 6])


def test_mixture_weight_serialisation():
    w = cf.mixture_weights(homogeneous_segment(2))
    d = json.loads(w.to_json())
    assert d["n_sites"] == 2
    assert [e["sites"] for e in d["weights"]] == [[], [1], [2], [1, 2]]
    lines = w.to_csv().splitlines()
    assert lines[0] == "sites;F"
    assert lines[4].startswith("1,2;")


def test_mixture_method_checks():
    with pytest.raises(ParameterError):
        cf.mixture_measure(homogeneous_segment(2), method="nope")
    with pytest.raises(CapacityError):
        cf.mixture_measure(homogeneous_segment(21))


@pytest.mark.parametrize("wl, wr", [(1, 1), (0.5, 3)])
def test_density_profile(wl, wr):
    g = homogeneous_segment(4, wl, wr, 0.2, 0.8)
    sd = exact.stationary_distribution(g)
    for x in range(1, 5):
        assert float(cf.density_profile(g, x)) == pytest.approx(sd.moment((x,)), abs=1e-13)


def test_two_point_value():
    # unit conductances, N = 3, rho gap 0.6
    assert float(cf.two_point_correlation(3, 1, 1, 0.2, 0.8, 1, 2)) == pytest.approx(-0.02)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_two_point_matches_stationary(N):
    g = homogeneous_segment(N - 1, 0.5, 3, 0.2, 0.8)
    sd = exact.stationary_distribution(g)
    for x, y in combinations(range(1, N), 2):
        v = cf.two_point_correlation(N, 0.5, 3, 0.2, 0.8, x, y)
        assert float(v) == pytest.approx(sd.centered_moment((x, y)), abs=1e-12)
        assert float(v) < 0


@pytest.mark.parametrize("N, n", [(N, n) for N in (4, 5, 6) for n in (1, 2, 3, 4) if n < N])
def test_corrected_centered_matches_stationary(N, n):
    g = homogeneous_segment(N - 1, 3, 1, 0.1, 0.7)
    sd = exact.stationary_distribution(g)
    for pts in combinations(range(1, N), n):
        v = cf.centered_correlation(N, 3, 1, 0.1, 0.7, pts)
        assert float(v) == pytest.approx(sd.centered_moment(pts), abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_literal_and_corrected_differ_by_parity(n):
    N = 6
    pts = tuple(range(1, n + 1))
    lit = cf.n_point_correlation(cf.CorrelationRequest(pts, True), N, 1, 1, 0.2, 0.8)
    cor = cf.centered_correlation(N, 1, 1, 0.2, 0.8, pts)
    assert float(lit) == pytest.approx((-1) ** n * float(cor), abs=1e-15)


def test_three_point_sign_example():
    N, pts = 6, (1, 2, 4)
    sd = exact.stationary_distribution(homogeneous_segment(N - 1, 1, 1, 0.2, 0.8))
    assert sd.centered_moment(pts) > 0
    assert float(cf.centered_correlation(N, 1, 1, 0.2, 0.8, pts)) == pytest.approx(4e-4, abs=1e-12)


@pytest.mark.parametrize("N", [3, 5, 6])
def test_non_centered_matches_stationary(N):
    g = homogeneous_segment(N - 1, 0.5, 3, 0.3, 0.6)
    sd = exact.stationary_distribution(g)
    for n in range(1, N):
        for pts in combinations(range(1, N), n):
            v = cf.n_point_correlation(cf.CorrelationRequest(pts), N, 0.5, 3, 0.3, 0.6)
            assert float(v) == pytest.approx(sd.moment(pts), abs=1e-12)


def test_psi_equal_densities_vanish():
    v = cf.n_point_correlation(cf.CorrelationRequest((1, 3), True), 5, 1, 1, 0.4, 0.4)
    assert v == 0


@pytest.mark.parametrize("name, g", standard_battery())
def test_moment_general(name, g):
    sd = exact.stationary_distribution(g)
    pts = tuple(range(1, min(3, g.n_sites) + 1))
    assert float(cf.moment_general(g, pts)) == pytest.approx(sd.moment(pts), abs=1e-12)


def test_correlation_request_validates():
    with pytest.raises(ParameterError, match="increasing"):
        cf.CorrelationRequest((2, 1))
    with pytest.raises(ParameterError):
        cf.CorrelationRequest(())


@pytest.mark.parametrize("N, xs", [(4, (1, 3)), (6, (2, 3, 5)), (7, (1, 2, 3, 6)), (5, (4,))])
def test_recursion_residual(N, xs):
    res, lhs, rhs = cf.ninja_recursion_residual(N, xs)
    assert res < 1e-12
    assert lhs == pytest.approx(float(cf.absorption_product(N, 1, 1, xs)), abs=1e-12)


def test_recursion_rejects_non_unit():
    with pytest.raises(ParameterError):
        cf.ninja_recursion_residual(5, (1, 2), omega_left=2)
