from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from sepness.lattice import (AbgdParams, CapacityError, GraphSpec, ParameterError, decode, encode,
                             from_abgd, homogeneous_segment, mask_of, site_set, sites_of,
                             standard_battery, subsets_of, subsets_of_size, to_abgd, validate)


def test_segment_shape():
    g = homogeneous_segment(4, 2, 0.5, 0.1, 0.9)
    assert g.N == 5
    assert g.edges == ((1, 2, 1), (2, 3, 1), (3, 4, 1))
    assert g.is_homogeneous_segment()
    assert not g.is_homogeneous_segment(unit_boundary=True)
    assert validate(g) == []


def test_edges_normalised():
    g = GraphSpec(3, ((2, 1, 1.0), (3, 2, 2.0)), 1, 1, 0.5, 0.5)
    assert g.edges == ((1, 2, 1.0), (2, 3, 2.0))


@pytest.mark.parametrize("edges, msg", [
    (((1, 2, 1.0),), "not connected"),
    (((1, 2, 0.0), (2, 3, 1.0)), "non-positive conductance"),
    (((1, 2, 1.0), (2, 4, 1.0)), "outside"),
    (((1, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)), "self-loop"),
])
def test_validate_reports(edges, msg):
    g = GraphSpec(3, edges, 1, 1, 0.5, 0.5)
    assert any(msg in m for m in validate(g))
    with pytest.raises(ParameterError, match=msg):
        g.check()


@pytest.mark.parametrize("kw", [
    dict(omega_left=0), dict(omega_right=-1), dict(rho_left=0), dict(rho_right=1.0),
])
def test_segment_rejects_bad_reservoirs(kw):
    with pytest.raises(ParameterError):
        homogeneous_segment(3, **kw)


def test_json_round_trip():
    for _, g in standard_battery():
        assert GraphSpec.from_json(g.to_json()) == g
        assert GraphSpec.from_json(g.to_json()).content_hash() == g.content_hash()


def test_from_dict_malformed():
    with pytest.raises(ParameterError, match="malformed"):
        GraphSpec.from_dict({"n_sites": 2})


def test_hash_changes_with_content():
    a = homogeneous_segment(3, 1, 1, 0.2, 0.8)
    b = homogeneous_segment(3, 1, 1, 0.2, 0.7)
    assert a.content_hash() != b.content_hash()


def test_reversed_mirrors():
    g = GraphSpec(3, ((1, 2, 2.0), (2, 3, 0.5)), 1.5, 3.0, 0.2, 0.8)
    r = g.reversed()
    assert r.edges == ((1, 2, 0.5), (2, 3, 2.0))
    assert (r.omega_left, r.omega_right, r.rho_left, r.rho_right) == (3.0, 1.5, 0.8, 0.2)
    assert r.reversed() == g


def test_abgd_exact_values():
    g = from_abgd(3, AbgdParams(1, 2, 3, 4))
    assert g.rho_left == Fraction(1, 4)
    assert g.omega_left == Fraction(1, 4)
    assert g.rho_right == Fraction(4, 6)
    assert g.omega_right == Fraction(1, 6)


pos = st.floats(0.05, 20, allow_nan=False)


@given(pos, pos, pos, pos)
def test_abgd_round_trip(a, b, g, d):
    p = to_abgd(from_abgd(2, AbgdParams(a, b, g, d)))
    assert p.alpha == pytest.approx(a)
    assert p.beta == pytest.approx(b)
    assert p.gamma == pytest.approx(g)
    assert p.delta == pytest.approx(d)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=63))
def test_encode_decode_round_trip(eta):
    assert decode(encode(eta), len(eta)) == tuple(eta)


def test_encode_limits():
    with pytest.raises(CapacityError):
        encode([0] * 64)
    with pytest.raises(ParameterError):
        encode([0, 2])
    with pytest.raises(ParameterError):
        decode(8, 3)


@given(st.sets(st.integers(1, 40)))
def test_mask_sites_round_trip(s):
    assert sites_of(mask_of(s)) == tuple(sorted(s))


def test_subsets_order():
    assert list(subsets_of((1, 3))) == [(), (1,), (3,), (1, 3)]
    assert list(subsets_of_size((1, 2, 3), 2)) == [(1, 2), (1, 3), (2, 3)]


@given(st.sets(st.integers(1, 9), max_size=6))
def test_subsets_count_and_masks(s):
    subs = list(subsets_of(sorted(s)))
    assert len(subs) == 2 ** len(s)
    assert len(set(subs)) == len(subs)


def test_site_set_checks():
    assert site_set([3, 1]) == (1, 3)
    with pytest.raises(ParameterError, match="repeated"):
        site_set([1, 1])
    with pytest.raises(ParameterError, match="outside"):
        site_set([0, 2], 3)
