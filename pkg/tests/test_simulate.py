import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sepness import closed_forms as cf
from sepness import exact
from sepness import simulate as sim
from sepness.lattice import ParameterError, homogeneous_segment, standard_battery


def test_stream_determinism_and_independence():
    a = sim.RngStream(1, 0).generator().random(5)
    b = sim.RngStream(1, 0).generator().random(5)
    c = sim.RngStream(1, 1).generator().random(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    assert sim.RngStream(1, 0).child(3) == sim.RngStream(1, 0).child(3)
    assert sim.RngStream(1, 0).child(3) != sim.RngStream(1, 0).child(4)


def test_estimate_stderr_definition():
    x = np.array([1.0, 2.0, 4.0, 7.0])
    e = sim.McEstimate.from_samples(x)
    assert e.mean == pytest.approx(3.5)
    assert e.stderr == pytest.approx(x.std(ddof=1) / 2)
    assert e.half_width_99 == pytest.approx(2.5758293035489004 * e.stderr)
    with pytest.raises(ParameterError):
        sim.McEstimate.from_samples([1.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30),
       st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30),
       st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30))
def test_merge_is_pooled_and_associative(a, b, c):
    ea, eb, ec = (sim.McEstimate.from_samples(v) for v in (a, b, c))
    left = ea.merge(eb).merge(ec)
    right = ea.merge(eb.merge(ec))
    pooled = sim.McEstimate.from_samples(a + b + c)
    for e in (left, right):
        assert e.n_samples == pooled.n_samples
        assert e.mean == pytest.approx(pooled.mean, rel=1e-12, abs=1e-9)
        assert e.stderr == pytest.approx(pooled.stderr, rel=1e-9, abs=1e-9)


class _Const:
    def __call__(self, rng):
        return np.array([0.5, 0.5])


class _Normal:
    def __call__(self, rng):
        return rng.generator().normal(size=200)


def test_replicas_identical_outputs_zero_stderr():
    est = sim.run_replicas(_Const(), 2, sim.RngStream(0))
    assert est.stderr == 0.0 and est.mean == 0.5


def test_replicas_stderr_scaling():
    a = sim.run_replicas(_Normal(), 20, sim.RngStream(3))
    b = sim.run_replicas(_Normal(), 40, sim.RngStream(3))
    assert b.stderr / a.stderr == pytest.approx(1 / np.sqrt(2), rel=0.2)


def test_replicas_need_two():
    with pytest.raises(ParameterError):
        sim.run_replicas(_Const(), 1, sim.RngStream(0))


def test_replicas_threads_env(monkeypatch):
    monkeypatch.setenv("SEPNESS_THREADS", "2")
    a = sim.run_replicas(_Normal(), 4, sim.RngStream(8))
    monkeypatch.setenv("SEPNESS_THREADS", "1")
    b = sim.run_replicas(_Normal(), 4, sim.RngStream(8))
    assert a.mean == b.mean and a.stderr == b.stderr


def test_sep_equilibrium_density():
    g = homogeneous_segment(3, 1, 1, 0.3, 0.3)
    r = sim.simulate_sep(g, 0, 4000.0, sim.RngStream(11), [(1,), (2,), (3,)])
    for e in r.estimates:
        assert abs(e.mean - 0.3) < 4 * e.stderr


def test_sep_profile_and_pair_moment():
    g = homogeneous_segment(2, 1, 1, 0.2, 0.8)
    sd = exact.stationary_distribution(g)
    r = sim.simulate_sep(g, 0, 20000.0, sim.RngStream(12), [(1,), (2,), (1, 2)])
    targets = [sd.moment((1,)), sd.moment((2,)), float(cf.n_point_correlation(
        cf.CorrelationRequest((1, 2)), 3, 1, 1, 0.2, 0.8))]
    for e, t in zip(r.estimates, targets):
        assert abs(e.mean - t) < 4 * e.stderr


def test_sep_serialisation_and_log():
    g = homogeneous_segment(2, 1, 1, 0.2, 0.8)
    buf = io.StringIO()
    r = sim.simulate_sep(g, (1, 0), 50.0, sim.RngStream(1, 2), [(1,)], event_log=buf)
    d = json.loads(r.to_json())
    assert d["graph_hash"] == g.content_hash()
    assert (d["seed"], d["stream"], d["t_max"], d["burn_in"]) == (1, 2, 50.0, 10.0)
    assert set(d["observables"][0]) >= {"sites", "mean", "stderr", "n"}
    lines = buf.getvalue().splitlines()
    assert lines[0] == "time,event_type,site_from,site_to"
    assert len(lines) == r.n_events + 1
    t, kind, a, b = lines[1].split(",")
    assert kind in ("hop", "enter", "exit") and float(t) > 0


@pytest.mark.parametrize("t_max, burn", [(0.0, None), (-1.0, None), (10.0, 10.0)])
def test_sep_rejects_bad_times(t_max, burn):
    with pytest.raises(ParameterError):
        sim.simulate_sep(homogeneous_segment(2), 0, t_max, sim.RngStream(0), [(1,)], burn_in=burn)


@pytest.mark.parametrize("name, g", standard_battery())
def test_dual_conservation_every_event(name, g):
    draw = sim._Uniforms(sim.RngStream(4))
    start = tuple(range(1, g.n_sites + 1))
    for _ in range(50):
        s = sim.simulate_dual(g, start, draw, check_conservation=True)
        assert s.total == len(start) and s.bulk == 0


def test_dual_single_walker():
    g = homogeneous_segment(3)
    s = sim.dual_level_samples(g, (2,), 20000, sim.RngStream(5))
    e = sim.McEstimate.from_samples(s[:, 1])
    assert abs(e.mean - 2 / 4) < 4 * e.stderr


def test_dual_level_law_n3():
    s = sim.dual_level_samples(homogeneous_segment(2), (1, 2), 20000, sim.RngStream(6))
    e = sim.McEstimate.from_samples(s)
    assert np.all(e.z_score([1 / 6, 2 / 3, 1 / 6]) < 4)


def test_stirring_outcome_total():
    g = dict(standard_battery())["tree-5"]
    out = sim.simulate_stirring(g, sim.RngStream(7))
    assert sorted(out.destination) == [1, 2, 3, 4, 5]
    assert set(out.destination.values()) <= {0, g.N}


def test_stirring_weights_hetero_graph():
    g = dict(standard_battery())["hetero-3"]
    pats = sim.stirring_pattern_samples(g, 20000, sim.RngStream(8))
    onehot = np.eye(8)[pats]
    e = sim.McEstimate.from_samples(onehot)
    target = cf.mixture_weights(g).weights.astype(float)
    assert np.all(e.z_score(target) < 4)


def test_stirring_restriction_consistency():
    # labels {1, 3} inside a full run have the law of a run started from {1, 3}
    g = homogeneous_segment(3)
    full = sim.stirring_pattern_samples(g, 20000, sim.RngStream(9))
    sub = sim.stirring_pattern_samples(g, 20000, sim.RngStream(10), start=(1, 3))
    restrict = full & 0b101
    table = np.array([np.bincount(restrict, minlength=6)[[0, 1, 4, 5]],
                      np.bincount(sub, minlength=6)[[0, 1, 4, 5]]])
    assert stats.chi2_contingency(table)[1] > 0.01


def test_ninja_runs_absorb():
    labels, ninja = sim.simulate_ninja(5, (1, 2), 4, sim.RngStream(3))
    assert all(p in (0, 5) for p in labels) and ninja in (0, 5)


def test_ninja_rejects_forbidden():
    with pytest.raises(ParameterError):
        sim.simulate_ninja(4, (3,), 4, sim.RngStream(0))


def test_ninja_conditional_small():
    s = sim.ninja_samples(4, (1,), 3, 30000, sim.RngStream(13))
    E = s[:, 1] == 1
    e = sim.McEstimate.from_samples(s[E, 2])
    assert abs(e.mean - 0.5) < 4 * e.stderr
    assert np.array_equal(s[:, 3], s[:, 1] * s[:, 2])
