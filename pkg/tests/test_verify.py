import pytest

from sepness import verify as vf


def test_check_record():
    c = vf.Check("x", 1e-13, 1e-12)
    assert c.passed and c.to_dict() == {"name": "x", "residual": 1e-13, "tolerance": 1e-12, "pass": True}
    assert not vf.Check("y", 1.0, 1e-12).passed


@pytest.mark.parametrize("suite", ["duality", "mixture"])
def test_clean_suites(suite):
    checks = vf.run_suite(suite)
    assert checks and all(c.passed for c in checks)


def test_martingale_suite_rates_rule_passes_everywhere():
    assert all(c.passed for c in vf.martingale_suite(rule="rates"))


def test_martingale_suite_localises_failures():
    failed = {c.name.split("/")[1] for c in vf.martingale_suite() if not c.passed}
    assert failed == {"N3"}


def test_corrected_correlations_pass():
    checks = vf.correlation_checks(max_N=6, max_points=4, corrected=True)
    assert all(c.passed for c in checks)


def test_unknown_suite():
    with pytest.raises(ValueError):
        vf.run_suite("nope")
