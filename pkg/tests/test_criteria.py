import numpy as np
import pytest

from quenchlab import catalog, get_chain, sigma_sq
from quenchlab.criteria import (
    check_conjrev,
    check_condpf,
    check_maxwell_woodroofe,
    check_mixingale,
    check_neglipf,
    check_quenched_moments,
    check_varsup,
    dyadic_table,
    fitted_exponent,
    series_verdict,
)


@pytest.fixture(scope="module")
def tables():
    return {name: dyadic_table(get_chain(name), 2**16) for name in catalog()}


def test_series_verdict_thresholds():
    assert series_verdict(-2.0) == "converges"
    assert series_verdict(-1.0) == "inconclusive"
    assert series_verdict(-0.5) == "diverges"


def test_fitted_exponent_power_law():
    n = 2.0 ** np.arange(12)
    assert fitted_exponent(n, 3 * n**-2.0) == pytest.approx(-2.0, abs=1e-12)
    assert fitted_exponent(n, np.zeros_like(n)) == float("-inf")


@pytest.mark.parametrize("name", catalog())
def test_lipschitz_conditions_hold(name, tables):
    spec = get_chain(name)
    assert check_varsup(spec, table=tables[name]).verdict == "holds"
    assert check_neglipf(spec, table=tables[name]).verdict == "holds"


def test_neglipf_needs_long_horizon_for_slow_chain():
    spec = get_chain("lazy-flip-0.1")
    assert check_neglipf(spec, 2**12).verdict == "fails"
    assert check_neglipf(spec, 2**16).verdict == "holds"


@pytest.mark.parametrize("name", [n for n in catalog() if n != "flip"])
def test_series_converge_on_mixing_chains(name, tables):
    spec = get_chain(name)
    t = tables[name]
    for check in (check_maxwell_woodroofe, check_conjrev, check_condpf):
        assert check(spec, table=t).verdict == "converges"
    assert check_mixingale(spec).verdict == "converges"


def test_flip_mixingale_diverges(flip):
    s = check_mixingale(flip)
    assert s.verdict == "diverges"
    np.testing.assert_allclose(s.terms, 1.0, atol=1e-14)


def test_iid_series_are_zero(iid):
    s = check_conjrev(iid, 2**10)
    assert np.all(s.terms == 0.0)
    assert s.verdict == "converges"


@pytest.mark.parametrize("name", catalog())
def test_quenched_moment_equivalence(name, tables):
    spec = get_chain(name)
    rep = check_quenched_moments(spec, 2**16, sigma_sq(spec).value, table=tables[name])
    assert rep.condition_a and rep.condition_b


def test_quenched_moments_detect_wrong_variance(lazy):
    rep = check_quenched_moments(lazy, 2**12, 2.0)
    assert not rep.condition_a


def test_small_horizon_rejected(lazy):
    with pytest.raises(ValueError):
        check_condpf(lazy, 4)
    with pytest.raises(ValueError):
        check_mixingale(lazy, 2)
