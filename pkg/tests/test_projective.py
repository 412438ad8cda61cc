import warnings

import numpy as np
import pytest
from hypothesis import given, settings

from quenchlab import (
    annealed_second_moment,
    bridge_norm_sq,
    bridge_sum_expectation,
    forward_mean,
    forward_second_moment,
    get_chain,
    past_norm_sq,
    poisson_oracle,
    sigma_sq,
    two_sided_single_norm_sq,
    validate_chain,
)
from quenchlab.errors import GuardExceeded, OracleUnavailable
from quenchlab.projective import (
    bridge_norm_sq_sequence,
    dyadic_grid,
    moment_path,
    power_and_cross,
)

from .conftest import chains


def test_forward_mean_lazy(lazy):
    np.testing.assert_allclose(forward_mean(lazy, 1), [0.5, -0.5], atol=1e-15)


def test_forward_second_moment_lazy(lazy):
    # paths from s0 over two steps: S_2 in {2, 0, 0, -2} w.p. 9/16, 3/16, 1/16, 3/16
    fm = forward_second_moment(lazy, 2)
    assert fm.m2[0] == pytest.approx(4 * 9 / 16 + 4 * 3 / 16, abs=1e-14)
    assert annealed_second_moment(lazy, 2) == pytest.approx(3.0, abs=1e-14)


def test_bridge_lazy_n2(lazy):
    b = bridge_sum_expectation(lazy, 2).b
    np.testing.assert_allclose(b, [[1.8, -1.0], [1.0, -1.8]], atol=1e-14)
    assert bridge_norm_sq(lazy, 2) == pytest.approx(2.4, abs=1e-14)


def test_past_and_two_sided_lazy(lazy, flip):
    assert past_norm_sq(lazy, 1) == pytest.approx(0.25, abs=1e-15)
    assert two_sided_single_norm_sq(lazy, 1) == pytest.approx(0.4, abs=1e-14)
    for k in (1, 2, 5, 16):
        assert two_sided_single_norm_sq(flip, k) == pytest.approx(1.0, abs=1e-14)


def test_iid_projections_vanish(iid):
    for n in (1, 3, 10):
        assert past_norm_sq(iid, n) == 0.0
        assert annealed_second_moment(iid, n) == pytest.approx(n, abs=1e-12)
    assert two_sided_single_norm_sq(iid, 3) == 0.0


@pytest.mark.parametrize("name, expected", [
    ("lazy-flip-0.25", 3.0), ("lazy-flip-0.1", 9.0), ("lazy-flip-0.4", 1.5),
    ("iid-pm1", 1.0), ("rotation-3", 2.0 / 3.0),
])
def test_sigma_sq_closed_forms(name, expected):
    spec = get_chain(name)
    s = sigma_sq(spec)
    assert s.method == "richardson"
    assert s.value == pytest.approx(expected, abs=1e-6)
    assert s.oracle_value == pytest.approx(expected, abs=1e-9)


def test_sigma_sq_flip_is_zero(flip):
    s = sigma_sq(flip)
    assert s.method == "oracle"
    assert s.value == pytest.approx(0.0, abs=1e-12)


def test_oracle_unavailable_for_reducible_chain():
    # two closed classes; a supplied pi makes the ChainSpec valid
    spec = validate_chain("ab", [[1.0, 0.0], [0.0, 1.0]], [1.0, -1.0], stationary=[0.5, 0.5])
    with pytest.warns(OracleUnavailable):
        assert poisson_oracle(spec) is None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert sigma_sq(spec, 64).method == "cesaro"


def test_horizon_guard(lazy):
    with pytest.raises(GuardExceeded):
        annealed_second_moment(lazy, 2**16 + 1)
    with pytest.raises(ValueError):
        forward_mean(lazy, -1)


def test_dyadic_grid():
    np.testing.assert_array_equal(dyadic_grid(20), [1, 2, 4, 8, 16])


def test_bridge_sequence_matches_doubling():
    spec = get_chain("birth-death-4")
    seq = bridge_norm_sq_sequence(spec, 40)
    for n in (1, 5, 17, 40):
        assert seq[n - 1] == pytest.approx(bridge_norm_sq(spec, n), rel=1e-11, abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(chains())
def test_contraction_chain(spec):
    # conditioning on less can only shrink the L2 norm
    for n in (1, 3, 8, 33):
        past = past_norm_sq(spec, n)
        bridge = bridge_norm_sq(spec, n)
        total = annealed_second_moment(spec, n)
        scale = max(total, 1.0)
        assert past <= bridge + 1e-9 * scale
        assert bridge <= total + 1e-9 * scale


@settings(max_examples=30, deadline=None)
@given(chains())
def test_tower_identity(spec):
    # averaging b_n over xi_n given xi_0 recovers E^x(S_n)
    n = 6
    be = bridge_sum_expectation(spec, n)
    np.testing.assert_allclose((be.power * be.b).sum(axis=1), forward_mean(spec, n),
                               atol=1e-11)


@settings(max_examples=25, deadline=None)
@given(chains())
def test_composition_is_associative(spec):
    P1, C1 = power_and_cross(spec, spec.observable, 5)
    P2, C2 = power_and_cross(spec, spec.observable, 7)
    P, C = power_and_cross(spec, spec.observable, 12)
    np.testing.assert_allclose(P1 @ P2, P, atol=1e-12)
    np.testing.assert_allclose(C1 @ P2 + P1 @ C2, C, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(chains())
def test_moment_path_matches_single_horizon(spec):
    m1, m2 = moment_path(spec, 20)
    fm = forward_second_moment(spec, 20)
    np.testing.assert_allclose(m1[20], fm.m1, atol=1e-11)
    np.testing.assert_allclose(m2[20], fm.m2, atol=1e-10)
