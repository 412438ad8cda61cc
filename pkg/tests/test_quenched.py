import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quenchlab import annealed_second_moment, forward_second_moment, get_chain
from quenchlab.errors import DegenerateMismatch
from quenchlab.quenched import (
    SimConfig,
    ks_distance,
    ks_tolerance,
    martingale_clt_check,
    quenched_clt_check,
    simulate_sums,
    uniform_integrability_diag,
)


def test_ks_tolerance():
    assert ks_tolerance(10_000) == pytest.approx(0.0336)


@pytest.mark.parametrize("kwargs", [
    dict(n=10, replicas=50), dict(n=0), dict(n=2**17), dict(n=10, seed=-1),
    dict(n=10, block_m=11),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_ks_distance_degenerate():
    assert ks_distance(np.zeros(100), 0.0) == 0.0
    with pytest.warns(DegenerateMismatch):
        assert ks_distance(np.r_[np.zeros(90), np.ones(10)], 0.0) == pytest.approx(0.1)


def test_ks_distance_normal_samples():
    x = np.random.default_rng(1).normal(0, 2, 20_000)
    assert ks_distance(x, 4.0) < 0.015
    assert ks_distance(x, 1.0) > 0.1


def test_starts_by_label_and_stationary(lazy):
    (a,) = simulate_sums(lazy, SimConfig(n=16, replicas=200, start="s1"))
    assert a.start == 1 and np.all(a.first == 1)
    (b,) = simulate_sums(lazy, SimConfig(n=16, replicas=200, start="stationary"))
    assert b.start == -1 and set(np.unique(b.first)) <= {0, 1}
    with pytest.raises(ValueError):
        simulate_sums(lazy, SimConfig(n=16, replicas=200, start="zz"))


def test_flip_sums_are_deterministic(flip):
    for ss in simulate_sums(flip, SimConfig(n=64, replicas=200)):
        assert np.all(ss.sums == 0.0)
    (odd,) = simulate_sums(flip, SimConfig(n=5, replicas=200, start=0))
    assert np.allclose(odd.sums, -1 / np.sqrt(5))


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 2**63), st.sampled_from([2, 3, 7]))
def test_worker_count_does_not_change_samples(seed, workers):
    spec = get_chain("rotation-3")
    cfg = SimConfig(n=33, replicas=1100, seed=seed, block_m=4)
    a = simulate_sums(spec, cfg, centered=True, workers=1)
    b = simulate_sums(spec, cfg, centered=True, workers=workers)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.sums, y.sums)
        np.testing.assert_array_equal(x.centered, y.centered)
        np.testing.assert_array_equal(x.martingale, y.martingale)


def test_seeds_differ(lazy):
    (a,) = simulate_sums(lazy, SimConfig(n=32, replicas=200, seed=1, start=0))
    (b,) = simulate_sums(lazy, SimConfig(n=32, replicas=200, seed=2, start=0))
    assert not np.array_equal(a.sums, b.sums)


def test_second_moment_within_standard_errors():
    spec = get_chain("birth-death-4")
    n = 50
    cfg = SimConfig(n=n, replicas=5000, seed=11)
    exact = forward_second_moment(spec, n).m2 / n
    for ss in simulate_sums(spec, cfg):
        sq = ss.sums**2
        se = sq.std(ddof=1) / np.sqrt(len(sq))
        assert abs(sq.mean() - exact[ss.start]) <= 4 * se
    (st_,) = simulate_sums(spec, SimConfig(n=n, replicas=5000, seed=11, start="stationary"))
    sq = st_.sums**2
    se = sq.std(ddof=1) / np.sqrt(len(sq))
    assert abs(sq.mean() - annealed_second_moment(spec, n) / n) <= 4 * se


def test_quenched_report_lazy(lazy):
    rep = quenched_clt_check(lazy, SimConfig(n=512, replicas=4000, seed=5), 3.0)
    assert rep.passed and rep.centered_passed
    assert rep.annealed is not None and rep.annealed.passed
    assert rep.ui_table.shape == (2, 5)


def test_quenched_report_flags_wrong_variance(lazy):
    rep = quenched_clt_check(lazy, SimConfig(n=512, replicas=4000, seed=5), 1.0,
                             annealed=False, centered=False)
    assert not rep.passed


def test_ui_table_monotone_in_M(lazy):
    ui = uniform_integrability_diag(lazy, 0, [64, 256], [1.0, 4.0, 16.0, 64.0], R=2000,
                                    seed=2, sigma_sq=3.0)
    assert np.all(np.diff(ui.table, axis=1) <= 0)
    assert ui.passed


def test_martingale_clt(lazy):
    rows = martingale_clt_check(lazy, 2, SimConfig(n=1024, replicas=4000, seed=9), 0.3)
    assert all(r.passed for r in rows)
