import json

import numpy as np
import pytest
from hypothesis import given, settings

from quenchlab import (
    catalog,
    describe,
    ergodicity_report,
    get_chain,
    kernel_power,
    load_chain,
    stationary_law,
    validate_chain,
)
from quenchlab.errors import (
    ChainLoadError,
    DimensionMismatch,
    InvalidStationary,
    NegativeEntry,
    NonStochasticRow,
    NoStationaryLaw,
    UncenteredObservable,
)

from .conftest import chains


def test_stationary_of_asymmetric_chain():
    pi = stationary_law([[0.6, 0.4], [0.6, 0.4]])
    np.testing.assert_allclose(pi, [0.6, 0.4], atol=1e-14)


def test_lazy_flip_is_totally_ergodic_and_reversible(lazy):
    rep = ergodicity_report(lazy)
    assert rep.irreducible and rep.period == 1 and rep.totally_ergodic and rep.reversible
    np.testing.assert_allclose(lazy.stationary, [0.5, 0.5])


def test_flip_has_period_two(flip):
    rep = ergodicity_report(flip)
    assert rep.irreducible
    assert rep.period == 2
    assert not rep.totally_ergodic


def test_rotation_is_not_reversible():
    rep = ergodicity_report(get_chain("rotation-3"))
    assert rep.totally_ergodic and not rep.reversible


def test_birth_death_is_reversible():
    assert ergodicity_report(get_chain("birth-death-4")).reversible


def test_iid_rows_equal_pi(iid):
    assert iid.d == 2
    for row in iid.kernel:
        np.testing.assert_allclose(row, iid.stationary, atol=1e-15)


@pytest.mark.parametrize("kernel, f, exc", [
    ([[0.5, 0.6], [0.5, 0.5]], [1, -1], NonStochasticRow),
    ([[1.5, -0.5], [0.5, 0.5]], [1, -1], NegativeEntry),
    ([[0.5, 0.5], [0.5, 0.5]], [1, -1, 0], DimensionMismatch),
    ([[0.5, 0.5, 0.0], [0.5, 0.5, 0.0]], [1, -1], DimensionMismatch),
    ([[0.5, 0.5], [0.5, 0.5]], [1, 0], UncenteredObservable),
    ([[1.0, 0.0], [0.0, 1.0]], [1, -1], NoStationaryLaw),
])
def test_validation_errors(kernel, f, exc):
    with pytest.raises(exc):
        validate_chain(["a", "b"], kernel, f)


def test_bad_supplied_stationary():
    with pytest.raises(InvalidStationary):
        validate_chain(["a", "b"], [[0.6, 0.4], [0.6, 0.4]], [1, -1], stationary=[0.5, 0.5])


def test_row_tolerance_boundary():
    validate_chain(["a", "b"], [[0.5, 0.5 + 5e-13], [0.5, 0.5]], [1, -1])
    with pytest.raises(NonStochasticRow):
        validate_chain(["a", "b"], [[0.5, 0.5 + 1e-11], [0.5, 0.5]], [1, -1])


def test_auto_center_shifts_observable():
    spec = validate_chain(["a", "b"], [[0.6, 0.4], [0.6, 0.4]], [1.0, 1.0], auto_center=True)
    np.testing.assert_allclose(spec.observable, [0.0, 0.0], atol=1e-15)


def test_reducible_chain_with_transient_state():
    # state 0 leaks into the closed class {1, 2}
    spec = validate_chain("abc", [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.0, 0.5, 0.5]],
                          [0.0, 1.0, -1.0])
    rep = ergodicity_report(spec)
    assert spec.stationary[0] == 0.0
    assert not rep.irreducible and not rep.totally_ergodic


def test_spec_arrays_are_read_only(lazy):
    with pytest.raises(ValueError):
        lazy.kernel[0, 0] = 1.0


def test_load_chain_round_trip(tmp_path, lazy):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(lazy.to_dict()))
    spec = load_chain(p)
    np.testing.assert_array_equal(spec.kernel, lazy.kernel)
    assert spec.name == lazy.name


def test_load_chain_errors(tmp_path):
    with pytest.raises(ChainLoadError):
        load_chain(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text('{"states": ["a"]}')
    with pytest.raises(ChainLoadError):
        load_chain(p)


def test_catalog_names_and_descriptions():
    names = catalog()
    assert {"iid-pm1", "lazy-flip-0.25", "flip", "rotation-3", "cycle-5",
            "birth-death-4"} <= set(names)
    for name in names:
        assert describe(name)
        assert get_chain(name).name == name
    with pytest.raises(ChainLoadError):
        get_chain("nope")


def _gcd_period(Q, x, horizon):
    from math import gcd

    g, P = 0, np.eye(len(Q))
    for m in range(1, horizon + 1):
        P = P @ Q
        if P[x, x] > 0:
            g = gcd(g, m)
    return g


@pytest.mark.parametrize("name", catalog())
def test_period_matches_return_times(name):
    spec = get_chain(name)
    assert ergodicity_report(spec).period == _gcd_period(spec.kernel, 0, 3 * spec.d**2)


@settings(max_examples=40, deadline=None)
@given(chains(sparse=True))
def test_powers_stay_stochastic_and_preserve_pi(spec):
    for n in (1, 2, 7, 64):
        P = kernel_power(spec, n)
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(spec.stationary @ P, spec.stationary, atol=1e-12)
    rep = ergodicity_report(spec)
    assert rep.irreducible and rep.period == 1
