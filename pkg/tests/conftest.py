import numpy as np
import pytest
from hypothesis import strategies as st

from quenchlab import catalog, get_chain, validate_chain

SMALL = [name for name in catalog() if get_chain(name).d <= 4]


@pytest.fixture
def lazy():
    return get_chain("lazy-flip-0.25")


@pytest.fixture
def iid():
    return get_chain("iid-pm1")


@pytest.fixture
def flip():
    return get_chain("flip")


@st.composite
def chains(draw, d_min=2, d_max=4, sparse=False):
    """Random chains with positive diagonal (so aperiodic) and a centered observable."""
    d = draw(st.integers(d_min, d_max))
    raw = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=d * d, max_size=d * d)))
    Q = raw.reshape(d, d)
    if sparse:
        mask = np.array(draw(st.lists(st.booleans(), min_size=d * d, max_size=d * d)))
        Q = Q * mask.reshape(d, d)
        # keep a cycle so the chain stays irreducible
        Q[np.arange(d), (np.arange(d) + 1) % d] += 0.2
    Q[np.diag_indices(d)] += 0.05
    Q = Q / Q.sum(axis=1, keepdims=True)
    f = np.array(draw(st.lists(st.floats(-2.0, 2.0), min_size=d, max_size=d)))
    return validate_chain([f"x{i}" for i in range(d)], Q, f, auto_center=True, name="random")


# criterion id -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
