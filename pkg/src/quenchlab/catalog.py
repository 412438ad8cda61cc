"""Built-in example chains.

Each entry notes which behaviour it exercises.  Names are part of the public
interface and stay stable.
"""

from __future__ import annotations

import numpy as np

from .chain import ChainSpec, validate_chain
from .errors import ChainLoadError


def _lazy_flip(a: float) -> ChainSpec:
    return validate_chain(["s0", "s1"], [[1 - a, a], [a, 1 - a]], [1.0, -1.0],
                          name=f"lazy-flip-{a:g}")


def _rotation3(hold: float = 0.5) -> ChainSpec:
    Q = hold * np.eye(3) + (1 - hold) * np.roll(np.eye(3), 1, axis=1)
    return validate_chain(["r0", "r1", "r2"], Q, [1.0, 0.0, -1.0], name="rotation-3")


def _cycle5() -> ChainSpec:
    d = 5
    Q = 0.5 * (np.roll(np.eye(d), 1, axis=1) + np.roll(np.eye(d), -1, axis=1))
    f = np.cos(2 * np.pi * np.arange(d) / d)
    return validate_chain([f"c{i}" for i in range(d)], Q, f, auto_center=True,
                          name="cycle-5")


def _birth_death(d: int = 4, up: float = 0.3, down: float = 0.4) -> ChainSpec:
    Q = np.zeros((d, d))
    for x in range(d):
        if x + 1 < d:
            Q[x, x + 1] = up
        if x > 0:
            Q[x, x - 1] = down
        Q[x, x] = 1.0 - Q[x].sum()
    return validate_chain([f"b{i}" for i in range(d)], Q, np.arange(d, dtype=float),
                          auto_center=True, name="birth-death-4")


_BUILDERS = {
    "iid-pm1": (lambda: validate_chain(["+1", "-1"], [[0.5, 0.5], [0.5, 0.5]], [1.0, -1.0],
                                       name="iid-pm1"),
                "independent fair signs; every projective quantity is trivial"),
    "lazy-flip-0.1": (lambda: _lazy_flip(0.1),
                      "strong positive correlation, rho = 0.8, sigma^2 = 9"),
    "lazy-flip-0.25": (lambda: _lazy_flip(0.25),
                       "reference chain, rho = 0.5, sigma^2 = 3"),
    "lazy-flip-0.4": (lambda: _lazy_flip(0.4),
                      "fast mixing, rho = 0.2, sigma^2 = 1.5"),
    "flip": (lambda: validate_chain(["s0", "s1"], [[0.0, 1.0], [1.0, 0.0]], [1.0, -1.0],
                                    name="flip"),
             "deterministic period-2 chain: not totally ergodic, sigma^2 = 0, "
             "two-sided single norms do not decay"),
    "rotation-3": (_rotation3,
                   "non-reversible 3-cycle with holding 1/2; aperiodic"),
    "cycle-5": (_cycle5,
                "simple random walk on an odd cycle: reversible, aperiodic"),
    "birth-death-4": (_birth_death,
                      "reversible birth-death chain; a natural test case for reversible-chain criteria"),
}


def catalog() -> list[str]:
    """Names of the built-in chains."""
    return list(_BUILDERS)


def describe(name: str) -> str:
    return _BUILDERS[name][1]


def get_chain(name: str) -> ChainSpec:
    try:
        builder = _BUILDERS[name][0]
    except KeyError:
        raise ChainLoadError(f"unknown catalog chain {name!r}; known: {', '.join(_BUILDERS)}")
    return builder()
