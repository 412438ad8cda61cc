"""
Exhaustive enumeration of weighted chain paths.

Only positive-weight paths are materialised.  Any conditional expectation on
a finite chain is then a weighted group mean over the path array, which
gives an oracle that shares no code with the matrix recursions in
:mod:`quenchlab.projective`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import ChainSpec
from .errors import TooLarge

PATH_GUARD = 10**7


@dataclass(frozen=True)
class PathSet:
    """Paths ``xi_0..xi_n`` (one per row) with stationary weights."""

    paths: np.ndarray
    weights: np.ndarray
    d: int

    @property
    def n(self) -> int:
        return self.paths.shape[1] - 1


def count_paths(spec: ChainSpec, n: int) -> int:
    """Exact number of positive-weight paths of length ``n`` (Python ints)."""
    adj = [[int(v > 0) for v in row] for row in spec.kernel]
    counts = [int(p > 0) for p in spec.stationary]
    for _ in range(n):
        counts = [sum(counts[x] * adj[x][y] for x in range(spec.d)) for y in range(spec.d)]
    return sum(counts)


def enumerate_paths(spec: ChainSpec, n: int, guard: int = PATH_GUARD) -> PathSet:
    """All positive-weight paths of ``n`` steps started from ``pi``.

    Raises
    ------
    TooLarge
        if the number of positive-weight paths exceeds ``guard``.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    total = count_paths(spec, n)
    if total > guard:
        raise TooLarge(f"{total} positive-weight paths of length {n} exceed guard {guard}")
    Q, pi = spec.kernel, spec.stationary
    dtype = np.int8 if spec.d < 127 else np.int32
    start = np.flatnonzero(pi > 0)
    paths = np.empty((total, n + 1), dtype=dtype)
    cur = start.astype(dtype)
    w = pi[start].copy()
    succ = [np.flatnonzero(Q[x] > 0) for x in range(spec.d)]
    deg = np.array([len(s) for s in succ])
    table = np.zeros((spec.d, max(deg.max(), 1)), dtype=np.int64)
    for x, s in enumerate(succ):
        table[x, :len(s)] = s
    prefix = cur[:, None]
    for _ in range(n):
        reps = deg[cur]
        parent = np.repeat(np.arange(len(cur)), reps)
        offsets = np.cumsum(reps) - reps
        slot = np.arange(len(parent)) - offsets[parent]
        nxt = table[cur[parent], slot].astype(dtype)
        w = w[parent] * Q[cur[parent], nxt]
        prefix = np.concatenate([prefix[parent], nxt[:, None]], axis=1)
        cur = nxt
    paths[:] = prefix
    return PathSet(paths=paths, weights=w, d=spec.d)


def group_mean(keys: np.ndarray, values: np.ndarray, weights: np.ndarray, size: int):
    """Weighted mean of ``values`` within each key; returns ``(mean, mass)``."""
    mass = np.bincount(keys, weights=weights, minlength=size)
    tot = np.bincount(keys, weights=weights * values, minlength=size)
    mean = np.zeros(size)
    np.divide(tot, mass, out=mean, where=mass > 0)
    return mean, mass


def partial_sums(spec: ChainSpec, ps: PathSet, n: int) -> np.ndarray:
    """``S_n`` along each path (uses the first ``n`` steps)."""
    f = spec.observable
    s = np.zeros(len(ps.weights))
    for i in range(1, n + 1):
        s += f[ps.paths[:, i]]
    return s


# --- brute-force versions of the projective quantities ---------------------

def brute_forward_moments(spec: ChainSpec, ps: PathSet, n: int):
    x0 = ps.paths[:, 0].astype(np.int64)
    s = partial_sums(spec, ps, n)
    m1, _ = group_mean(x0, s, ps.weights, spec.d)
    m2, _ = group_mean(x0, s * s, ps.weights, spec.d)
    return m1, m2


def brute_bridge(spec: ChainSpec, ps: PathSet, n: int):
    """``(b_n, mass)`` with ``mass(x, y) = P(xi_0 = x, xi_n = y)``."""
    d = spec.d
    key = ps.paths[:, 0].astype(np.int64) * d + ps.paths[:, n]
    s = partial_sums(spec, ps, n)
    b, mass = group_mean(key, s, ps.weights, d * d)
    return b.reshape(d, d), mass.reshape(d, d)


def brute_bridge_norm_sq(spec: ChainSpec, ps: PathSet, n: int) -> float:
    b, mass = brute_bridge(spec, ps, n)
    return float(np.sum(mass * b * b))


def brute_past_norm_sq(spec: ChainSpec, ps: PathSet, n: int) -> float:
    m1, _ = brute_forward_moments(spec, ps, n)
    return float(spec.stationary @ m1**2)


def brute_annealed(spec: ChainSpec, ps: PathSet, n: int) -> float:
    s = partial_sums(spec, ps, n)
    return float(np.sum(ps.weights * s * s))


def brute_two_sided(spec: ChainSpec, ps: PathSet, k: int) -> float:
    """``||E(X_k | xi_0, xi_{2k})||^2``, equal to the two-sided single norm by stationarity."""
    d = spec.d
    key = ps.paths[:, 0].astype(np.int64) * d + ps.paths[:, 2 * k]
    x_mid = spec.observable[ps.paths[:, k]]
    mean, mass = group_mean(key, x_mid, ps.weights, d * d)
    return float(np.sum(mass * mean * mean))
