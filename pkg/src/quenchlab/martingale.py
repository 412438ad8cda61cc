"""
Block martingale decomposition conditioned on past and future.

For a block size ``m`` and ``u`` blocks, along any path

    Y_k = X_{km+1} + ... + X_{(k+1)m}
    Z_k = b_m(xi_{km}, xi_{(k+1)m}) / sqrt(m)
    D_k = Y_k / sqrt(m) - Z_k

so ``S_{um} / sqrt(m) = M_u + R_u`` with ``M_u = sum D_k`` and
``R_u = sum Z_k``.  The ``D_k`` are martingale differences for the natural
filtration and ``M_u``, ``R_u`` are orthogonal given ``(xi_0, xi_n)``.  This
module checks those facts exactly by path enumeration, computes the
residual decay of ``R_u`` and evaluates the two dyadic weak-L1 bounds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chain import ChainSpec, kernel_power, validate_chain
from .errors import TooLarge
from .paths import PathSet, enumerate_paths, group_mean
from .projective import (
    annealed_second_moment,
    bridge_norm_sq,
    bridge_norm_sq_sequence,
    bridge_sum_expectation,
    check_horizon,
    dyadic_power_cross,
    moment_path,
)

PAIR_STATE_GUARD = 1024


@dataclass(frozen=True)
class BlockScheme:
    m: int
    u: int
    n: int

    @classmethod
    def for_horizon(cls, n: int, m: int) -> "BlockScheme":
        if m < 1:
            raise ValueError("block size m must be >= 1")
        return cls(m=m, u=n // m, n=n)


@dataclass(frozen=True)
class BlockDecomposition:
    """Per-path block variables; rows index paths, columns index blocks."""

    scheme: BlockScheme
    Y: np.ndarray
    D: np.ndarray
    Z: np.ndarray
    M: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class WeakNormValue:
    value: float
    achieved_at: float


@dataclass(frozen=True)
class IdentityResidual:
    """Residuals of ``E((M+R)^2) - E(M^2) - E(R^2)`` and of the path identity."""

    per_state: np.ndarray
    conditional_max: float
    path_identity_max: float

    @property
    def max(self) -> float:
        return float(max(self.per_state.max(initial=0.0), self.conditional_max))


@dataclass(frozen=True)
class ResidualDecay:
    m_grid: np.ndarray
    u: int
    values: np.ndarray
    per_state: np.ndarray
    stderr: Optional[np.ndarray]
    provenance: str


@dataclass(frozen=True)
class Lemma2Result:
    N: int
    lhs: float
    rhs: float
    holds: bool
    sup_per_state: np.ndarray
    cross_terms: np.ndarray
    dyadic_terms: np.ndarray
    tail_estimate: float


@dataclass(frozen=True)
class Lemma3Result:
    m: int
    N: int
    lhs: float
    second_moment: float
    rhs_series: float
    empirical_constant: float


def _as_paths(path) -> np.ndarray:
    arr = np.asarray(path)
    return arr[None, :] if arr.ndim == 1 else arr


def decompose_paths(spec: ChainSpec, paths, m: int, u: Optional[int] = None,
                    bridge: Optional[np.ndarray] = None) -> BlockDecomposition:
    """Vectorised block decomposition over an array of paths."""
    paths = _as_paths(paths)
    n = paths.shape[1] - 1
    scheme = BlockScheme.for_horizon(n, m) if u is None else BlockScheme(m=m, u=u, n=u * m)
    if scheme.u * m > n:
        raise ValueError(f"paths of length {n} are shorter than u*m = {scheme.u * m}")
    b = bridge_sum_expectation(spec, m).b if bridge is None else bridge
    f = spec.observable
    root = np.sqrt(m)
    rows = paths.shape[0]
    Y = np.zeros((rows, scheme.u))
    Z = np.zeros((rows, scheme.u))
    for k in range(scheme.u):
        lo, hi = k * m, (k + 1) * m
        Y[:, k] = f[paths[:, lo + 1:hi + 1]].sum(axis=1)
        Z[:, k] = b[paths[:, lo], paths[:, hi]] / root
    D = Y / root - Z
    return BlockDecomposition(scheme=scheme, Y=Y, D=D, Z=Z, M=D.sum(axis=1), R=Z.sum(axis=1))


def block_decompose(spec: ChainSpec, path: Sequence[int], m: int) -> BlockDecomposition:
    """Block variables of a single path ``xi_0..xi_n`` (state indices)."""
    return decompose_paths(spec, np.asarray(path, dtype=np.int64), m)


def _enumerated(spec: ChainSpec, n: int, paths: Optional[PathSet]) -> PathSet:
    if paths is None:
        return enumerate_paths(spec, n)
    if paths.n < n:
        raise ValueError(f"need paths of length >= {n}, got {paths.n}")
    return paths


def _prefix_keys(paths: np.ndarray, upto: int, d: int) -> np.ndarray:
    key = np.zeros(paths.shape[0], dtype=np.int64)
    for i in range(upto + 1):
        key = key * d + paths[:, i]
    return np.unique(key, return_inverse=True)[1].ravel()


def verify_martingale_property(spec: ChainSpec, m: int, u: int,
                               paths: Optional[PathSet] = None) -> float:
    """Largest ``|E(D_k | xi_0..xi_{km})|`` over blocks and positive-mass histories."""
    ps = _enumerated(spec, u * m, paths)
    dec = decompose_paths(spec, ps.paths, m, u=u)
    worst = 0.0
    for k in range(u):
        keys = _prefix_keys(ps.paths, k * m, spec.d)
        mean, mass = group_mean(keys, dec.D[:, k], ps.weights, int(keys.max()) + 1)
        worst = max(worst, float(np.abs(mean[mass > 0]).max()))
    return worst


def verify_orthogonality_identity(spec: ChainSpec, m: int, u: int, n: Optional[int] = None,
                                  paths: Optional[PathSet] = None) -> IdentityResidual:
    """Pythagoras for ``S_u(m) = M_u + R_u`` given ``xi_0`` and given ``(xi_0, xi_n)``.

    ``n`` defaults to ``u*m``; larger values condition on a later endpoint.
    """
    n = u * m if n is None else n
    if n < u * m:
        raise ValueError("n must be >= u*m")
    ps = _enumerated(spec, n, paths)
    dec = decompose_paths(spec, ps.paths, m, u=u)
    total = dec.M + dec.R
    f = spec.observable
    s_um = f[ps.paths[:, 1:u * m + 1]].sum(axis=1)
    identity = float(np.abs(s_um / np.sqrt(m) - total).max(initial=0.0))

    d = spec.d
    x0 = ps.paths[:, 0].astype(np.int64)
    parts = [group_mean(x0, v, ps.weights, d)[0] for v in (total**2, dec.M**2, dec.R**2)]
    per_state = np.abs(parts[0] - parts[1] - parts[2])

    key = x0 * d + ps.paths[:, n]
    cond = [group_mean(key, v, ps.weights, d * d) for v in (total**2, dec.M**2, dec.R**2)]
    mass = cond[0][1]
    gap = np.abs(cond[0][0] - cond[1][0] - cond[2][0])[mass > 0]
    return IdentityResidual(per_state=per_state, conditional_max=float(gap.max(initial=0.0)),
                            path_identity_max=identity)


def martingale_variance(spec: ChainSpec, m: int) -> float:
    """``E(D_0^2) = (E S_m^2 - ||E(S_m | xi_0, xi_m)||^2) / m``."""
    m = check_horizon(m)
    v = (annealed_second_moment(spec, m) - bridge_norm_sq(spec, m)) / m
    return max(v, 0.0)


def pair_chain(spec: ChainSpec, m: int) -> ChainSpec:
    """Chain of block endpoints ``eta = (xi_{lm}, xi_{(l+1)m})`` with ``V = b_m / sqrt(m)``.

    State ``(x, y)`` has index ``x*d + y``.
    """
    d = spec.d
    if d * d > PAIR_STATE_GUARD:
        raise TooLarge(f"paired chain would have {d * d} states (limit {PAIR_STATE_GUARD})")
    Pm = kernel_power(spec, m)
    b = bridge_sum_expectation(spec, m).b
    K = np.zeros((d * d, d * d))
    for x in range(d):
        for y in range(d):
            K[x * d + y, y * d:(y + 1) * d] = Pm[y]
    pi = (spec.stationary[:, None] * Pm).ravel()
    pi = pi / pi.sum()
    V = (b / np.sqrt(m)).ravel()
    V = V - pi @ V
    labels = [f"({spec.states[x]},{spec.states[y]})" for x in range(d) for y in range(d)]
    return validate_chain(labels, K, V, stationary=pi, name=f"{spec.name}-pair-m{m}")


def residual_second_moment(spec: ChainSpec, m: int, u: int) -> np.ndarray:
    """Exact ``E^x(R_u(m)^2)`` for every start state, through the paired chain."""
    if u < 1:
        raise ValueError("u must be >= 1")
    d = spec.d
    pair = pair_chain(spec, m)
    V = pair.observable
    if u > 1:
        m1, m2 = moment_path(pair, u - 1)
        a1, a2 = m1[u - 1], m2[u - 1]
    else:
        a1 = a2 = np.zeros(d * d)
    per_pair = V * V + 2 * V * a1 + a2
    Pm = kernel_power(spec, m)
    return (Pm * per_pair.reshape(d, d)).sum(axis=1)


def residual_decay(spec: ChainSpec, m_grid: Sequence[int], u: int, mode: str = "exact",
                   replicas: int = 10_000, seed: int = 0) -> ResidualDecay:
    """Table of ``(1/u) max_x E^x(R_u(m)^2)`` over block sizes.

    ``mode`` is ``"exact"`` (paired-chain recursion), ``"enumerate"`` (path
    enumeration; raises TooLarge beyond the guard) or ``"monte_carlo"``.
    """
    m_grid = np.asarray(list(m_grid), dtype=int)
    per_state = np.zeros((len(m_grid), spec.d))
    stderr = None
    if mode == "exact":
        for i, m in enumerate(m_grid):
            per_state[i] = residual_second_moment(spec, int(m), u) / u
    elif mode == "enumerate":
        for i, m in enumerate(m_grid):
            ps = enumerate_paths(spec, int(m) * u)
            dec = decompose_paths(spec, ps.paths, int(m), u=u)
            x0 = ps.paths[:, 0].astype(np.int64)
            mean, _ = group_mean(x0, dec.R**2, ps.weights, spec.d)
            per_state[i] = mean / u
    elif mode == "monte_carlo":
        from .quenched import SimConfig, simulate_residuals

        stderr = np.zeros_like(per_state)
        for i, m in enumerate(m_grid):
            for x in range(spec.d):
                cfg = SimConfig(n=int(m) * u, replicas=replicas, seed=seed, start=x,
                                block_m=int(m))
                r = simulate_residuals(spec, cfg)
                sq = r**2 / u
                per_state[i, x] = sq.mean()
                stderr[i, x] = sq.std(ddof=1) / np.sqrt(len(sq))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    provenance = {"exact": "exact", "enumerate": "exact", "monte_carlo": "monte-carlo"}[mode]
    # stationary mass only: unreachable starts carry no weight in the a.s. statements
    live = spec.stationary > 0
    values = per_state[:, live].max(axis=1)
    if stderr is not None:
        idx = np.flatnonzero(live)[per_state[:, live].argmax(axis=1)]
        stderr = stderr[np.arange(len(m_grid)), idx]
    return ResidualDecay(m_grid=m_grid, u=u, values=values, per_state=per_state,
                         stderr=stderr, provenance=provenance)


def weak_l1_norm(values, weights=None) -> WeakNormValue:
    """``sup_{lam > 0} lam * P(|V| >= lam)`` for a finitely supported ``V``.

    The supremum is attained at an atom, so scanning atoms in decreasing
    order with the cumulative tail mass is exact.
    """
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    w = np.full(v.shape, 1.0 / max(len(v), 1)) if weights is None else np.asarray(weights, float).ravel()
    keep = (w > 0) & (v > 0)
    v, w = v[keep], w[keep]
    if v.size == 0:
        return WeakNormValue(value=0.0, achieved_at=0.0)
    atoms, inv = np.unique(v, return_inverse=True)
    mass = np.bincount(inv.ravel(), weights=w, minlength=len(atoms))
    tail = np.cumsum(mass[::-1])[::-1]
    scores = atoms * tail
    i = int(np.argmax(scores))
    return WeakNormValue(value=float(scores[i]), achieved_at=float(atoms[i]))


def verify_dyadic_bound_lemma2(spec: ChainSpec, N: int = 2**12) -> Lemma2Result:
    """Truncated check of the dyadic weak-L1 bound with constants 6 and 12.

    lhs is the weak-L1 norm under ``pi`` of ``x -> max_{n<=N} E^x(S_n^2)/n``;
    rhs is ``6 E f^2 + 12 sum_{2^k<=N} 2^-k E|E^x(S_{2^k} Sbar_{2^k})|`` with
    ``Sbar_n = S_{2n} - S_n`` and ``E^x(S_n Sbar_n) = sum_y C_n(x,y) E^y(S_n)``.
    """
    N = check_horizon(N)
    if N & (N - 1):
        raise ValueError("N must be a power of two")
    if N > 2**14:
        raise ValueError("N must be <= 2^14")
    pi = spec.stationary
    m1, m2 = moment_path(spec, N)
    ns = np.arange(1, N + 1)[:, None]
    sup = (m2[1:] / ns).max(axis=0)
    lhs = weak_l1_norm(sup, pi).value

    cross = []
    for n, _, C in dyadic_power_cross(spec, N):
        cross.append(C @ m1[n])
    cross = np.array(cross)
    terms = np.abs(cross) @ pi
    k = np.arange(len(terms))
    rhs = 6 * spec.variance + 12 * float(np.sum(terms / 2.0**k))
    tail = 12 * float(terms.max()) * 2.0 ** (-(len(terms) - 1))
    return Lemma2Result(N=N, lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs), sup_per_state=sup,
                        cross_terms=cross, dyadic_terms=terms, tail_estimate=tail)


def verify_bound_lemma3(spec: ChainSpec, m: int, N: int = 2**10) -> Lemma3Result:
    """Weak-L1 bound on the paired block chain; reports ``lhs / (E V^2 + series)``."""
    N = check_horizon(N)
    pair = pair_chain(spec, m)
    _, m2 = moment_path(pair, N)
    us = np.arange(1, N + 1)[:, None]
    sup = (m2[1:] / us).max(axis=0)
    lhs = weak_l1_norm(sup, pair.stationary).value
    norms = bridge_norm_sq_sequence(pair, N)
    series = float(np.sum(norms / np.arange(1, N + 1) ** 2))
    ev2 = pair.variance
    denom = ev2 + series
    const = 0.0 if lhs == 0 else (lhs / denom if denom > 0 else float("inf"))
    return Lemma3Result(m=m, N=N, lhs=lhs, second_moment=ev2, rhs_series=series,
                        empirical_constant=const)
