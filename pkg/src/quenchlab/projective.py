"""
Exact conditional-expectation calculus for finite chains.

All quantities are matrix/vector recursions over ``Q``:

* forward moments ``E^x(S_n)`` and ``E^x(S_n^2)``;
* the bridge expectation ``b_n(x, y) = E(S_n | xi_0 = x, xi_n = y)``;
* the projective norms ``||E(S_n | xi_0)||^2``, ``||E(S_n | xi_0, xi_n)||^2``
  and ``||E(X_0 | xi_{-k}, xi_k)||^2``;
* the asymptotic variance, with a Poisson-equation cross-check.

The bridge numerator ``C_n(x, y) = E^x(S_n 1{xi_n = y})`` satisfies
``C_{a+b} = C_a Q^b + Q^a C_b`` so every horizon is reached in
``O(log n)`` matrix products.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import ChainSpec, ergodicity_report, kernel_power
from .errors import GuardExceeded, NumericalInconsistency, OracleUnavailable

MAX_HORIZON = 2**16
SLACK = 1e-9


@dataclass(frozen=True)
class ForwardMoments:
    n: int
    m1: np.ndarray
    m2: np.ndarray


@dataclass(frozen=True)
class BridgeExpectation:
    n: int
    b: np.ndarray
    support: np.ndarray
    power: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class SigmaSquared:
    """Asymptotic variance with its convergence sequence.

    ``grid``/``per_n`` hold ``(E S_n^2 - ||E(S_n|xi_0,xi_n)||^2) / n`` on the
    dyadic grid.  ``method`` is ``"richardson"``, ``"oracle"`` or ``"cesaro"``.
    """

    value: float
    raw_value: float
    grid: np.ndarray
    per_n: np.ndarray
    oracle_value: Optional[float]
    method: str


def check_horizon(n: int) -> int:
    n = int(n)
    if n < 1:
        raise ValueError(f"horizon must be >= 1, got {n}")
    if n > MAX_HORIZON:
        raise GuardExceeded(f"horizon {n} exceeds the limit {MAX_HORIZON}")
    return n


def dyadic_grid(n_max: int) -> np.ndarray:
    """Powers of two ``1, 2, 4, ... <= n_max``."""
    check_horizon(n_max)
    return 2 ** np.arange(int(math.log2(n_max)) + 1)


# --- forward moments -------------------------------------------------------

def forward_mean(spec: ChainSpec, n: int) -> np.ndarray:
    """``E^x(S_n) = sum_{k=1}^n (Q^k f)(x)`` via ``v <- Q(f + v)``."""
    n = check_horizon(n)
    Q, f = spec.kernel, spec.observable
    v = np.zeros(spec.d)
    for _ in range(n):
        v = Q @ (f + v)
    return v


def forward_second_moment(spec: ChainSpec, n: int) -> ForwardMoments:
    """Joint recursion for ``E^x(S_n)`` and ``E^x(S_n^2)``."""
    n = check_horizon(n)
    Q, f = spec.kernel, spec.observable
    m1 = np.zeros(spec.d)
    m2 = np.zeros(spec.d)
    for _ in range(n):
        m1, m2 = Q @ (f + m1), Q @ (f * f + 2 * f * m1 + m2)
    return ForwardMoments(n=n, m1=m1, m2=m2)


def moment_path(spec: ChainSpec, n_max: int):
    """Per-state ``E^x(S_n)`` and ``E^x(S_n^2)`` for every ``n = 0..n_max``.

    Returns two arrays of shape ``(n_max + 1, d)``.
    """
    n_max = check_horizon(n_max)
    Q, f = spec.kernel, spec.observable
    m1 = np.zeros((n_max + 1, spec.d))
    m2 = np.zeros((n_max + 1, spec.d))
    for k in range(1, n_max + 1):
        m1[k] = Q @ (f + m1[k - 1])
        m2[k] = Q @ (f * f + 2 * f * m1[k - 1] + m2[k - 1])
    return m1, m2


def _covariance_second_moment(spec: ChainSpec, n: int) -> float:
    Q, f, pi = spec.kernel, spec.observable, spec.stationary
    total = n * float(pi @ f**2)
    g = f.copy()
    for k in range(1, n):
        g = Q @ g
        total += 2 * (n - k) * float(pi @ (f * g))
    return total


def annealed_second_moment(spec: ChainSpec, n: int, cross_check: bool = True) -> float:
    """``E(S_n^2)`` under the stationary law.

    The dynamic-programming value is compared with the covariance sum
    ``n E f^2 + 2 sum_k (n-k) <f, Q^k f>_pi``; a disagreement beyond
    ``1e-9`` (relative to the magnitude) raises NumericalInconsistency.
    """
    mom = forward_second_moment(spec, n)
    value = float(spec.stationary @ mom.m2)
    if cross_check:
        other = _covariance_second_moment(spec, n)
        if abs(value - other) > SLACK * max(1.0, abs(value)):
            raise NumericalInconsistency(
                f"E(S_{n}^2): recursion {value!r} vs covariance sum {other!r}")
    return value


# --- bridge ----------------------------------------------------------------

def _compose(a, b):
    Pa, Ca = a
    Pb, Cb = b
    return Pa @ Pb, Ca @ Pb + Pa @ Cb


def power_and_cross(spec_or_kernel, f, n: int):
    """``(Q^n, C_n)`` with ``C_n = sum_{k=1}^n Q^k diag(f) Q^{n-k}``."""
    Q = np.asarray(getattr(spec_or_kernel, "kernel", spec_or_kernel), dtype=float)
    base = (Q, Q * np.asarray(f, dtype=float)[None, :])
    result = None
    while n:
        if n & 1:
            result = base if result is None else _compose(result, base)
        n >>= 1
        if n:
            base = _compose(base, base)
    return result


def dyadic_power_cross(spec: ChainSpec, n_max: int):
    """``[(n, Q^n, C_n)]`` for ``n = 1, 2, 4, ... <= n_max`` by doubling."""
    out = []
    state = (spec.kernel, spec.kernel * spec.observable[None, :])
    for n in dyadic_grid(n_max):
        if n > 1:
            state = _compose(state, state)
        out.append((int(n), state[0], state[1]))
    return out


def _bridge_from(P: np.ndarray, C: np.ndarray):
    support = P > 0
    b = np.zeros_like(P)
    np.divide(C, P, out=b, where=support)
    return b, support


def bridge_sum_expectation(spec: ChainSpec, n: int) -> BridgeExpectation:
    """``b_n(x, y) = E(S_n | xi_0 = x, xi_n = y)``, zero off the support of ``Q^n``."""
    n = check_horizon(n)
    P, C = power_and_cross(spec, spec.observable, n)
    b, support = _bridge_from(P, C)
    return BridgeExpectation(n=n, b=b, support=support, power=P)


def _bridge_norm(pi, P, C) -> float:
    b, support = _bridge_from(P, C)
    return float(np.sum(pi[:, None] * P * b * b))


def bridge_norm_sq(spec: ChainSpec, n: int) -> float:
    """``||E(S_n | xi_0, xi_n)||^2 = sum pi(x) Q^n(x,y) b_n(x,y)^2``."""
    n = check_horizon(n)
    P, C = power_and_cross(spec, spec.observable, n)
    return _bridge_norm(spec.stationary, P, C)


def bridge_norm_sq_sequence(spec: ChainSpec, n_max: int) -> np.ndarray:
    """Bridge norms for every ``n = 1..n_max`` (entry ``n-1``)."""
    n_max = check_horizon(n_max)
    Q, pi = spec.kernel, spec.stationary
    QF = Q * spec.observable[None, :]
    P, C = Q.copy(), QF.copy()
    out = np.empty(n_max)
    out[0] = _bridge_norm(pi, P, C)
    for k in range(1, n_max):
        # C_{k+1} = C_k Q + Q^k (Q F)
        C = C @ Q + P @ QF
        P = P @ Q
        out[k] = _bridge_norm(pi, P, C)
    return out


def past_norm_sq(spec: ChainSpec, n: int) -> float:
    """``||E(S_n | xi_0)||^2``."""
    m1 = forward_mean(spec, n)
    return float(spec.stationary @ m1**2)


def two_sided_single_norm_sq(spec: ChainSpec, k: int) -> float:
    """``||E(X_0 | xi_{-k}, xi_k)||^2``."""
    k = check_horizon(k)
    Pk = kernel_power(spec, k)
    A = (Pk * spec.observable[None, :]) @ Pk
    P2 = Pk @ Pk
    return _bridge_norm(spec.stationary, P2, A)


# --- asymptotic variance ---------------------------------------------------

def poisson_oracle(spec: ChainSpec) -> Optional[float]:
    """``E g^2 - E (Qg)^2`` for the mean-zero solution of ``g - Qg = f``.

    Returns None (with an OracleUnavailable warning) when ``I - Q`` is
    singular on the mean-zero subspace.
    """
    Q, pi, f = spec.kernel, spec.stationary, spec.observable
    d = spec.d
    A = np.eye(d) - Q + np.outer(np.ones(d), pi)
    if np.linalg.cond(A) > 1e12:
        warnings.warn("I - Q is singular on the mean-zero subspace", OracleUnavailable,
                      stacklevel=2)
        return None
    g = np.linalg.solve(A, f)
    Qg = Q @ g
    return float(pi @ g**2 - pi @ Qg**2)


def _richardson(grid: np.ndarray, values: np.ndarray) -> float:
    # error model v(n) = s + a/n + c/n^2 on three consecutive doublings
    v0, v1, v2 = values[-3:]
    r1 = 2 * v1 - v0
    r2 = 2 * v2 - v1
    return (4 * r2 - r1) / 3


def sigma_sq(spec: ChainSpec, n_max: int = 2**12) -> SigmaSquared:
    """Asymptotic variance from ``(E S_n^2 - ||E(S_n|xi_0,xi_n)||^2)/n``.

    Totally ergodic chains use three-point Richardson extrapolation on the
    last dyadic points.  Otherwise the Poisson oracle is used when it exists,
    else the mean of the tail half of the sequence.
    """
    grid = dyadic_grid(n_max)
    m1, m2 = moment_path(spec, int(grid[-1]))
    pi = spec.stationary
    per_n = np.empty(len(grid))
    for i, (n, P, C) in enumerate(dyadic_power_cross(spec, int(grid[-1]))):
        per_n[i] = (float(pi @ m2[n]) - _bridge_norm(pi, P, C)) / n

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        oracle = poisson_oracle(spec)
    for w in caught:
        warnings.warn(w.message, w.category, stacklevel=2)

    if ergodicity_report(spec).totally_ergodic and len(grid) >= 3:
        raw, method = _richardson(grid, per_n), "richardson"
    elif oracle is not None:
        raw, method = oracle, "oracle"
    else:
        tail = per_n[len(per_n) // 2:]
        raw, method = float(np.mean(tail)), "cesaro"
    return SigmaSquared(value=max(float(raw), 0.0), raw_value=float(raw), grid=grid,
                        per_n=per_n, oracle_value=oracle, method=method)
