"""
Numerical verdicts for the limit and series conditions.

Series conditions are judged from the decay exponent of their summand on a
log-log fit over the top half of the grid: ``converges`` below ``-(1 + delta)``,
``diverges`` above ``-(1 - delta)``, ``inconclusive`` in between.  These are
numerical evidence computed from finitely many exact terms, never proofs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chain import ChainSpec
from .projective import (
    _bridge_norm,
    _richardson,
    dyadic_grid,
    dyadic_power_cross,
    moment_path,
    two_sided_single_norm_sq,
)

DELTA = 0.1
ZERO_REL = 1e-14


@dataclass(frozen=True)
class SeriesDiagnostic:
    """Summand values on a grid and the resulting verdict.

    ``terms`` are the summands at the grid points and ``fitted_exponent`` is
    their log-log slope.  ``block_terms`` approximate the series mass of each
    dyadic block (``2^j`` times the summand at ``2^j``; equal to ``terms`` on a
    dense grid) and ``partial_sums`` accumulate them.
    """

    name: str
    grid: np.ndarray
    terms: np.ndarray
    block_terms: np.ndarray
    partial_sums: np.ndarray
    fitted_exponent: float
    verdict: str


@dataclass(frozen=True)
class LimitDiagnostic:
    name: str
    grid: np.ndarray
    values: np.ndarray
    extrapolated_limit: float
    fitted_exponent: float
    verdict: str


@dataclass(frozen=True)
class QuenchedEquivalenceReport:
    sigma_sq: float
    tol: float
    grid: np.ndarray
    per_state_values: np.ndarray
    per_state_limsup: np.ndarray
    per_state_limit_gap: np.ndarray
    per_state_oscillation: np.ndarray
    condition_a: bool
    condition_b: bool


@dataclass(frozen=True)
class DyadicTable:
    """Exact quantities on the grid ``n = 1, 2, 4, ... <= n_max``."""

    grid: np.ndarray
    annealed: np.ndarray
    bridge: np.ndarray
    past: np.ndarray
    per_state_m2: np.ndarray


def dyadic_table(spec: ChainSpec, n_max: int) -> DyadicTable:
    grid = dyadic_grid(n_max)
    pi = spec.stationary
    m1, m2 = moment_path(spec, int(grid[-1]))
    bridge = np.array([_bridge_norm(pi, P, C) for _, P, C in dyadic_power_cross(spec, int(grid[-1]))])
    return DyadicTable(
        grid=grid,
        annealed=m2[grid] @ pi,
        bridge=bridge,
        past=(m1[grid] ** 2) @ pi,
        per_state_m2=m2[grid],
    )


def _top_half(a: np.ndarray) -> np.ndarray:
    return a[len(a) // 2:]


def fitted_exponent(grid, values, scale: float = 1.0) -> float:
    """Log-log slope over the top half of the grid.

    Values below ``1e-14 * scale`` count as exact zeros; if every top-half
    value is zero the slope is ``-inf``.
    """
    g = _top_half(np.asarray(grid, dtype=float))
    v = _top_half(np.asarray(values, dtype=float))
    keep = v > ZERO_REL * max(scale, np.finfo(float).tiny)
    if keep.sum() == 0:
        return float("-inf")
    if keep.sum() == 1:
        # a single surviving value followed or preceded by zeros
        return float("-inf") if not keep[-1] else 0.0
    slope = np.polyfit(np.log(g[keep]), np.log(v[keep]), 1)[0]
    return float(slope)


def series_verdict(exponent: float, delta: float = DELTA) -> str:
    if exponent < -(1 + delta):
        return "converges"
    if exponent > -(1 - delta):
        return "diverges"
    return "inconclusive"


def _series(name, grid, terms, dyadic: bool, scale: float, delta: float) -> SeriesDiagnostic:
    terms = np.maximum(np.asarray(terms, dtype=float), 0.0)
    block = terms * grid if dyadic else terms
    expo = fitted_exponent(grid, terms, scale)
    return SeriesDiagnostic(name=name, grid=np.asarray(grid), terms=terms, block_terms=block,
                            partial_sums=np.cumsum(block), fitted_exponent=expo,
                            verdict=series_verdict(expo, delta))


def _scale(spec: ChainSpec) -> float:
    return max(spec.variance, 1.0)


def _check_n_max(n_max: int):
    if n_max < 8:
        raise ValueError("n_max must be >= 8")


def check_varsup(spec: ChainSpec, n_max: int = 2**16,
                 table: Optional[DyadicTable] = None) -> LimitDiagnostic:
    """``limsup E(S_n^2)/n < infinity``.

    Holds when the top-half maximum is at most twice the top-half median and
    the slope of ``values / median`` against ``log n`` is within 0.05.
    """
    _check_n_max(n_max)
    t = table or dyadic_table(spec, n_max)
    values = t.annealed / t.grid
    top = _top_half(values)
    med = float(np.median(top))
    bounded = float(top.max()) <= 2 * med + 1e-12 * _scale(spec)
    norm = med if med > 1e-12 * _scale(spec) else _scale(spec)
    slope = float(np.polyfit(np.log(_top_half(t.grid).astype(float)), top / norm, 1)[0])
    verdict = "holds" if bounded and abs(slope) <= 0.05 else "fails"
    return LimitDiagnostic(name="varsup", grid=t.grid, values=values,
                           extrapolated_limit=float(_richardson(t.grid, values)),
                           fitted_exponent=slope, verdict=verdict)


def check_neglipf(spec: ChainSpec, n_max: int = 2**16,
                  table: Optional[DyadicTable] = None) -> LimitDiagnostic:
    """``||E(S_n | xi_0, xi_n)||^2 / n -> 0``.

    Holds when the last value is at most ``1e-3 E f^2`` and the log-log slope
    is at most -0.9.
    """
    _check_n_max(n_max)
    t = table or dyadic_table(spec, n_max)
    values = t.bridge / t.grid
    expo = fitted_exponent(t.grid, values, _scale(spec))
    small = values[-1] <= 1e-3 * spec.variance
    verdict = "holds" if small and expo <= -0.9 else "fails"
    return LimitDiagnostic(name="neglipf", grid=t.grid, values=values,
                           extrapolated_limit=float(_richardson(t.grid, values)),
                           fitted_exponent=expo, verdict=verdict)


def check_maxwell_woodroofe(spec: ChainSpec, n_max: int = 2**16, delta: float = DELTA,
                            table: Optional[DyadicTable] = None) -> SeriesDiagnostic:
    """Summand ``||E(S_n | xi_0)|| / n^{3/2}``."""
    _check_n_max(n_max)
    t = table or dyadic_table(spec, n_max)
    terms = np.sqrt(t.past) / t.grid**1.5
    return _series("maxwell_woodroofe", t.grid, terms, True, np.sqrt(_scale(spec)), delta)


def check_conjrev(spec: ChainSpec, n_max: int = 2**16, delta: float = DELTA,
                  table: Optional[DyadicTable] = None) -> SeriesDiagnostic:
    """Summand ``||E(S_n | xi_0)||^2 / n^2``."""
    _check_n_max(n_max)
    t = table or dyadic_table(spec, n_max)
    return _series("conjrev", t.grid, t.past / t.grid.astype(float) ** 2, True,
                   _scale(spec), delta)


def check_condpf(spec: ChainSpec, n_max: int = 2**16, delta: float = DELTA,
                 table: Optional[DyadicTable] = None) -> SeriesDiagnostic:
    """Summand ``||E(S_n | xi_0, xi_n)||^2 / n^2``."""
    _check_n_max(n_max)
    t = table or dyadic_table(spec, n_max)
    return _series("condpf", t.grid, t.bridge / t.grid.astype(float) ** 2, True,
                   _scale(spec), delta)


def check_mixingale(spec: ChainSpec, k_max: int = 64, delta: float = DELTA) -> SeriesDiagnostic:
    """Summand ``||E(X_0 | xi_{-k}, xi_k)||^2`` on the dense grid ``k = 1..k_max``."""
    if k_max < 4:
        raise ValueError("k_max must be >= 4")
    grid = np.arange(1, k_max + 1)
    terms = np.array([two_sided_single_norm_sq(spec, int(k)) for k in grid])
    return _series("mixingale", grid, terms, False, _scale(spec), delta)


def check_quenched_moments(spec: ChainSpec, n_max: int, sigma_sq: float,
                           table: Optional[DyadicTable] = None) -> QuenchedEquivalenceReport:
    """Per-state ``E^x(S_n^2)/n`` against ``sigma^2``.

    Condition (a): the tail-grid maximum is at most ``sigma^2 + tol``.
    Condition (b): the last three grid values differ by at most ``tol``.
    ``tol = max(0.05 sigma^2, 1e-6)``.  States without stationary mass are
    reported but do not enter the verdicts.
    """
    _check_n_max(n_max)
    t = table or dyadic_table(spec, n_max)
    tol = max(0.05 * sigma_sq, 1e-6)
    vals = t.per_state_m2 / t.grid[:, None]
    tail = _top_half(vals)
    limsup = tail.max(axis=0)
    gap = np.abs(vals[-1] - sigma_sq)
    last3 = vals[-3:]
    osc = last3.max(axis=0) - last3.min(axis=0)
    live = spec.stationary > 0
    return QuenchedEquivalenceReport(
        sigma_sq=float(sigma_sq), tol=tol, grid=t.grid, per_state_values=vals,
        per_state_limsup=limsup, per_state_limit_gap=gap, per_state_oscillation=osc,
        condition_a=bool(np.all(limsup[live] <= sigma_sq + tol)),
        condition_b=bool(np.all(osc[live] <= tol)),
    )
