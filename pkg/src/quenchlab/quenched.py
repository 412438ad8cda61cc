"""
Monte Carlo checks of the quenched, annealed and randomly centered CLTs.

Replica ``r`` of a run draws its uniforms from a Philox stream keyed by the
run seed with counter ``(0, r, tag, 0)``; ``tag`` separates start states.
Replicas are simulated in fixed-size chunks and written back by index, so the
samples are byte-identical for any number of worker threads.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np
from numba import njit
from scipy import stats

from .chain import ChainSpec
from .errors import DegenerateMismatch
from .projective import bridge_sum_expectation, check_horizon

CHUNK = 512
KS_CRIT = 1.36
DEGENERATE_EPS = 1e-8
DEFAULT_M_GRID = (1.0, 2.0, 5.0, 10.0, 20.0)

Start = Union[int, str]


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo run parameters.

    ``start`` is a state index or label, ``"all"`` (one run per state) or
    ``"stationary"`` (initial state drawn from ``pi``).  With ``block_m`` set,
    the block martingale ``M_u(m)`` with ``u = n // m`` is tracked too.
    """

    n: int
    replicas: int = 10_000
    seed: int = 0
    start: Start = "all"
    block_m: Optional[int] = None

    def __post_init__(self):
        if self.replicas < 100:
            raise ValueError("at least 100 replicas are required")
        check_horizon(self.n)
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.block_m is not None and not 1 <= self.block_m <= self.n:
            raise ValueError("block_m must lie in [1, n]")


@dataclass(frozen=True)
class SampleSet:
    """Samples from one start (index ``start``; -1 means stationary draw)."""

    start: int
    n: int
    sums: np.ndarray
    first: np.ndarray
    last: np.ndarray
    centered: Optional[np.ndarray] = None
    martingale: Optional[np.ndarray] = None
    residual: Optional[np.ndarray] = None


@dataclass(frozen=True)
class QuenchedRow:
    label: str
    mean: float
    variance: float
    stderr: float
    second_moment: float
    second_moment_se: float
    ks: float
    passed: bool
    degenerate_mismatch: bool = False


@dataclass(frozen=True)
class UITable:
    start: str
    n_grid: np.ndarray
    M_grid: np.ndarray
    table: np.ndarray
    stderr: np.ndarray
    threshold: float
    passed: bool


@dataclass(frozen=True)
class QuenchedReport:
    sigma_sq: float
    n: int
    replicas: int
    ks_tol: float
    per_state: list
    annealed: Optional[QuenchedRow]
    centered: list
    ui_M_grid: np.ndarray
    ui_table: np.ndarray
    ui_stderr: np.ndarray
    histograms: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.per_state)

    @property
    def centered_passed(self) -> bool:
        return all(r.passed for r in self.centered)


def ks_tolerance(replicas: int, c_bias: float = 0.02) -> float:
    return KS_CRIT / math.sqrt(replicas) + c_bias


def _start_index(spec: ChainSpec, start: Start) -> int:
    if isinstance(start, str):
        if start == "stationary":
            return -1
        if start in spec.states:
            return spec.states.index(start)
        raise ValueError(f"unknown start {start!r}")
    idx = int(start)
    if not 0 <= idx < spec.d:
        raise ValueError(f"start index {idx} out of range")
    return idx


def _starts(spec: ChainSpec, start: Start) -> list[int]:
    if start == "all":
        return [x for x in range(spec.d) if spec.stationary[x] > 0]
    return [_start_index(spec, start)]


def _cdf(P: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(P, axis=1)
    for x in range(P.shape[0]):
        last = np.flatnonzero(P[x] > 0)[-1]
        cdf[x, last:] = 1.0
    return cdf


def _uniforms(seed: int, tag: int, r0: int, r1: int, width: int) -> np.ndarray:
    out = np.empty((r1 - r0, width))
    for i, r in enumerate(range(r0, r1)):
        gen = np.random.Generator(np.random.Philox(key=int(seed), counter=[0, r, tag, 0]))
        out[i] = gen.random(width)
    return out


@njit(nogil=True, cache=True)
def _walk(U, cdf, f, first, block_m, bridge_m):
    rows, width = U.shape
    n = width - 1
    d = cdf.shape[1]
    sums = np.zeros(rows)
    last = np.empty(rows, dtype=np.int64)
    mart = np.zeros(rows)
    resid = np.zeros(rows)
    u_blocks = n // block_m if block_m > 0 else 0
    root = math.sqrt(block_m) if block_m > 0 else 1.0
    for i in range(rows):
        x = first[i]
        anchor = x
        s = 0.0
        y = 0.0
        for t in range(1, n + 1):
            r = U[i, t]
            j = 0
            while j < d - 1 and r >= cdf[x, j]:
                j += 1
            x = j
            s += f[x]
            if t <= u_blocks * block_m:
                y += f[x]
                if t % block_m == 0:
                    z = bridge_m[anchor, x] / root
                    mart[i] += y / root - z
                    resid[i] += z
                    y = 0.0
                    anchor = x
        sums[i] = s
        last[i] = x
    return sums, last, mart, resid


def _run_chunk(spec, cfg: SimConfig, start: int, r0: int, r1: int, bridge_m):
    U = _uniforms(cfg.seed, start + 1, r0, r1, cfg.n + 1)
    d = spec.d
    if start < 0:
        pi_cdf = _cdf(spec.stationary[None, :])[0]
        first = np.minimum(np.searchsorted(pi_cdf, U[:, 0], side="right"), d - 1)
    else:
        first = np.full(r1 - r0, start)
    first = first.astype(np.int64)
    m = cfg.block_m or 0
    bm = bridge_m if m else np.zeros((d, d))
    sums, last, mart, resid = _walk(U, _cdf(spec.kernel), spec.observable.copy(), first, m, bm)
    out = {"sums": sums, "first": first, "last": last}
    if m:
        out["martingale"] = mart
        out["residual"] = resid
    return out


def _simulate(spec: ChainSpec, cfg: SimConfig, start: int, workers: int) -> dict:
    R = cfg.replicas
    bridge_m = bridge_sum_expectation(spec, cfg.block_m).b if cfg.block_m else None
    bounds = [(r, min(r + CHUNK, R)) for r in range(0, R, CHUNK)]
    job = lambda b: _run_chunk(spec, cfg, start, b[0], b[1], bridge_m)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, bounds))
    else:
        parts = [job(b) for b in bounds]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def simulate_sums(spec: ChainSpec, config: SimConfig, centered: bool = False,
                  workers: int = 1) -> list[SampleSet]:
    """Simulate ``S_n / sqrt(n)`` for every requested start.

    With ``centered=True`` each set also carries
    ``(S_n - b_n(xi_0, xi_n)) / sqrt(n)``; with ``config.block_m`` it carries
    ``M_u(m) / sqrt(u)`` and the raw residual ``R_u(m)``.
    """
    n = config.n
    root = math.sqrt(n)
    bn = bridge_sum_expectation(spec, n).b if centered else None
    out = []
    for start in _starts(spec, config.start):
        raw = _simulate(spec, config, start, workers)
        cen = (raw["sums"] - bn[raw["first"], raw["last"]]) / root if centered else None
        mart = resid = None
        if config.block_m:
            u = n // config.block_m
            mart = raw["martingale"] / math.sqrt(u)
            resid = raw["residual"]
        out.append(SampleSet(start=start, n=n, sums=raw["sums"] / root, first=raw["first"],
                             last=raw["last"], centered=cen, martingale=mart, residual=resid))
    return out


def simulate_residuals(spec: ChainSpec, config: SimConfig, workers: int = 1) -> np.ndarray:
    """Raw ``R_u(m)`` samples for a single start (``config.block_m`` required)."""
    if not config.block_m:
        raise ValueError("block_m must be set")
    if config.start == "all":
        raise ValueError("a single start is required")
    (ss,) = simulate_sums(spec, config, workers=workers)
    return ss.residual


def ks_distance(samples, sigma_sq: float) -> float:
    """Kolmogorov-Smirnov distance between the samples and ``N(0, sigma_sq)``.

    For ``sigma_sq == 0`` the reference is the point mass at 0 and the
    distance is the fraction of samples outside ``[-1e-8, 1e-8]``.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("samples must be nonempty")
    if sigma_sq <= 0:
        outside = float(np.mean(np.abs(x) > DEGENERATE_EPS))
        if outside > 0:
            warnings.warn(f"{outside:.3g} of the mass is away from 0", DegenerateMismatch,
                          stacklevel=2)
        return outside
    return float(stats.kstest(x, "norm", args=(0.0, math.sqrt(sigma_sq))).statistic)


def _row(label: str, x: np.ndarray, sigma_sq: float, tol: float) -> QuenchedRow:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ks = ks_distance(x, sigma_sq)
    mismatch = any(issubclass(w.category, DegenerateMismatch) for w in caught)
    R = len(x)
    sq = x * x
    return QuenchedRow(
        label=label,
        mean=float(x.mean()),
        variance=float(x.var(ddof=1)),
        stderr=float(x.std(ddof=1) / math.sqrt(R)),
        second_moment=float(sq.mean()),
        second_moment_se=float(sq.std(ddof=1) / math.sqrt(R)),
        ks=ks,
        passed=bool(ks <= tol),
        degenerate_mismatch=mismatch,
    )


def _ui_entries(x: np.ndarray, M_grid) -> tuple[np.ndarray, np.ndarray]:
    # x holds S_n / sqrt(n); the variable is S_n^2 / n
    v = x * x
    R = len(v)
    vals, ses = [], []
    for M in M_grid:
        w = np.where(v > M, v, 0.0)
        vals.append(w.mean())
        ses.append(w.std(ddof=1) / math.sqrt(R))
    return np.array(vals), np.array(ses)


def _histogram(x: np.ndarray, bins: int = 41):
    lo, hi = float(x.min()), float(x.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(x, bins=bins, range=(lo, hi))
    return counts, edges


def quenched_clt_check(spec: ChainSpec, config: SimConfig, sigma_sq: float,
                       c_bias: float = 0.02, M_grid: Sequence[float] = DEFAULT_M_GRID,
                       annealed: bool = True, centered: bool = True,
                       workers: int = 1) -> QuenchedReport:
    """Per-start KS of ``S_n/sqrt(n)`` against ``N(0, sigma_sq)``.

    A start passes when its distance is at most ``1.36/sqrt(R) + c_bias``.
    The report adds an annealed row (stationary start), centered rows for
    ``(S_n - b_n(xi_0, xi_n))/sqrt(n)`` and a uniform-integrability table at
    horizon ``n``.
    """
    tol = ks_tolerance(config.replicas, c_bias)
    sets = simulate_sums(spec, config, centered=centered, workers=workers)
    per_state, cen_rows, ui, ui_se, hist = [], [], [], [], {}
    for ss in sets:
        label = spec.states[ss.start]
        per_state.append(_row(label, ss.sums, sigma_sq, tol))
        if centered:
            cen_rows.append(_row(label, ss.centered, sigma_sq, tol))
        vals, ses = _ui_entries(ss.sums, M_grid)
        ui.append(vals)
        ui_se.append(ses)
        hist[label] = _histogram(ss.sums)
    ann = None
    if annealed:
        (ss,) = simulate_sums(spec, replace(config, start="stationary"), workers=workers)
        ann = _row("stationary", ss.sums, sigma_sq, tol)
        hist["stationary"] = _histogram(ss.sums)
    return QuenchedReport(sigma_sq=float(sigma_sq), n=config.n, replicas=config.replicas,
                          ks_tol=tol, per_state=per_state, annealed=ann, centered=cen_rows,
                          ui_M_grid=np.asarray(M_grid, dtype=float), ui_table=np.array(ui),
                          ui_stderr=np.array(ui_se), histograms=hist)


def uniform_integrability_diag(spec: ChainSpec, start: Start, n_grid: Sequence[int],
                               M_grid: Sequence[float], R: int = 10_000, seed: int = 0,
                               sigma_sq: Optional[float] = None,
                               workers: int = 1) -> UITable:
    """Estimates of ``E^x[(S_n^2/n) 1{S_n^2/n > M}]`` with standard errors.

    Passes when the largest-``M`` column stays below ``0.05 sigma^2 + 2 SE``
    for every ``n``.
    """
    if not len(n_grid) or not len(M_grid):
        raise ValueError("grids must be nonempty")
    if sigma_sq is None:
        from .projective import sigma_sq as _sigma_sq

        sigma_sq = _sigma_sq(spec).value
    idx = _start_index(spec, start)
    table, ses = [], []
    for n in n_grid:
        (ss,) = simulate_sums(spec, SimConfig(n=int(n), replicas=R, seed=seed, start=idx),
                              workers=workers)
        vals, se = _ui_entries(ss.sums, M_grid)
        table.append(vals)
        ses.append(se)
    table, ses = np.array(table), np.array(ses)
    last = table[:, -1]
    passed = bool(np.all(last <= 0.05 * sigma_sq + 2 * ses[:, -1]))
    label = "stationary" if idx < 0 else spec.states[idx]
    return UITable(start=label, n_grid=np.asarray(n_grid), M_grid=np.asarray(M_grid, float),
                   table=table, stderr=ses, threshold=0.05 * sigma_sq, passed=passed)


def martingale_clt_check(spec: ChainSpec, m: int, config: SimConfig, sigma_sq: float,
                         c_bias: float = 0.02, workers: int = 1) -> list[QuenchedRow]:
    """Per-start KS of ``M_u(m)/sqrt(u)`` against ``N(0, sigma_sq)``.

    ``sigma_sq`` should be the block martingale variance ``E(D_0^2)``.
    """
    cfg = replace(config, block_m=m)
    tol = ks_tolerance(cfg.replicas, c_bias)
    return [_row(spec.states[ss.start], ss.martingale, sigma_sq, tol)
            for ss in simulate_sums(spec, cfg, workers=workers)]
