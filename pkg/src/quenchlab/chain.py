"""
Finite-state stationary Markov chains.

A :class:`ChainSpec` bundles a row-stochastic kernel ``Q``, an invariant law
``pi`` and an observable ``f`` centered under ``pi``.  Everything downstream
(exact moment calculus, criteria, Monte Carlo) consumes only validated specs.

Chain files are JSON documents::

    {
      "name": "lazy-flip-0.25",          # optional, string
      "states": ["s0", "s1"],            # labels, length d
      "kernel": [[0.75, 0.25],           # d rows of d transition probabilities
                 [0.25, 0.75]],
      "f": [1.0, -1.0],                  # observable values, length d
      "pi": [0.5, 0.5],                  # optional invariant law
      "auto_center": false               # optional, subtract the pi-mean of f
    }
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    ChainLoadError,
    DimensionMismatch,
    InvalidStationary,
    NegativeEntry,
    NoStationaryLaw,
    NonStochasticRow,
    UncenteredObservable,
)

ROW_TOL = 1e-12
IDENTITY_TOL = 1e-10
CENTER_TOL = 1e-10


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChainSpec:
    """Validated chain: labels, kernel, centered observable and invariant law."""

    states: tuple
    kernel: np.ndarray
    observable: np.ndarray
    stationary: np.ndarray
    name: str = "chain"

    @property
    def d(self) -> int:
        return len(self.states)

    @property
    def variance(self) -> float:
        """E_pi(f^2)."""
        return float(self.stationary @ self.observable**2)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "states": list(self.states),
            "kernel": self.kernel.tolist(),
            "f": self.observable.tolist(),
            "pi": self.stationary.tolist(),
        }


@dataclass(frozen=True)
class ErgodicityReport:
    irreducible: bool
    period: int
    totally_ergodic: bool
    reversible: bool


def validate_chain(states, kernel, observable, stationary=None,
                   auto_center: bool = False, name: str = "chain") -> ChainSpec:
    """Check raw inputs and build a :class:`ChainSpec`.

    Parameters
    ----------
    states : sequence of labels, length d
    kernel : d x d array-like, row-stochastic
    observable : length-d array-like
    stationary : optional length-d invariant law; computed when omitted
    auto_center : bool
        If True an uncentered observable is shifted by its pi-mean instead of
        being rejected.

    Raises
    ------
    DimensionMismatch, NegativeEntry, NonStochasticRow, UncenteredObservable,
    NoStationaryLaw, InvalidStationary
    """
    states = tuple(str(s) for s in states)
    try:
        Q = np.array(kernel, dtype=float)
        f = np.array(observable, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DimensionMismatch(f"kernel/observable not rectangular numeric: {exc}")
    d = len(states)
    if d < 1:
        raise DimensionMismatch("at least one state is required")
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise DimensionMismatch(f"kernel must be square, got shape {Q.shape}")
    if Q.shape[0] != d:
        raise DimensionMismatch(f"{d} states but kernel is {Q.shape[0]}x{Q.shape[1]}")
    if f.shape != (d,):
        raise DimensionMismatch(f"observable has shape {f.shape}, expected ({d},)")
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(f))):
        raise DimensionMismatch("kernel and observable must be finite")
    if np.any(Q < 0):
        i, j = np.argwhere(Q < 0)[0]
        raise NegativeEntry(f"Q[{i},{j}] = {Q[i, j]} < 0")
    sums = Q.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL)
    if bad.size:
        raise NonStochasticRow(f"row {bad[0]} sums to {sums[bad[0]]!r}")

    if stationary is None:
        pi = stationary_law(Q)
    else:
        pi = np.array(stationary, dtype=float)
        if pi.shape != (d,):
            raise DimensionMismatch(f"stationary has shape {pi.shape}, expected ({d},)")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > ROW_TOL:
            raise InvalidStationary("pi must be a probability vector")
        if np.max(np.abs(pi @ Q - pi)) > IDENTITY_TOL:
            raise InvalidStationary("supplied pi is not invariant: pi Q != pi")

    mean = float(pi @ f)
    if abs(mean) > CENTER_TOL:
        if not auto_center:
            raise UncenteredObservable(f"pi-mean of f is {mean!r}; pass auto_center to shift it")
        f = f - mean
    return ChainSpec(states=states, kernel=_frozen(Q), observable=_frozen(f),
                     stationary=_frozen(pi), name=name)


def stationary_law(kernel) -> np.ndarray:
    """Invariant law from the null space of ``Q^T - I`` plus a normalisation row.

    Raises NoStationaryLaw when the invariant law is not unique (more than one
    closed class).
    """
    Q = np.asarray(getattr(kernel, "kernel", kernel), dtype=float)
    d = Q.shape[0]
    A = np.vstack([Q.T - np.eye(d), np.ones((1, d))])
    b = np.zeros(d + 1)
    b[-1] = 1.0
    pi, _, rank, sv = np.linalg.lstsq(A, b, rcond=None)
    tol = sv.max() * (d + 1) * np.finfo(float).eps * 16
    if rank < d or sv.min() <= tol:
        raise NoStationaryLaw("invariant law is not unique (several closed classes)")
    pi = np.where(np.abs(pi) < ROW_TOL, 0.0, pi)
    if np.any(pi < 0):
        raise NoStationaryLaw("null-space solution has negative mass")
    return pi / pi.sum()


def _communication(Q: np.ndarray):
    ncomp, labels = connected_components(Q > 0, directed=True, connection="strong")
    return ncomp, labels


def _period_from(Q: np.ndarray, start: int, members: np.ndarray) -> int:
    # BFS levels inside the class; every edge (u, v) closes a cycle of length
    # level[u] + 1 - level[v] modulo the period.
    inside = set(int(i) for i in members)
    level = {start: 0}
    queue = deque([start])
    g = 0
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(Q[u] > 0):
            v = int(v)
            if v not in inside:
                continue
            if v not in level:
                level[v] = level[u] + 1
                queue.append(v)
            else:
                g = math.gcd(g, level[u] + 1 - level[v])
    return abs(g) if g else 0


def ergodicity_report(spec: ChainSpec) -> ErgodicityReport:
    """Irreducibility, period, total ergodicity and reversibility flags.

    The period is taken on the communication class of the first state that
    carries stationary mass.
    """
    Q = spec.kernel
    pi = spec.stationary
    ncomp, labels = _communication(Q)
    irreducible = ncomp == 1
    ref = int(np.flatnonzero(pi > 0)[0])
    members = np.flatnonzero(labels == labels[ref])
    period = _period_from(Q, ref, members)
    if period == 0:
        # a transient singleton without a self loop never returns; report 1
        period = 1
    flux = pi[:, None] * Q
    reversible = bool(np.max(np.abs(flux - flux.T)) <= ROW_TOL)
    return ErgodicityReport(
        irreducible=bool(irreducible),
        period=int(period),
        totally_ergodic=bool(irreducible and period == 1),
        reversible=reversible,
    )


def kernel_power(spec, n: int) -> np.ndarray:
    """``Q^n`` by repeated squaring (raw values, no clamping)."""
    Q = np.asarray(getattr(spec, "kernel", spec), dtype=float)
    if n < 1:
        raise ValueError("n must be >= 1")
    result = None
    base = Q
    while n:
        if n & 1:
            result = base if result is None else result @ base
        n >>= 1
        if n:
            base = base @ base
    return result


def clamp_for_report(P: np.ndarray) -> np.ndarray:
    return np.clip(P, 0.0, 1.0)


def from_dict(doc: dict) -> ChainSpec:
    if not isinstance(doc, dict):
        raise ChainLoadError("chain document must be a JSON object")
    missing = [k for k in ("states", "kernel", "f") if k not in doc]
    if missing:
        raise ChainLoadError(f"chain document lacks fields: {', '.join(missing)}")
    return validate_chain(
        doc["states"], doc["kernel"], doc["f"],
        stationary=doc.get("pi"),
        auto_center=bool(doc.get("auto_center", False)),
        name=str(doc.get("name", "chain")),
    )


def load_chain(path) -> ChainSpec:
    """Read and validate a chain JSON file."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ChainLoadError(f"cannot read chain file {path}: {exc}") from exc
    doc.setdefault("name", path.stem)
    return from_dict(doc)

