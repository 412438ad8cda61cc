"""
Batch runs: manifest in, JSON reports and CSV tables out.

Every reported quantity is a dict ``{"value", "provenance"}`` where the
provenance names the producing module, the grid used and the kind of
number (``exact``, ``extrapolated`` or ``monte-carlo``; the latter also
carries ``se``).  Timings are written to a separate ``timings.json`` so the
numeric reports are byte-identical across reruns with the same seed.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
import warnings
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .catalog import get_chain
from .chain import ChainSpec, ergodicity_report, load_chain
from .criteria import (
    check_conjrev,
    check_condpf,
    check_maxwell_woodroofe,
    check_mixingale,
    check_neglipf,
    check_quenched_moments,
    check_varsup,
    dyadic_table,
)
from .errors import BadManifest, GuardExceeded, TooLarge
from .martingale import (
    martingale_variance,
    residual_decay,
    verify_bound_lemma3,
    verify_dyadic_bound_lemma2,
    verify_martingale_property,
    verify_orthogonality_identity,
)
from .projective import MAX_HORIZON, poisson_oracle, sigma_sq
from .quenched import SimConfig, martingale_clt_check, quenched_clt_check

ANALYSES = ("validate", "analyze", "criteria", "martingale", "quench", "bounds")
OUT_ENV = "QUENCHLAB_OUT"
DEFAULT_OUT = "quenchlab-out"
LEMMA2_MAX = 2**14
ENUM_U = 4


@dataclass(frozen=True)
class RunManifest:
    """What to run and where to write it.

    Exactly one of ``chain`` (path to a chain JSON file) and ``catalog`` (a
    built-in name) must be set.
    """

    chain: Optional[str] = None
    catalog: Optional[str] = None
    analyses: tuple = ANALYSES
    n_max: int = 2**16
    k_max: int = 64
    m: tuple = (1, 2, 5)
    horizon: int = 1024
    replicas: int = 10_000
    seed: int = 0
    workers: int = 1
    out: str = ""
    figures: bool = False

    def __post_init__(self):
        object.__setattr__(self, "analyses", tuple(self.analyses))
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))
        if not self.out:
            object.__setattr__(self, "out", os.environ.get(OUT_ENV, DEFAULT_OUT))

    @classmethod
    def from_dict(cls, doc: dict) -> "RunManifest":
        known = {f.name for f in fields(cls)}
        extra = set(doc) - known
        if extra:
            raise BadManifest(f"unknown manifest fields: {sorted(extra)}")
        try:
            return cls(**doc)
        except (TypeError, ValueError) as exc:
            raise BadManifest(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise BadManifest(f"cannot read manifest {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise BadManifest("manifest must be a JSON object")
        return cls.from_dict(doc)

    def validate(self) -> None:
        """Raise BadManifest or GuardExceeded if the manifest cannot run."""
        if (self.chain is None) == (self.catalog is None):
            raise BadManifest("set exactly one of chain and catalog")
        bad = [a for a in self.analyses if a not in ANALYSES]
        if bad or not self.analyses:
            raise BadManifest(f"unknown or empty analyses {bad}; choose from {ANALYSES}")
        for name in ("n_max", "horizon"):
            v = getattr(self, name)
            if v > MAX_HORIZON:
                raise GuardExceeded(f"{name} = {v} exceeds {MAX_HORIZON}")
        if self.n_max < 8:
            raise BadManifest("n_max must be >= 8")
        if self.horizon < 1:
            raise BadManifest("horizon must be >= 1")
        if not 4 <= self.k_max <= MAX_HORIZON:
            raise GuardExceeded(f"k_max = {self.k_max} outside [4, {MAX_HORIZON}]")
        if not self.m or min(self.m) < 1 or max(self.m) > self.horizon:
            raise BadManifest(f"block sizes {self.m} must lie in [1, horizon]")
        if self.replicas < 100:
            raise BadManifest("replicas must be >= 100")
        if not 0 <= self.seed < 2**64:
            raise BadManifest("seed must fit in 64 bits")
        if self.workers < 1:
            raise BadManifest("workers must be >= 1")
        out = Path(self.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise BadManifest(f"cannot create output directory {out}: {exc}") from exc
        if not os.access(out, os.W_OK):
            raise BadManifest(f"output directory {out} is not writable")

    def load_spec(self) -> ChainSpec:
        if self.catalog is not None:
            return get_chain(self.catalog)
        return load_chain(self.chain)


@dataclass
class ReportBundle:
    manifest: dict
    versions: dict
    chain: dict
    results: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    files: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 1 if self.errors else 0


# --- serialization helpers ------------------------------------------------

def jsonable(obj):
    """Plain-Python copy of ``obj``; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def qty(value, kind: str, module: str, grid: Optional[dict] = None, se=None) -> dict:
    prov = {"kind": kind, "module": f"quenchlab.{module}", "grid": grid or {}}
    if se is not None:
        prov["se"] = se
    return {"value": value, "provenance": prov}


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


# --- analyses ---------------------------------------------------------------

def _validate(spec: ChainSpec, man: RunManifest, out: Path):
    rep = ergodicity_report(spec)
    Q = spec.kernel
    block = {
        "d": qty(spec.d, "exact", "chain"),
        "stationary": qty(spec.stationary, "exact", "chain"),
        "variance": qty(spec.variance, "exact", "chain"),
        "max_row_error": qty(float(np.abs(Q.sum(axis=1) - 1).max()), "exact", "chain"),
        "stationarity_error": qty(float(np.abs(spec.stationary @ Q - spec.stationary).max()),
                                  "exact", "chain"),
        "irreducible": qty(rep.irreducible, "exact", "chain"),
        "period": qty(rep.period, "exact", "chain"),
        "totally_ergodic": qty(rep.totally_ergodic, "exact", "chain"),
        "reversible": qty(rep.reversible, "exact", "chain"),
    }
    return block, []


def _analyze(spec: ChainSpec, man: RunManifest, out: Path):
    grid = {"n_max": man.n_max}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sig = sigma_sq(spec, man.n_max)
        oracle = poisson_oracle(spec)
    t = dyadic_table(spec, man.n_max)
    kind = "extrapolated" if sig.method in ("richardson", "cesaro") else "exact"
    block = {
        "sigma_sq": qty(sig.value, kind, "projective", grid),
        "sigma_sq_method": sig.method,
        "sigma_sq_raw": qty(sig.raw_value, kind, "projective", grid),
        "poisson_oracle": qty(oracle, "exact", "projective"),
        "grid": qty(t.grid, "exact", "projective", grid),
        "sigma_sq_sequence": qty(sig.per_n, "exact", "projective", grid),
        "annealed_second_moment": qty(t.annealed, "exact", "projective", grid),
        "bridge_norm_sq": qty(t.bridge, "exact", "projective", grid),
        "past_norm_sq": qty(t.past, "exact", "projective", grid),
        "per_state_second_moment": qty(t.per_state_m2, "exact", "projective", grid),
    }
    path = out / "analyze_series.csv"
    _write_csv(path, ["n", "annealed", "bridge", "past", "sigma_seq"],
               zip(t.grid.tolist(), t.annealed, t.bridge, t.past, sig.per_n))
    return block, [path]


def _criteria(spec: ChainSpec, man: RunManifest, out: Path):
    grid = {"n_max": man.n_max}
    t = dyadic_table(spec, man.n_max)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sig = sigma_sq(spec, man.n_max).value
    block, rows = {}, []
    for diag in (check_varsup(spec, man.n_max, table=t), check_neglipf(spec, man.n_max, table=t)):
        block[diag.name] = {
            "verdict": diag.verdict,
            "values": qty(diag.values, "exact", "criteria", grid),
            "extrapolated_limit": qty(diag.extrapolated_limit, "extrapolated", "criteria", grid),
            "fitted_exponent": qty(diag.fitted_exponent, "extrapolated", "criteria", grid),
        }
        rows += [(diag.name, int(n), v, "", "") for n, v in zip(diag.grid, diag.values)]
    series = [check_maxwell_woodroofe(spec, man.n_max, table=t),
              check_conjrev(spec, man.n_max, table=t),
              check_condpf(spec, man.n_max, table=t)]
    mix = check_mixingale(spec, man.k_max)
    for s in series + [mix]:
        g = {"k_max": man.k_max} if s is mix else grid
        block[s.name] = {
            "verdict": s.verdict,
            "terms": qty(s.terms, "exact", "criteria", g),
            "partial_sums": qty(s.partial_sums, "exact", "criteria", g),
            "fitted_exponent": qty(s.fitted_exponent, "extrapolated", "criteria", g),
        }
        rows += [(s.name, int(n), a, b, c)
                 for n, a, b, c in zip(s.grid, s.terms, s.block_terms, s.partial_sums)]
    qm = check_quenched_moments(spec, man.n_max, sig, table=t)
    block["quenched_moments"] = {
        "sigma_sq": qty(qm.sigma_sq, "extrapolated", "projective", grid),
        "tol": qty(qm.tol, "exact", "criteria"),
        "per_state_limsup": qty(qm.per_state_limsup, "exact", "criteria", grid),
        "per_state_limit_gap": qty(qm.per_state_limit_gap, "extrapolated", "criteria", grid),
        "per_state_oscillation": qty(qm.per_state_oscillation, "exact", "criteria", grid),
        "condition_a": qm.condition_a,
        "condition_b": qm.condition_b,
    }
    path = out / "criteria_series.csv"
    _write_csv(path, ["series", "n", "term", "block_term", "partial_sum"], rows)
    return block, [path]


def _martingale(spec: ChainSpec, man: RunManifest, out: Path):
    u = max(1, man.horizon // max(man.m))
    block = {"block_sizes": list(man.m), "u": u, "per_m": {}}
    try:
        dec = residual_decay(spec, man.m, u)
        block["residual_decay"] = qty(dec.values, "exact", "martingale",
                                      {"m": list(man.m), "u": u})
        rows = [(int(m), u, v) for m, v in zip(dec.m_grid, dec.values)]
    except TooLarge as exc:
        block["residual_decay"] = {"skipped": str(exc)}
        rows = []
    for m in man.m:
        entry = {"variance": qty(martingale_variance(spec, m), "exact", "martingale", {"m": m})}
        uu = ENUM_U
        try:
            mp = verify_martingale_property(spec, m, uu)
            oi = verify_orthogonality_identity(spec, m, uu)
            g = {"m": m, "u": uu}
            entry["martingale_property"] = qty(mp, "exact", "martingale", g)
            entry["orthogonality_residual"] = qty(oi.max, "exact", "martingale", g)
            entry["path_identity_residual"] = qty(oi.path_identity_max, "exact", "martingale", g)
        except TooLarge as exc:
            entry["enumeration"] = {"skipped": str(exc)}
        block["per_m"][str(m)] = entry
    path = out / "martingale_residual.csv"
    _write_csv(path, ["m", "u", "residual_sq_over_u"], rows)
    return block, [path]


def _row_block(r, grid):
    return {
        "label": r.label,
        "mean": qty(r.mean, "monte-carlo", "quenched", grid, se=r.stderr),
        "variance": qty(r.variance, "monte-carlo", "quenched", grid),
        "second_moment": qty(r.second_moment, "monte-carlo", "quenched", grid,
                             se=r.second_moment_se),
        "ks": qty(r.ks, "monte-carlo", "quenched", grid),
        "passed": r.passed,
        "degenerate_mismatch": r.degenerate_mismatch,
    }


def _quench(spec: ChainSpec, man: RunManifest, out: Path):
    n = man.horizon
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sig = sigma_sq(spec, min(man.n_max, 2**12)).value
        cfg = SimConfig(n=n, replicas=man.replicas, seed=man.seed)
        rep = quenched_clt_check(spec, cfg, sig, workers=man.workers)
        grid = {"n": n, "replicas": man.replicas, "seed": man.seed}
        block = {
            "sigma_sq": qty(sig, "extrapolated", "projective", {"n_max": min(man.n_max, 2**12)}),
            "ks_tol": qty(rep.ks_tol, "exact", "quenched", grid),
            "passed": rep.passed,
            "centered_passed": rep.centered_passed,
            "per_state": [_row_block(r, grid) for r in rep.per_state],
            "centered": [_row_block(r, grid) for r in rep.centered],
            "annealed": _row_block(rep.annealed, grid) if rep.annealed else None,
            "ui_M_grid": list(rep.ui_M_grid),
            "ui_table": qty(rep.ui_table, "monte-carlo", "quenched", grid, se=rep.ui_stderr),
            "martingale": {},
        }
        for m in man.m:
            v = martingale_variance(spec, m)
            rows = martingale_clt_check(spec, m, cfg, v, workers=man.workers)
            block["martingale"][str(m)] = {
                "variance": qty(v, "exact", "martingale", {"m": m}),
                "rows": [_row_block(r, {**grid, "m": m}) for r in rows],
                "passed": all(r.passed for r in rows),
            }
    ui_path = out / "quench_ui.csv"
    starts = [r.label for r in rep.per_state]
    _write_csv(ui_path, ["start", "M", "value", "stderr"],
               [(s, M, rep.ui_table[i, j], rep.ui_stderr[i, j])
                for i, s in enumerate(starts) for j, M in enumerate(rep.ui_M_grid)])
    h_path = out / "quench_hist.csv"
    hrows = []
    for label, (counts, edges) in rep.histograms.items():
        hrows += [(label, edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))]
    _write_csv(h_path, ["start", "left", "right", "count"], hrows)
    block["histograms"] = {k: {"edges": e, "counts": c} for k, (c, e) in rep.histograms.items()}
    return block, [ui_path, h_path]


def _bounds(spec: ChainSpec, man: RunManifest, out: Path):
    N = 1 << (min(man.n_max, LEMMA2_MAX).bit_length() - 1)
    l2 = verify_dyadic_bound_lemma2(spec, N)
    g = {"N": N}
    block = {"lemma2": {
        "lhs": qty(l2.lhs, "exact", "martingale", g),
        "rhs": qty(l2.rhs, "exact", "martingale", g),
        "holds": l2.holds,
        "dyadic_terms": qty(l2.dyadic_terms, "exact", "martingale", g),
        "tail_estimate": qty(l2.tail_estimate, "extrapolated", "martingale", g),
    }, "lemma3": {}}
    rows = [("lemma2", 2**k, t) for k, t in enumerate(l2.dyadic_terms)]
    N3 = min(man.n_max, 2**10)
    for m in man.m:
        try:
            l3 = verify_bound_lemma3(spec, m, N3)
        except TooLarge as exc:
            block["lemma3"][str(m)] = {"skipped": str(exc)}
            continue
        g3 = {"m": m, "N": N3}
        block["lemma3"][str(m)] = {
            "lhs": qty(l3.lhs, "exact", "martingale", g3),
            "second_moment": qty(l3.second_moment, "exact", "martingale", g3),
            "rhs_series": qty(l3.rhs_series, "exact", "martingale", g3),
            "empirical_constant": qty(l3.empirical_constant, "exact", "martingale", g3),
        }
    path = out / "bounds_lemma2.csv"
    _write_csv(path, ["bound", "n", "term"], rows)
    return block, [path]


_RUNNERS = {
    "validate": _validate,
    "analyze": _analyze,
    "criteria": _criteria,
    "martingale": _martingale,
    "quench": _quench,
    "bounds": _bounds,
}


def versions() -> dict:
    import scipy

    return {"quenchlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(manifest: RunManifest) -> ReportBundle:
    """Run every requested analysis and persist the reports.

    Manifest and chain errors propagate.  An analysis that raises is recorded
    under ``errors`` and makes ``exit_code`` nonzero; verdicts never do.
    """
    manifest.validate()
    spec = manifest.load_spec()
    out = Path(manifest.out)
    bundle = ReportBundle(manifest=asdict(manifest), versions=versions(), chain=spec.to_dict())
    for name in ANALYSES:
        if name not in manifest.analyses:
            continue
        t0 = time.perf_counter()
        try:
            block, paths = _RUNNERS[name](spec, manifest, out)
        except Exception as exc:  # recorded, not raised: see exit_code
            bundle.errors[name] = f"{type(exc).__name__}: {exc}"
            block, paths = {"error": bundle.errors[name]}, []
        bundle.timings[name] = time.perf_counter() - t0
        bundle.results[name] = block
        report = out / f"{name}.json"
        report.write_text(dumps({"analysis": name, "chain": spec.name, "result": block}))
        bundle.files += [report, *paths]
    if manifest.figures:
        from .plotting import render_figures

        bundle.files += render_figures(bundle, out)
    summary = out / "report.json"
    summary.write_text(dumps({"manifest": _manifest_echo(manifest), "versions": bundle.versions,
                              "chain": bundle.chain, "errors": bundle.errors,
                              "results": bundle.results}))
    (out / "timings.json").write_text(dumps(bundle.timings))
    bundle.files += [summary, out / "timings.json"]
    return bundle


def _manifest_echo(manifest: RunManifest) -> dict:
    # worker count and output location do not change the numbers
    echo = asdict(manifest)
    echo.pop("workers")
    echo.pop("out")
    return echo
