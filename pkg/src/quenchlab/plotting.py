"""
Figures for a finished run, written as PNG files next to the JSON reports.

Only the ``report`` path calls this; the library itself never plots.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

SERIES = ("maxwell_woodroofe", "conjrev", "condpf", "mixingale")


def _val(q):
    return np.asarray(q["value"], dtype=float)


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def sigma_figure(block: dict, path: Path) -> Path:
    grid, seq = _val(block["grid"]), _val(block["sigma_sq_sequence"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogx(grid, seq, "o-", base=2, label="finite-n sequence")
    ax.axhline(block["sigma_sq"]["value"], color="k", ls="--", lw=1, label="sigma^2")
    ax.set_xlabel("n")
    ax.set_ylabel("variance per step")
    ax.legend(frameon=False)
    return _save(fig, path)


def series_figure(block: dict, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for name in SERIES:
        terms = _val(block[name]["terms"])
        n = np.arange(1, len(terms) + 1) if name == "mixingale" else 2.0 ** np.arange(len(terms))
        keep = terms > 0
        if keep.any():
            ax.loglog(n[keep], terms[keep], ".-", label=f"{name} ({block[name]['verdict']})")
    ax.set_xlabel("n")
    ax.set_ylabel("summand")
    ax.legend(frameon=False, fontsize=7)
    return _save(fig, path)


def histogram_figure(block: dict, path: Path) -> Path:
    sig = block["sigma_sq"]["value"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, h in sorted(block["histograms"].items()):
        edges, counts = np.asarray(h["edges"]), np.asarray(h["counts"], dtype=float)
        dens = counts / (counts.sum() * np.diff(edges))
        ax.step(edges[:-1], dens, where="post", label=label)
    if sig > 0:
        x = np.linspace(-4 * np.sqrt(sig), 4 * np.sqrt(sig), 200)
        ax.plot(x, np.exp(-x**2 / (2 * sig)) / np.sqrt(2 * np.pi * sig), "k--", lw=1,
                label="N(0, sigma^2)")
    ax.set_xlabel("S_n / sqrt(n)")
    ax.set_ylabel("density")
    ax.legend(frameon=False, fontsize=7)
    return _save(fig, path)


def residual_figure(block: dict, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(block["block_sizes"], _val(block["residual_decay"]), "o-")
    ax.set_xscale("log")
    ax.set_yscale("symlog", linthresh=1e-6)
    ax.set_xlabel("block size m")
    ax.set_ylabel("max_x E^x(R_u^2) / u")
    return _save(fig, path)


def render_figures(bundle, out) -> list[Path]:
    """Write one PNG per available analysis into ``out/figures``."""
    fig_dir = Path(out) / "figures"
    fig_dir.mkdir(parents=True, exist_ok=True)
    res, made = bundle.results, []
    jobs = [("analyze", "sigma_sq", sigma_figure, "sigma_convergence.png"),
            ("criteria", SERIES[0], series_figure, "criteria_series.png"),
            ("quench", "histograms", histogram_figure, "quenched_histograms.png"),
            ("martingale", "residual_decay", residual_figure, "residual_decay.png")]
    for analysis, key, fn, fname in jobs:
        block = res.get(analysis, {})
        entry = block.get(key)
        if isinstance(entry, dict) and "skipped" not in entry:
            made.append(fn(block, fig_dir / fname))
    return made
