"""Command-line front end: ``quenchlab <subcommand> [options]``."""

from __future__ import annotations

import argparse
import sys

from .catalog import catalog, describe
from .errors import QuenchLabError
from .report import ANALYSES, DEFAULT_OUT, OUT_ENV, RunManifest, run


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quenchlab",
                                description="Exact and Monte Carlo diagnostics for "
                                            "finite-state stationary Markov chains.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("catalog", help="list built-in chains")
    for name in ANALYSES + ("report",):
        sp = sub.add_parser(name, help="run all analyses and render figures" if name == "report"
                            else f"run the {name} analysis")
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--chain", help="chain-spec JSON file")
        src.add_argument("--catalog", help="built-in chain name")
        sp.add_argument("--manifest", help="manifest JSON; command-line flags override it")
        sp.add_argument("--n-max", type=int, dest="n_max")
        sp.add_argument("--k-max", type=int, dest="k_max")
        sp.add_argument("--m", type=_ints, help="block sizes, e.g. 1,2,5")
        sp.add_argument("--horizon", type=int, help="Monte Carlo horizon n")
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or {DEFAULT_OUT})")
        if name == "report":
            sp.add_argument("--no-figures", action="store_true")
    return p


def manifest_from_args(args) -> RunManifest:
    doc = {}
    if args.manifest:
        from dataclasses import asdict

        doc = asdict(RunManifest.load(args.manifest))
        if args.chain is not None or args.catalog is not None:
            doc["chain"] = doc["catalog"] = None
    for key in ("chain", "catalog", "n_max", "k_max", "m", "horizon", "replicas", "seed",
                "workers", "out"):
        v = getattr(args, key)
        if v is not None:
            doc[key] = v
    if args.command == "report":
        doc["analyses"] = ANALYSES
        doc["figures"] = not args.no_figures
    else:
        doc["analyses"] = (args.command,)
    return RunManifest.from_dict(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "catalog":
        for name in catalog():
            print(f"{name}\t{describe(name)}")
        return 0
    try:
        bundle = run(manifest_from_args(args))
    except QuenchLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for name, block in bundle.results.items():
        status = "error" if name in bundle.errors else "ok"
        print(f"{name}\t{status}\t{bundle.timings[name]:.2f}s")
    for path in bundle.files:
        print(f"wrote\t{path}")
    for name, msg in bundle.errors.items():
        print(f"error: {name}: {msg}", file=sys.stderr)
    return bundle.exit_code


if __name__ == "__main__":
    sys.exit(main())
