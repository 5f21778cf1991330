"""Command-line entry point: ``subgauss <subcommand> [options]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import ConfigError, parse_config, run_experiment, summarize, write_csv


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _common(p):
    p.add_argument("--seed", type=int, help="base seed; trial i uses seed + i")
    p.add_argument("--config", type=Path, help="JSON config; command-line flags override it")
    p.add_argument("--out", help="output directory (default: results)")
    p.add_argument("--threads", type=int, default=1, help="worker processes over trials")
    p.add_argument("--trials", type=int)


def _ensemble(p, default=None):
    p.add_argument("--ensemble", "--kind", dest="ensemble", default=default,
                   choices=["gaussian", "rademacher", "uniform"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subgauss", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ensemble-check", help="second moments and psi_2 along random directions")
    _common(p)
    _ensemble(p)
    p.add_argument("--n", type=_ints)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("width", help="Monte Carlo Gaussian mean width")
    _common(p)
    p.add_argument("--set", help="l1, l2, weaklp:P or sparse:M")
    p.add_argument("--n", type=_ints)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("rstar", help="fixed-point radius r*")
    _common(p)
    _ensemble(p)
    p.add_argument("--set")
    p.add_argument("--n", type=_ints)
    p.add_argument("--k", type=_ints)
    p.add_argument("--theta", type=_floats)
    p.add_argument("--alpha", type=float, help="psi_2 constant (default: the ensemble's)")
    p.add_argument("--c-norm", dest="c_norm", type=float)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("empirical", help="sup |Z_f| over the canonical basis")
    _common(p)
    _ensemble(p)
    p.add_argument("--n", type=_ints)
    p.add_argument("--kgrid", "--k", dest="k", type=_ints)

    p = sub.add_parser("recover", help="exact (basis pursuit) or approximate reconstruction trials")
    _common(p)
    _ensemble(p)
    p.add_argument("--mode", choices=["exact", "approx"])
    p.add_argument("--n", type=_ints)
    p.add_argument("--k", type=_ints)
    p.add_argument("--m", type=_ints)
    p.add_argument("--epsilon", type=_floats)
    p.add_argument("--max-iters", dest="max_iters", type=int)

    p = sub.add_parser("phase", help="basis-pursuit success rates over a (k, m) grid")
    _common(p)
    _ensemble(p)
    p.add_argument("--n", type=_ints)
    p.add_argument("--kgrid", "--k", dest="k", type=_ints)
    p.add_argument("--mgrid", "--m", dest="m", type=_ints)

    p = sub.add_parser("neighborly", help="face scan of K+(Gamma) or K(Gamma)")
    _common(p)
    _ensemble(p, None)
    p.add_argument("--n", type=_ints)
    p.add_argument("--k", type=_ints)
    p.add_argument("--m", type=_ints)
    p.add_argument("--symmetric", action="store_true", default=None)
    p.add_argument("--sampled", type=int, metavar="Q", help="check Q random queries instead of all")
    p.add_argument("--strict-lt", dest="strict_lt", action="store_true", default=None,
                   help="require faces only for fewer than m vertices")

    p = sub.add_parser("summarize", help="aggregate harness CSVs")
    p.add_argument("csv", nargs="+", type=Path)
    p.add_argument("--out", type=Path, help="output CSV (default: stdout)")
    p.add_argument("--slope-axis", default="k")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "summarize":
        try:
            header, rows = summarize(args.csv, args.slope_axis)
        except (OSError, ValueError) as exc:
            print(f"subgauss summarize: {exc}", file=sys.stderr)
            return 2
        write_csv(args.out or sys.stdout, header, rows, {"summary_of": len(args.csv)})
        return 0

    opts = vars(args).copy()
    for key in ("command", "config", "threads"):
        opts.pop(key, None)
    opts["experiment"] = args.command
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            print(f"subgauss: cannot read config: {exc}", file=sys.stderr)
            return 2
    try:
        cfg = parse_config(text, opts, expect=args.command)
    except ConfigError as exc:
        print(f"subgauss: {args.config or 'arguments'}: {exc}", file=sys.stderr)
        return 2
    try:
        paths = run_experiment(cfg, threads=max(1, args.threads))
    except Exception as exc:  # report and exit nonzero; partial outputs are already removed
        print(f"subgauss {args.command}: {exc}", file=sys.stderr)
        return 1
    for path in paths.values():
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
