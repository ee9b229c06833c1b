"""Command-line entry point.

Subcommands: run, compare, validate, list-models, list-filters.
Exit codes: 0 ok, 2 configuration error, 3 numeric failure. Failures also
emit a machine-readable error record on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import FILTER_KINDS, MODEL_IDS, parse_config
from .errors import ConfigError, NumericError
from .harness import compare_runs, run_experiment

OUTPUT_ROOT_ENV = "CEBAYES_OUT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cebayes",
        description="Twin experiments with conditional-expectation Bayesian filters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config and write a bundle")
    run_p.add_argument("config", help="path to a JSON experiment config")
    run_p.add_argument("--seed", type=int, default=None, help="override the master seed")
    run_p.add_argument("--out", default=None, help="bundle output directory")
    run_p.add_argument("--quiet", action="store_true", help="suppress the summary line")

    cmp_p = sub.add_parser("compare", help="compare two or more result bundles")
    cmp_p.add_argument("bundles", nargs="+", help="bundle directories")
    cmp_p.add_argument("--out", default=None, help="write the comparison CSV here")
    cmp_p.add_argument("--quiet", action="store_true")

    val_p = sub.add_parser("validate", help="validate a config without running it")
    val_p.add_argument("config")

    sub.add_parser("list-models", help="print the built-in model ids")
    sub.add_parser("list-filters", help="print the available filter kinds")
    return parser


def _load_config(path: str, seed_override=None):
    text = Path(path).read_text()
    if seed_override is not None:
        doc = json.loads(text)
        doc["seed"] = seed_override
        text = json.dumps(doc, indent=2, sort_keys=True)
    return parse_config(text)


def _default_out_dir(config) -> Path:
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return Path(root) / config.config_hash()[:12]


def _comparison_csv(table: dict) -> str:
    rows = table["analysis"]
    if not rows:
        return "time,component\n"
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            str(row[k]) if isinstance(row[k], int) else f"{row[k]:.17g}"
            for k in header
        ))
    for pdf_row in table["pdf_l1"]:
        lines.append(f"# pdf_l1,{pdf_row['pdf']},{pdf_row['bundle']},{pdf_row['l1_distance']:.17g}")
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _load_config(args.config, args.seed)
            out_dir = args.out or config.output.directory or _default_out_dir(config)
            run_experiment(config, out_dir=out_dir, quiet=args.quiet)
            return 0
        if args.command == "compare":
            table = compare_runs(args.bundles)
            text = _comparison_csv(table)
            if args.out:
                Path(args.out).write_text(text)
                if not args.quiet:
                    print(f"wrote {args.out}")
            else:
                sys.stdout.write(text)
            return 0
        if args.command == "validate":
            _load_config(args.config)
            print("ok")
            return 0
        if args.command == "list-models":
            for model_id in MODEL_IDS:
                print(model_id)
            return 0
        if args.command == "list-filters":
            for kind in FILTER_KINDS:
                print(kind)
            return 0
        raise AssertionError("unreachable")
    except ConfigError as exc:
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except NumericError as exc:
        json.dump({"error": {"type": type(exc).__name__, "message": str(exc)}}, sys.stderr)
        sys.stderr.write("\n")
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
