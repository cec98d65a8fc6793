"""Command line interface: run experiments, re-emit reports, audit artifacts."""

from __future__ import annotations

import argparse
import sys

from .pipeline import (ExperimentConfig, StageError, emit_report, load_report,
                       run_experiment, verify_artifacts)

MODEL_ALIASES = {
    "forest": "forest",
    "gb1": "gbdt_first_order",
    "gb2": "gbdt_second_order_xgb_like",
    "goss": "gbdt_second_order_goss_like",
    "oblivious": "gbdt_oblivious_like",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wineqc",
                                     description="Leakage-free wine-quality benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a full experiment")
    run.add_argument("--data", required=True, help="path to the wine CSV")
    run.add_argument("--color", required=True, choices=["red", "white"])
    run.add_argument("--model", required=True, choices=sorted(MODEL_ALIASES))
    run.add_argument("--trials", type=int, default=30)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--no-prune", action="store_true")
    run.add_argument("--phase", choices=["full", "selected", "both"], default="both")
    run.add_argument("--folds", type=int, default=5)
    run.add_argument("--test-fraction", type=float, default=0.2)

    rep = sub.add_parser("report", help="re-emit report files from report.json")
    rep.add_argument("--in", dest="in_dir", required=True)
    rep.add_argument("--format", choices=["csv", "json", "md"], default="md")

    aud = sub.add_parser("audit", help="re-verify leakage invariants from artifacts")
    aud.add_argument("--in", dest="in_dir", required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "run":
        config = ExperimentConfig(
            data_path=args.data,
            color=args.color,
            model_family=MODEL_ALIASES[args.model],
            trials=args.trials,
            folds=args.folds,
            test_fraction=args.test_fraction,
            seed=args.seed,
            out_dir=args.out,
            jobs=args.jobs,
            prune=not args.no_prune,
            phase=args.phase,
        )
        try:
            report = run_experiment(config)
            written = emit_report(report, args.out)
        except StageError as exc:
            print(f"error {exc}", file=sys.stderr)
            return 1
        for path in written:
            print(path)
        return 0

    if args.command == "report":
        fmt = {"md": "markdown"}.get(args.format, args.format)
        try:
            report = load_report(args.in_dir)
            written = emit_report(report, args.in_dir, formats=(fmt,))
        except Exception as exc:
            print(f"error [stage=report] {exc}", file=sys.stderr)
            return 1
        for path in written:
            print(path)
        return 0

    if args.command == "audit":
        failures = verify_artifacts(args.in_dir)
        if failures:
            for f in failures:
                print(f"FAIL: {f}", file=sys.stderr)
            return 1
        print("audit clean: leakage invariants hold")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
