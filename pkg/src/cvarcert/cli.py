"""Benchmark command line.

    bench run --config cfg.json --scenario all --methods new,old-ngs \
              --reps 100 --seed 0 --out results/ --parallelism 4
    bench report --in results/ --format markdown

``run`` writes raw.csv, summary.md, and summary.csv into the output
directory; ``report`` re-aggregates an existing raw.csv.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from cvarcert.bench import (
    CLI_METHOD_NAMES,
    emit_report,
    load_raw_csv,
    run_benchmark,
    summarize,
)
from cvarcert.config import BenchmarkConfig


def _parse_methods(text: str) -> tuple[str, ...]:
    names = [part.strip() for part in text.split(",") if part.strip()]
    unknown = [name for name in names if name not in CLI_METHOD_NAMES]
    if unknown:
        raise argparse.ArgumentTypeError(
            f"unknown method(s) {unknown}; choose from {sorted(CLI_METHOD_NAMES)}"
        )
    return tuple(CLI_METHOD_NAMES[name] for name in names)


def _parse_scenarios(text: str) -> tuple[int, ...]:
    if text == "all":
        return (1, 2)
    if text in ("1", "2"):
        return (int(text),)
    raise argparse.ArgumentTypeError("scenario must be 1, 2, or all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the Monte Carlo benchmark")
    run.add_argument("--config", type=Path, default=None, help="JSON config (default: built-in)")
    run.add_argument("--scenario", type=_parse_scenarios, default=(1, 2), help="1, 2, or all")
    run.add_argument(
        "--methods",
        type=_parse_methods,
        default=("NEW", "OLD_NGS"),
        help="comma list of new,old-ngs,iw-cv,iw-plugin",
    )
    run.add_argument("--reps", type=int, default=100)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--parallelism", type=int, default=1)
    run.add_argument("--verbose", action="store_true")

    report = sub.add_parser("report", help="re-aggregate a finished run")
    report.add_argument("--in", dest="in_dir", type=Path, required=True)
    report.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR)
        config = BenchmarkConfig.from_file(args.config) if args.config else BenchmarkConfig()
        summary, _ = run_benchmark(
            config,
            reps=args.reps,
            methods=args.methods,
            scenarios=args.scenario,
            master_seed=args.seed,
            parallelism=args.parallelism,
            out_dir=args.out,
        )
        print(emit_report(summary, "markdown"))
        return 0

    raw = load_raw_csv(args.in_dir / "raw.csv")
    if not raw:
        print("no replications found in raw.csv", file=sys.stderr)
        return 1
    print(emit_report(summarize(raw), args.format))
    return 0


if __name__ == "__main__":
    sys.exit(main())
