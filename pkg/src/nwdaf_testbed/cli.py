"""Command line: ``run``, ``report`` and ``train-eval``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import harness
from .predictor import capabilities, parse_kind
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
CORRUPT_LIMIT = 0.01


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nwdaf-testbed", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write logs, reports and evaluation")
    p.add_argument("--scenario", required=True, help="scenario YAML, or a bundled name (default, cyclic)")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--transport", choices=("inproc", "tcp"))
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float, dest="duration_s", help="override simulated seconds")

    p = sub.add_parser("report", help="analytics CSVs from an NDJSON event log")
    p.add_argument("--log", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("train-eval", help="train and evaluate next-cell predictors on a log")
    p.add_argument("--log", required=True, type=Path)
    p.add_argument("--models", default="dt,knn", help="comma list of dt, knn, gb, rf")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--cells", type=Path, help="cell layout JSON (default: cells.json beside the log)")
    p.add_argument("--chronological", action="store_true", help="split by time instead of at random")
    p.add_argument("--no-supi", action="store_true", help="drop the SUPI feature")
    p.add_argument("--out", type=Path, help="write the evaluation JSON here")
    return parser


def _cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario, seed=args.seed, transport=args.transport, duration_s=args.duration_s)
    except ScenarioError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = harness.run(scenario, args.out)
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).exception("run failed")
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"ticks={summary.ticks} emitted={summary.emitted_total} collected={summary.events_collected} "
          f"dispatched={summary.dispatch_total} failures={summary.notification_failures} "
          f"wall={summary.runtime_wall_s:.1f}s")
    print(f"artifacts in {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    if not args.log.exists():
        print(f"config error: no such log {args.log}", file=sys.stderr)
        return EXIT_CONFIG
    outcome = harness.report(args.log, args.out)
    print(f"{outcome.n_events} events, {outcome.corrupt} corrupt lines; reports in {args.out}")
    if outcome.corrupt_fraction > CORRUPT_LIMIT:
        print(f"runtime error: {outcome.corrupt_fraction:.1%} of lines are corrupt", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_train_eval(args) -> int:
    try:
        kinds = [parse_kind(k) for k in args.models.split(",") if k.strip()]
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not args.log.exists():
        print(f"config error: no such log {args.log}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = harness.train_eval(
            args.log, kinds, args.split_seed, args.cells,
            strategy="chronological" if args.chronological else "random",
            include_supi=not args.no_supi,
        )
    except harness.DatasetTooSmall as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"rows={result.n_rows} train={result.n_train} test={result.n_test} "
          f"(capabilities: {', '.join(sorted(k.value for k in capabilities()))})")
    print(result.table())
    if args.out:
        from .domain import canonical_json

        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(canonical_json(result.to_json()) + "\n")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    handlers = {"run": _cmd_run, "report": _cmd_report, "train-eval": _cmd_train_eval}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
