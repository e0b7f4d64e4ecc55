"""Command-line front end: ``ospfmc run <file>`` and ``ospfmc batch <dir>``."""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from .checker import Verdict
from .scenario import PropertyReport, ScenarioError, effective_limits, evaluate, load_scenario

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INVALID = 2
EXIT_INCONCLUSIVE = 3

HEADER = ("scenario", "property", "quantifier", "verdict", "expect", "states", "time_s")


def _row(rep: PropertyReport, timing: bool) -> tuple[str, ...]:
    expect = rep.expect or "-"
    if rep.expect is not None and not rep.matched:
        expect += " MISMATCH"
    row = (rep.scenario, rep.name, rep.quantifier, rep.verdict.value, expect, str(rep.states))
    return row + ((f"{rep.seconds:.2f}",) if timing else ())


def format_table(rows: list[tuple[str, ...]], timing: bool) -> str:
    header = HEADER if timing else HEADER[:-1]
    table = [header] + rows
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in table]
    return "\n".join(lines) + "\n"


def exit_code(reports: Sequence[PropertyReport]) -> int:
    if any(r.verdict is Verdict.INCONCLUSIVE for r in reports):
        return EXIT_INCONCLUSIVE
    if any(not r.matched for r in reports):
        return EXIT_MISMATCH
    return EXIT_OK


def write_traces(reports: Sequence[PropertyReport], trace_dir: Path) -> list[Path]:
    trace_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for rep in reports:
        if rep.trace is None:
            continue
        path = trace_dir / f"{rep.scenario}.{rep.name}.trace"
        header = {"scenario": rep.scenario, "property": rep.name, "quantifier": rep.quantifier}
        path.write_text(rep.trace.to_text(header), encoding="utf-8")
        written.append(path)
    return written


def _run_file(path: str, prop: Optional[str], max_states: Optional[int], max_seconds: Optional[float]):
    scenario = load_scenario(path)
    limits = effective_limits(scenario, max_states, max_seconds)
    reports = evaluate(scenario, prop, limits)
    for r in reports:
        # graphs and systems do not need to cross process boundaries
        r.result = None
        r.system = None
    return reports


def cmd_run(args) -> int:
    try:
        reports = _run_file(args.file, args.property, args.max_states, args.max_seconds)
    except ScenarioError as exc:
        print(f"error: {args.file}:{exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.property is not None:
        reports = [r for r in reports if r.name == args.property]
    timing = not args.no_timing
    sys.stdout.write(format_table([_row(r, timing) for r in reports], timing))
    trace_dir = Path(args.trace_dir) if args.trace_dir else Path(args.file).resolve().parent
    for p in write_traces(reports, trace_dir):
        print(f"trace: {p}")
    return exit_code(reports)


def cmd_batch(args) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        print(f"error: {directory} is not a directory", file=sys.stderr)
        return EXIT_INVALID
    files = sorted(str(p) for p in directory.glob("*.json"))
    jobs = max(1, args.jobs)
    results: dict[str, object] = {}
    if jobs == 1 or len(files) <= 1:
        for f in files:
            results[f] = _safe_run(f, args.max_states, args.max_seconds)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {f: pool.submit(_safe_run, f, args.max_states, args.max_seconds) for f in files}
            for f, fut in futures.items():
                results[f] = fut.result()
    timing = not args.no_timing
    rows = []
    reports: list[PropertyReport] = []
    invalid = False
    for f in files:
        res = results[f]
        if isinstance(res, str):
            print(f"error: {f}:{res}", file=sys.stderr)
            invalid = True
            continue
        reports.extend(res)
        rows.extend(_row(r, timing) for r in res)
    sys.stdout.write(format_table(rows, timing))
    if args.trace_dir:
        write_traces(reports, Path(args.trace_dir))
    if invalid:
        return EXIT_INVALID
    return exit_code(reports)


def _safe_run(path: str, max_states, max_seconds):
    try:
        return _run_file(path, None, max_states, max_seconds)
    except ScenarioError as exc:
        return str(exc)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ospfmc", description="OSPF explicit-state model checker")
    sub = parser.add_subparsers(dest="command", required=True)

    def limits(p):
        p.add_argument("--max-states", type=int, default=None)
        p.add_argument("--max-seconds", type=float, default=None)
        p.add_argument("--trace-dir", default=None, help="where witness/counterexample traces are written")
        p.add_argument("--no-timing", action="store_true", help="omit the wall-time column")

    run = sub.add_parser("run", help="check the properties of one scenario file")
    run.add_argument("file")
    run.add_argument("--property", default=None, help="only this property (and what it builds on)")
    limits(run)
    run.set_defaults(func=cmd_run)

    batch = sub.add_parser("batch", help="check every *.json scenario in a directory")
    batch.add_argument("dir")
    batch.add_argument("--jobs", type=int, default=1)
    limits(batch)
    batch.set_defaults(func=cmd_batch)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
