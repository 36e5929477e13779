"""Command line: run scenarios, check recorded histories, compare EC variants."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import checker
from .harness import ALGORITHMS, DAP_NAMES, SCENARIOS, ScenarioParams, compare_dap_variants, run_scenario, write_outputs
from .netsim import MS, HistoryLog, LogFormatError

log = logging.getLogger("covstore")
MAX_FILE_SIZE = 64 << 20


def _add_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--servers", type=int, default=5)
    p.add_argument("--writers", type=int, default=2)
    p.add_argument("--readers", type=int, default=2)
    p.add_argument("--dap", choices=sorted(DAP_NAMES), default="ec")
    p.add_argument("--parity", type=int, default=None, help="EC parity m (k = n - m)")
    p.add_argument("--delta", type=int, default=None, help="EC list bound; defaults to the writer count")
    p.add_argument("--block-min", type=int, default=512 * 1024)
    p.add_argument("--block-avg", type=int, default=512 * 1024)
    p.add_argument("--block-max", type=int, default=1024 * 1024)
    p.add_argument("--file-size", type=int, default=1024 * 1024)
    p.add_argument("--file-sizes", type=str, default=None,
                   help="comma-separated sizes for the file-sizes scenario (default 1 MiB to 64 MiB, doubling)")
    p.add_argument("--ops", type=int, default=5, help="operations per client (at most 20)")
    p.add_argument("--edit-size", type=int, default=1024)
    p.add_argument("--time-unit-ms", type=float, default=1000.0,
                   help="length of one workload interval unit in virtual milliseconds")
    p.add_argument("--byte-cost", type=float, default=1.0, help="virtual ns per transmitted byte")
    p.add_argument("--algos", type=str, default=None, help=f"comma-separated subset of {', '.join(ALGORITHMS)}")
    p.add_argument("--no-trace", action="store_true", help="omit send/recv records from histories")


def _params(args) -> ScenarioParams:
    if args.ops > 20:
        raise SystemExit("--ops is capped at 20 per client")
    if args.writers + args.readers > 25:
        raise SystemExit("at most 25 clients")
    if not 1 <= args.servers <= 11:
        raise SystemExit("--servers must be between 1 and 11")
    extra = {}
    if args.file_sizes:
        extra["file_sizes"] = tuple(int(s) for s in args.file_sizes.split(","))
    if max((args.file_size, *extra.get("file_sizes", ()))) > MAX_FILE_SIZE:
        raise SystemExit("file sizes are capped at 64 MiB")
    if args.algos:
        names = tuple(a.strip() for a in args.algos.split(","))
        unknown = [a for a in names if a not in ALGORITHMS]
        if unknown:
            raise SystemExit(f"unknown algorithm(s): {', '.join(unknown)}")
        extra["algorithms"] = names
    return ScenarioParams(
        seed=args.seed, servers=args.servers, writers=args.writers, readers=args.readers,
        dap=args.dap, parity=args.parity, delta=args.delta, block_min=args.block_min,
        block_avg=args.block_avg, block_max=args.block_max, file_size=args.file_size,
        ops=args.ops, edit_size=args.edit_size, time_unit=int(args.time_unit_ms * MS),
        byte_cost=args.byte_cost, trace_messages=not args.no_trace, **extra)


def cmd_run(args) -> int:
    params = _params(args)
    results = run_scenario(args.scenario, params)
    out = write_outputs(results, args.out)
    failed = 0
    for r in results:
        status = "ok" if r.ok else "FAILED"
        print(f"{r.algorithm:14s} {r.label:28s} {status}  "
              f"update_bytes={r.metrics['update_bytes']} read_bytes={r.metrics['read_bytes']}")
        failed += not r.ok
    print(f"metrics and histories written to {out}")
    if failed:
        print(f"{failed} run(s) failed; see {out / 'violations.json'}", file=sys.stderr)
    return 1 if failed else 0


def cmd_check(args) -> int:
    try:
        history = HistoryLog.read(args.log)
        props = checker.PROPERTIES if args.property == "all" else (args.property,)
        verdicts = checker.check_all(history, props)
    except LogFormatError as exc:
        print(json.dumps({"error": "malformed log", "line": exc.line, "detail": str(exc)}))
        return 2
    bad = 0
    for prop, violations in verdicts.items():
        for v in violations:
            print(json.dumps(v.to_json(), sort_keys=True))
        bad += len(violations)
        log.info("%s: %d violation(s)", prop, len(violations))
    return 1 if bad else 0


def cmd_compare(args) -> int:
    report = compare_dap_variants(_params(args), fragmented=not args.whole_file)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["ok"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covstore", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario, check it and write metrics")
    run.add_argument("--scenario", choices=SCENARIOS, required=True)
    run.add_argument("--out", default="out")
    _add_params(run)
    run.set_defaults(func=cmd_run)

    check = sub.add_parser("check", help="verify a recorded history log")
    check.add_argument("log")
    check.add_argument("--property", choices=(*checker.PROPERTIES, "all"), default="all")
    check.set_defaults(func=cmd_check)

    compare = sub.add_parser("compare", help="optimized vs classic EC on one seeded workload")
    compare.add_argument("--whole-file", action="store_true", help="use non-fragmented objects")
    _add_params(compare)
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
