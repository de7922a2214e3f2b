"""``truthlab`` command line: reproduce bounds, check properties, run mechanisms.

Exit status: 0 when every report is CONFIRMED, 1 when any is VIOLATED,
2 when any is ERROR.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from typing import Sequence

from .core import parse_rational
from .loaders import load_domain, load_instance
from .reports import BOUND_IDS, CONFIRMED, CSV_COLUMNS, ERROR, MECHANISMS, PROPERTIES, Report, check, reproduce, run


def _rational(text: str) -> Fraction:
    try:
        value = parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truthlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def output_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--timing", action="store_true", help="include wall_ms in JSON output")
        p.add_argument("--omit-timing", action="store_true", help="leave the CSV wall_ms column empty")
        p.add_argument("--output", help="write the report here instead of stdout")

    rep = sub.add_parser("reproduce", help="reproduce a lower or upper bound")
    rep.add_argument("--bound", action="append", required=True, help=f"one of {', '.join(BOUND_IDS)}, or 'all'")
    rep.add_argument("--m", type=_positive_int)
    rep.add_argument("--epsilon", type=_rational)
    rep.add_argument("--c", type=_rational, help="approximation factor for the maxmin demo")
    rep.add_argument("--seed", type=int)
    rep.add_argument("--instances", type=_positive_int, help="size of random suites")
    rep.add_argument("--players", type=_positive_int)
    output_flags(rep)

    chk = sub.add_parser("check", help="check an incentive property on a type domain")
    chk.add_argument("--mechanism", required=True, help=f"one of {', '.join(MECHANISMS[:3])}")
    chk.add_argument("--property", required=True, dest="prop", help=f"one of {', '.join(PROPERTIES)}")
    chk.add_argument("--domain", required=True)
    output_flags(chk)

    rn = sub.add_parser("run", help="run one mechanism on an instance file")
    rn.add_argument("--mechanism", required=True, help=f"one of {', '.join(MECHANISMS)}")
    rn.add_argument("--instance", required=True)
    group = rn.add_mutually_exclusive_group()
    group.add_argument("--coins", help="one binary digit per task (randomized mechanism)")
    group.add_argument("--expected", action="store_true", help="report the full outcome distribution")
    output_flags(rn)
    return parser


def exit_code(reports: Sequence[Report]) -> int:
    if any(r.status == ERROR for r in reports):
        return 2
    if any(r.status != CONFIRMED for r in reports):
        return 1
    return 0


def render(reports: Sequence[Report], fmt: str, timing: bool, omit_timing: bool) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in reports:
            writer.writerow(r.csv_row(timing=not omit_timing))
        return buf.getvalue()
    payload = [r.to_json(timing=timing) for r in reports]
    return json.dumps(payload[0] if len(payload) == 1 else payload, indent=2, sort_keys=False) + "\n"


def _error(bound_id: str, params: dict, exc: Exception) -> Report:
    return Report(bound_id, params, reason=f"{type(exc).__name__}: {exc}")


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    reports: list[Report] = []
    if args.command == "reproduce":
        ids: list[str] = []
        for b in args.bound:
            ids.extend(BOUND_IDS if b == "all" else [b])
        for bound_id in ids:
            reports.append(
                reproduce(
                    bound_id,
                    m=args.m,
                    epsilon=args.epsilon,
                    c=args.c,
                    seed=args.seed,
                    instances=args.instances,
                    players=args.players,
                )
            )
    elif args.command == "check":
        try:
            domain = load_domain(args.domain)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            reports.append(_error(f"check:{args.mechanism}:{args.prop}", {"domain": args.domain}, exc))
        else:
            reports.append(check(args.mechanism, args.prop, domain, args.domain))
    else:
        try:
            inst = load_instance(args.instance)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            reports.append(_error(f"run:{args.mechanism}", {"instance": args.instance}, exc))
        else:
            reports.append(run(args.mechanism, inst, args.coins, args.expected, args.instance))

    text = render(reports, args.format, args.timing, args.omit_timing)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for r in reports:
        if r.status == ERROR:
            print(f"error: {r.bound_id}: {r.reason}", file=sys.stderr)
    return exit_code(reports)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
