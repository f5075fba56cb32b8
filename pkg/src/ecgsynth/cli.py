"""Command-line entry point.

Subcommands::

    generate --config PATH [--limit N] [--seed S] [--workers K]
             [--splits train,val,test] [--overwrite BOOL]
    stats    --output-root PATH
    validate --output-root PATH [--sample N]
    inspect  --record ID --output-root PATH

Exit codes: 0 success, 1 fatal configuration or I/O error, 2 the run
finished but some samples failed (or validation did not pass).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import read_config
from .errors import EcgSynthError
from .pipeline import ARTIFACTS, FatalRunError, run

EXIT_OK, EXIT_FATAL, EXIT_FAILURES = 0, 1, 2


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ecgsynth", description="Synthetic calibrated ECG page generator.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log per-record progress")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="render samples described by a config file")
    gen.add_argument("--config", required=True, type=Path)
    gen.add_argument("--limit", type=int)
    gen.add_argument("--seed", type=int, dest="global_seed")
    gen.add_argument("--workers", type=int)
    gen.add_argument("--splits", help="comma-separated subset of train,val,test")
    gen.add_argument("--overwrite", type=_bool, metavar="BOOL")

    st = sub.add_parser("stats", help="parameter distributions from metadata files")
    st.add_argument("--output-root", required=True, type=Path)

    val = sub.add_parser("validate", help="mask-to-signal round-trip check")
    val.add_argument("--output-root", required=True, type=Path)
    val.add_argument("--sample", type=int, help="validate only the first N samples")

    ins = sub.add_parser("inspect", help="print one sample's metadata and labels")
    ins.add_argument("--record", required=True)
    ins.add_argument("--output-root", required=True, type=Path)
    return parser


def cmd_generate(args) -> int:
    try:
        config = read_config(args.config).with_overrides(
            limit=args.limit, global_seed=args.global_seed, workers=args.workers,
            splits=args.splits, overwrite=args.overwrite)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_FATAL
    except EcgSynthError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    try:
        report = run(config)
    except FatalRunError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL
    print(report.summary())
    for failure in report.failures:
        print(f"failed {failure['record_id']}: {failure['error']}", file=sys.stderr)
    return EXIT_FAILURES if report.failed else EXIT_OK


def cmd_stats(args) -> int:
    from .validate import compute_stats
    if not args.output_root.is_dir():
        print(f"error: {args.output_root} is not a directory", file=sys.stderr)
        return EXIT_FATAL
    print(json.dumps(compute_stats(args.output_root), indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    from .validate import format_report, roundtrip_report
    if not args.output_root.is_dir():
        print(f"error: {args.output_root} is not a directory", file=sys.stderr)
        return EXIT_FATAL
    report = roundtrip_report(args.output_root, args.sample)
    print(format_report(report))
    return EXIT_OK if report["pass"] else EXIT_FAILURES


def cmd_inspect(args) -> int:
    for split in ("train", "val", "test"):
        meta = args.output_root / split / "metadata" / f"{args.record}.json"
        if meta.exists():
            break
    else:
        print(f"error: record {args.record} not found under {args.output_root}",
              file=sys.stderr)
        return EXIT_FATAL
    print(meta.read_text(encoding="utf-8"), end="")
    labels = args.output_root / split / "labels" / f"{args.record}.{ARTIFACTS['labels']}"
    if labels.exists():
        print(f"# {labels}")
        print(labels.read_text(encoding="ascii"), end="")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "stats": cmd_stats,
            "validate": cmd_validate, "inspect": cmd_inspect}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
