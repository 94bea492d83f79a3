#!/usr/bin/env python3
"""
Command-line interface for Puiseux expansions over monomial valuations.

Reads a document from a file or stdin, runs its command and writes the result
as text, JSON or SVG. Exit codes: 0 ok, 2 parse error, 3 math-domain error,
4 budget exhausted.
"""

import argparse
import json
import logging
import os
import sys

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.batch_runner import run_batch, summary_frame, write_outputs
from src.config import SolverConfig
from src.document_parser import COMMANDS, FORMATS, parse, run, serialize
from src.errors import PuiseuxError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="puiseux", description="Puiseux roots over monomial valuations")
    parser.add_argument("input", nargs="?", help="Document file (stdin when omitted)")
    parser.add_argument("--cmd", choices=COMMANDS, help="Command, overriding the document's")
    parser.add_argument("--precision", help="Requested precision (rational)")
    parser.add_argument("--seed", type=int, help="Seed for randomized choices")
    parser.add_argument("--format", choices=FORMATS, default="text", help="Output format")
    parser.add_argument("--weights", help="Weight specification, overriding the document's")
    parser.add_argument("--scale-nonmonic", action="store_true", help="Accept non-monic input by scaling")
    parser.add_argument("--budget", type=int, help="Search budget for integer weight approximation")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--output", help="Output file (directory in batch mode)")
    parser.add_argument("--batch", nargs="+", metavar="PATH", help="Run several documents or directories")
    parser.add_argument("--verbose", action="store_true", help="Debug logging on stderr")
    return parser


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def status(message: str, fmt: str) -> None:
    """Human status line on stderr, text mode only."""
    if fmt == "text":
        print(message, file=sys.stderr)


def _overrides(args) -> dict:
    return {
        "command": args.cmd,
        "precision": args.precision,
        "seed": args.seed,
        "weights": args.weights,
        "scale_nonmonic": True if args.scale_nonmonic else None,
    }


def _run_batch(args, config: SolverConfig) -> int:
    status(f"🚀 Batch run over {len(args.batch)} source(s)", args.format)
    try:
        items = run_batch(args.batch, config, args.format, _overrides(args))
    except FileNotFoundError as e:
        status(f"❌ {e}", args.format)
        return 2
    if args.output:
        summary_path = write_outputs(items, args.output, args.format)
        status(f"📊 Summary written to {summary_path}", args.format)
    else:
        for item in items:
            if item.exit_code == 0:
                sys.stdout.write(item.rendered)
        status(summary_frame(items).to_string(index=False), args.format)
    failures = [item for item in items if item.exit_code]
    if failures:
        status(f"⚠️  {len(failures)} of {len(items)} document(s) failed", args.format)
        return max(item.exit_code for item in failures)
    status(f"✅ {len(items)} document(s) processed", args.format)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)

    try:
        config = SolverConfig.load(args.config).with_overrides(rel_budget=args.budget)
    except (ValueError, FileNotFoundError) as e:
        status(f"❌ Configuration error: {e}", args.format)
        return 2

    if args.batch:
        return _run_batch(args, config)

    if args.input:
        try:
            with open(args.input, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            status(f"❌ Cannot read {args.input}: {e}", args.format)
            return 2
    else:
        text = sys.stdin.read()

    try:
        doc = parse(text, config, **_overrides(args))
        status(f"🚀 Running {doc.command} at precision {doc.precision}", args.format)
        rendered = serialize(run(doc, config), args.format)
    except PuiseuxError as e:
        if args.format == "json":
            sys.stdout.write(json.dumps(e.to_dict(), indent=2, sort_keys=True) + "\n")
        status(f"❌ {e.message}", args.format)
        return e.exit_code

    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(rendered)
        status(f"✅ Result written to {args.output}", args.format)
    else:
        sys.stdout.write(rendered)
        status("✅ Done", args.format)
    return 0


if __name__ == "__main__":
    exit(main())
