"""Command-line driver: ``g2verify verify [ids...|all] ...`` and ``g2verify list``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

from . import catalog
from .coframe import model_to_json
from .verify import DEFAULT_SAMPLES, DEFAULT_SEED, DEFAULT_TOL, emit_report, run_verify

ENV_PREFIX = "G2VERIFY_"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _env(name: str, cast, default):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError:
        raise SystemExit(f"g2verify: invalid {ENV_PREFIX}{name}={raw!r}") from None


def _flag(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="g2verify", description="Verify closed G2-structures from the built-in catalog.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the verification suite")
    v.add_argument("ids", nargs="*", help="catalog ids or 'all' (default: all)")
    v.add_argument("--samples", type=int, default=_env("SAMPLES", int, DEFAULT_SAMPLES),
                   help="random sample points per entry [env G2VERIFY_SAMPLES, default %(default)s]")
    v.add_argument("--seed", type=int, default=_env("SEED", int, DEFAULT_SEED),
                   help="sampler seed [env G2VERIFY_SEED, default %(default)s]")
    v.add_argument("--tol", type=float, default=_env("TOL", float, DEFAULT_TOL),
                   help="base tolerance [env G2VERIFY_TOL, default %(default)s]")
    v.add_argument("--stretch", action="store_true", default=_env("STRETCH", _flag, False),
                   help="include stretch entries when running 'all' [env G2VERIFY_STRETCH]")
    v.add_argument("--format", choices=("json", "table"), default=_env("FORMAT", str, "table"),
                   help="report format [env G2VERIFY_FORMAT, default %(default)s]")
    v.add_argument("--jobs", type=int, default=_env("JOBS", int, 1),
                   help="worker processes over entries [env G2VERIFY_JOBS, default %(default)s]")
    v.add_argument("--dump", metavar="ID", help="write the model JSON of one entry to stdout and exit")

    sub.add_parser("list", help="list catalog entries")
    return p


def _dump(entry_id: str) -> int:
    try:
        B = catalog.build(entry_id)
    except catalog.UnknownEntryError as exc:
        print(f"g2verify: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"g2verify: cannot build {entry_id}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    sys.stdout.write(json.dumps(model_to_json(B.model), indent=2) + "\n")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for row in catalog.list_entries():
            tag = "stretch" if row["stretch"] else ""
            print(f"{row['id']:<20} {tag:<8} {row['summary']}")
        return EXIT_OK
    if args.dump:
        return _dump(args.dump)
    if args.format not in ("json", "table"):
        print(f"g2verify: unknown format {args.format!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run_verify(args.ids, args.samples, args.seed, args.tol, args.stretch, max(1, args.jobs))
    except catalog.UnknownEntryError as exc:
        print(f"g2verify: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"g2verify: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.buffer.write(emit_report(report, args.format))
    sys.stdout.flush()
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
