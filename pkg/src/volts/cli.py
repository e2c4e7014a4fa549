"""Command line entry point: ``volts <subcommand> --config run.yaml``.

Exit codes: 0 success, 1 invalid configuration, 2 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import check, load_config
from .errors import ConfigError, StageError
from .pipeline import STAGES, cmd_validate, run_pipeline, run_stage

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volts", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate",) + STAGES + ("pipeline",):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides the config)")
        if name == "pipeline":
            p.add_argument("--stage-from", choices=STAGES, default="ingest")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output_dir

    if args.command == "validate":
        problems = cmd_validate(cfg)
        for p in problems:
            print(f"invalid: {p}", file=sys.stderr)
        if not problems:
            print("config OK")
        return EXIT_CONFIG if problems else EXIT_OK

    try:
        if args.command == "pipeline":
            run_pipeline(cfg, out, args.stage_from)
        else:
            problems = check(cfg)
            if problems:
                raise ConfigError(problems)
            run_stage(args.command, cfg, out)
    except ConfigError as exc:
        for p in exc.problems:
            print(f"invalid: {p}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    print(f"{args.command}: done -> {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
