"""Command-line front end.

Commands: pool, invert, pair, anonymize, evaluate, ablate, run-all.
Exit codes: 0 success, 2 config error, 3 dependency error, 4 runtime failure.
The only honored environment variable is FACEANON_CACHE_DIR (scratch
directory override); everything else comes from the config file and flags.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import validate_config
from .errors import ConfigError, DependencyError, FaceAnonError, StaleArtifactError
from .pipeline import STAGES, Pipeline

COMMANDS = ("pool", "invert", "pair", "anonymize", "evaluate", "ablate", "run-all")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faceanon",
        description="Face dataset anonymization via latent-code optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the '{name}' stage")
        p.add_argument("--config", required=True, help="path to the YAML run config")
        p.add_argument("--output", help="override io.output_root")
        p.add_argument("--seed", type=int, help="override the global seed")
        p.add_argument("--workers", type=int, help="override the worker count")
        p.add_argument("--resume", action="store_true",
                       help="reuse per-item artifacts from an interrupted run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = validate_config(args.config)
        overrides = {}
        if args.output is not None:
            overrides["io.output_root"] = args.output
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.workers is not None:
            overrides["workers"] = args.workers
        if overrides:
            config = config.with_overrides(**overrides)
    except ConfigError as exc:
        print("config errors:", file=sys.stderr)
        for err in exc.errors:
            print(f"  - {err}", file=sys.stderr)
        return 2

    pipeline = Pipeline(config)
    try:
        if args.command == "run-all":
            for stage in STAGES:
                entry = pipeline.run_stage(stage, resume=args.resume)
                print(f"[{stage}] {entry['status']}")
        else:
            stage = "ablate" if args.command == "ablate" else args.command
            entry = pipeline.run_stage(stage, resume=args.resume)
            print(f"[{stage}] {entry['status']}")
            report_path = pipeline._stage_outputs(stage)
            for rel in report_path:
                print(f"  -> {pipeline.root / rel}")
    except (DependencyError, StaleArtifactError) as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return 3
    except FaceAnonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except Exception as exc:   # noqa: BLE001 - surface anything unexpected as runtime failure
        print(f"unexpected failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
