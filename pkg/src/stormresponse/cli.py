"""Command-line pipeline driver.

Each subcommand runs one stage against a config file and a working
directory; ``pipeline`` runs them all in order.  Stages communicate
through files tracked by a hash manifest, so reruns skip finished work.

Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, DataError, NumericalError
from .pipeline import STAGES, load_config, run_pipeline, run_stage


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stormresponse",
        description="Forward probabilistic extreme-response pipeline")
    parser.add_argument("--config", "-c", required=True, help="run configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the master seed from the config")
    parser.add_argument("--force", action="store_true",
                        help="rerun stages even when the manifest marks them fresh")
    parser.add_argument("--threads", type=int, default=None,
                        help="override the worker count for parallel stages")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        sub.add_parser(name, help=f"run the {name} stage")
    pipe = sub.add_parser("pipeline", help="run every stage in order")
    pipe.add_argument("--no-synth", action="store_true",
                      help="start from an existing hindcast instead of generating one")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.master_seed = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("threads must be >= 1")
            cfg.threads = args.threads
        if args.command == "pipeline":
            done = run_pipeline(cfg, force=args.force, use_synth=not args.no_synth)
            print(f"pipeline complete: {', '.join(done)}")
        else:
            outputs = run_stage(args.command, cfg, force=args.force)
            for p in outputs:
                print(p)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
