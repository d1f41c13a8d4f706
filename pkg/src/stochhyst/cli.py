"""Command line entry point.

Exit codes: 0 success, 1 invalid configuration, 2 property failure,
3 solver non-convergence.
"""
from __future__ import annotations

import argparse
import sys

from .config import MODES, PRESETS, ConfigError, ExperimentConfig, preset
from .solver import MaxIterExceeded

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PROPERTY = 2
EXIT_NONCONVERGENCE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochhyst",
        description="Simulate random viscoelastic media with dry friction under cyclic loading.")
    sub = parser.add_subparsers(dest="command", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", metavar="PATH", help="YAML experiment config")
        p.add_argument("--preset", metavar="NAME", choices=sorted(PRESETS),
                       help="start from a named preset (config keys override it)")
        p.add_argument("--seed", type=int, metavar="N", help="override base_seed")
        p.add_argument("--jobs", type=int, default=1, metavar="N",
                       help="worker processes (outputs do not depend on this)")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
        if mode == "check":
            p.add_argument("--fast", action="store_true", help="reduced sample sizes")
    return parser


def load_config(args) -> ExperimentConfig:
    base = preset(args.preset) if args.preset else None
    if args.config:
        cfg = ExperimentConfig.from_file(args.config, base=base)
    else:
        cfg = base or ExperimentConfig()
    changes = {"mode": args.command}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.out is not None:
        changes["output_dir"] = args.out
    try:
        return cfg.replace(**changes)
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError(str(err)) from None


def main(argv=None) -> int:
    from .experiments import execute

    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = load_config(args)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    kwargs = {"fast": args.fast} if args.command == "check" else {}
    try:
        outcome = execute(cfg, cfg.output_dir, args.jobs, **kwargs)
    except MaxIterExceeded as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    for line in outcome.summary:
        print(line)
    for path in outcome.files:
        print(f"wrote {path}")
    return EXIT_PROPERTY if outcome.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
