"""``adaquery`` command line: validate and run experiment configs."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .experiments import run_experiment

EXIT_CHECKS_FAILED = 1
EXIT_CONFIG_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaquery", description="Run adaptive-query mechanism experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write <output>.csv and <output>.json")
    run.add_argument("config", help="path to an INI experiment config")
    run.add_argument("--seed", type=int, default=None, help="override experiment.seed")
    run.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default 1)")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config field, e.g. --set params.n=50000 (repeatable)")

    validate = sub.add_parser("validate", help="check a config and print its resolved fields")
    validate.add_argument("config", help="path to an INI experiment config")
    validate.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, getattr(args, "seed", None))
    except FileNotFoundError as exc:
        print(f"error: config file not found: {exc.filename}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except ConfigError as exc:
        print(f"error: invalid config field {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if args.command == "validate":
        for key, value in cfg.items():
            print(f"{key} = {value}")
        return 0

    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    result = run_experiment(cfg, jobs=args.jobs)
    for name, check in sorted(result.summary["checks"].items()):
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {name}: {check['value']} {check['op']} {check['threshold']}")
    print(f"wrote {result.csv_path} and {result.json_path}")
    return 0 if result.passed else EXIT_CHECKS_FAILED


if __name__ == "__main__":
    sys.exit(main())
