"""Command-line entry point.

One subcommand per experiment kind plus ``validate`` (config check
only) and ``selftest`` (runs the acceptance suite).  Exit codes:
0 success, 1 validation error, 2 infeasible-goal outcome.  The output
directory resolves as --out flag, then the ADVCTRL_OUT environment
variable, then the config's ``run.out``.
"""

from __future__ import annotations

import argparse
import os
import sys

from .harness import ConfigError, VALID_KINDS, load_experiment_config, run_experiment

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advctrl",
        description="Adversarial machine learning experiments as optimal control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in VALID_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        _add_run_flags(p)
    p = sub.add_parser("validate", help="check a config file without running it")
    p.add_argument("--config", required=True, help="path to the config file")
    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--criterion", type=int, default=None,
                   help="run a single criterion by number (1-7)")
    return parser


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to the config file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's seed list with one seed")
    p.add_argument("--out", default=None, help="output directory")


def _load(path: str, expected_kind: str | None = None):
    config = load_experiment_config(path)
    if expected_kind is not None and config.kind != expected_kind:
        raise ConfigError(
            f"experiment.kind: config declares {config.kind!r} but the "
            f"{expected_kind!r} subcommand was invoked",
            key="experiment.kind",
        )
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "selftest":
        from .acceptance import run_acceptance

        results = run_acceptance(only=args.criterion)
        return EXIT_OK if all(r.passed for r in results) else EXIT_INVALID

    try:
        if args.command == "validate":
            config = _load(args.config)
            print(f"config OK: kind={config.kind} seeds={config.seeds}")
            return EXIT_OK
        config = _load(args.config, expected_kind=args.command)
        out_dir = args.out or os.environ.get("ADVCTRL_OUT")
        outcome = run_experiment(config, out_dir=out_dir, seed_override=args.seed)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"wrote {outcome.summary_path}")
    for path in outcome.record_paths:
        print(f"wrote {path}")
    if outcome.any_infeasible:
        print("goal infeasible under the configured attack surface", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
