"""The ``cbo`` command line interface.

One subcommand per experiment kind; every subcommand takes a YAML config
plus optional seed/output overrides.  Exit codes: 0 on success, 1 on
configuration or precondition errors, 2 on numeric failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from ..constants import render_text
from ..errors import ConfigurationError, FitError, InputError, NumericError
from .config import KINDS, load_config
from .output import _jsonable, write_result
from .runner import run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbo",
        description="Consensus-based optimization particle lab",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        cmd = sub.add_parser(kind, help=f"run the {kind} experiment")
        cmd.add_argument("--config", required=True, help="YAML config file")
        cmd.add_argument("--seed", type=int, default=None, help="override the master seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry (dotted keys, YAML values); repeatable",
        )
        cmd.add_argument(
            "--allow-supercritical",
            action="store_true",
            help="bypass the sigma < sigma_tilde and kappa-interval guards",
        )
        cmd.add_argument(
            "--workers",
            type=int,
            default=1,
            help="replicate thread pool size (cannot change any emitted number)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(
            args.config,
            overrides=args.override,
            seed=args.seed,
            out_dir=args.out,
            kind=args.kind,
            allow_supercritical=args.allow_supercritical or None,
        )
        result = run_experiment(config, workers=args.workers)
    except (ConfigurationError, InputError, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2

    if result.constants is not None and config.kind == "constants":
        print(render_text(result.constants))
    if config.out_dir:
        written = write_result(result, config.out_dir)
        print(f"wrote {len(written)} files to {config.out_dir}", file=sys.stderr)
    elif config.kind != "constants":
        print(json.dumps(_jsonable(result.checks), indent=2, sort_keys=True))
    print(f"completed {config.kind} in {result.wall_clock:.2f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
