# Copyright (C) 2025-2026 The ksflow developers
#
# This file is part of ksflow
#
# It is subject to the license terms in the LICENSE file found in the top-level
# directory of this distribution.
#
# No part of ksflow, including this file, may be copied, modified,
# propagated, or distributed except according to the terms contained in the
# LICENSE file.

import argparse
import logging
import sys
from typing import List, Optional

from ksflow import __version__
from ksflow.constants import EXIT_CONFIG, FIT_WINDOW, SUITES
from ksflow.errors import ConfigError
from ksflow.experiments import ExperimentConfig, cmd_fit, cmd_report, cmd_run, cmd_verify

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

logger = logging.getLogger(__name__)


def _window(text: str):
    try:
        t0, t1 = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must read T0:T1, got {text!r}")
    return t0, t1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ksflow", description="Finite-rank Kohn-Sham half-density simulator."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="evolve an experiment configuration")
    run.add_argument("--config", required=True, metavar="PATH")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", metavar="DIR")
    run.add_argument("--exploratory", action="store_true", help="allow inadmissible interactions")

    verify = commands.add_parser("verify", help="run a verification suite")
    verify.add_argument("suite", choices=SUITES)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--samples", type=int, default=100)
    verify.add_argument("--out", metavar="DIR", default="ksflow-verify")
    verify.add_argument("--snapshot", metavar="PATH", help="also check a stored operator")

    fit = commands.add_parser("fit", help="fit a power-law decay to a series column")
    fit.add_argument("series", metavar="CSV")
    fit.add_argument("--column", default="gamma_inf")
    fit.add_argument("--window", type=_window, default=FIT_WINDOW, metavar="T0:T1")

    report = commands.add_parser("report", help="re-derive the report of a run directory")
    report.add_argument("--out", metavar="DIR", required=True)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)

    if args.command == "run":
        try:
            config = ExperimentConfig.from_file(args.config)
        except ConfigError as err:
            logger.error("%s", err)
            return EXIT_CONFIG
        return cmd_run(config, exploratory=args.exploratory, seed=args.seed, out=args.out)
    if args.command == "verify":
        return cmd_verify(args.suite, args.seed, args.samples, args.out, args.snapshot)
    if args.command == "fit":
        t0, t1 = args.window
        return cmd_fit(args.series, args.column, t0, t1)
    return cmd_report(args.out)


if __name__ == "__main__":
    sys.exit(main())
