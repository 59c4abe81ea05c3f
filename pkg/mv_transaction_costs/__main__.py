# Copyright (c) 2026 The mv_transaction_costs authors
# The mv_transaction_costs package is released under the terms of the AGPLv3 or higher.

import argparse
import sys
import traceback
from typing import Optional

from .mv_transaction_costs import MeanVarianceTransactionCosts
from .tools import ConfigError, FeasibilityError, Logger, NumericalIntegrityError, SettingsManager, SolverError

EXIT_OK: int = 0
EXIT_CONFIG: int = 2
EXIT_INFEASIBLE: int = 3
EXIT_NUMERICAL: int = 4


def build_parser() -> argparse.ArgumentParser:
    solver_json: dict = SettingsManager.read_solver_json()
    parser: argparse.ArgumentParser = argparse.ArgumentParser(prog="mv_transaction_costs",
                                                              description=solver_json["description"])
    parser.add_argument("--version", action="version", version=f"{solver_json['name']} {solver_json['version']}")
    parser.add_argument("command", choices=["solve", "plotdata"])
    parser.add_argument("config", help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides MVTC_OUTPUT_DIR and the config)")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--dump-grid", action="store_true", help="also write grid.csv (t,z,u)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    """
    Run a command and map failures to exit codes
    """
    args: argparse.Namespace = build_parser().parse_args(argv)
    Logger.configure(verbose=args.verbose)
    try:
        settings = SettingsManager.load(args.config)
        app: MeanVarianceTransactionCosts = MeanVarianceTransactionCosts(settings, output_dir=args.out,
                                                                        dump_grid=args.dump_grid)
        if args.command == "solve":
            return app.run_solve()
        return app.run_plotdata()
    except ConfigError as e:
        Logger.log("e", f"Configuration error: {e}")
        return EXIT_CONFIG
    except FeasibilityError as e:
        Logger.log("e", f"Infeasible target: {e}")
        return EXIT_INFEASIBLE
    except NumericalIntegrityError as e:
        Logger.log("e", f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except SolverError as e:
        Logger.log("e", f"Solver error: {e}")
        return EXIT_NUMERICAL
    except Exception as e:
        Logger.log("c", f"Unexpected error: {e!r}")
        Logger.log("d", traceback.format_exc())
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
