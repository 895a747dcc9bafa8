"""SimReuse command-line entry point.

    python main.py validate --dataset nsw.csv --target nswprice
    python main.py run reuse --config experiment.json --forecaster es --metric wd
    python main.py compare --config experiment.json --out results/
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Optional

from app.config import load_config, settings
from app.errors import ConfigurationError, SimReuseError
from app.routes.commands import cmd_analyze, cmd_compare, cmd_run, cmd_select_window, cmd_validate
from app.schemas import STRATEGY_NAMES

logger = logging.getLogger("simreuse")

LEARNER_KINDS = {"bagged": "bagged_trees", "boosted": "boosted_trees"}


class CLIArgumentParser(argparse.ArgumentParser):
    """Reports usage problems as ConfigurationError (exit code 1)."""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--dataset", help="CSV dataset path (dataset.path)")
    common.add_argument("--preset", help="dataset preset name (dataset.preset)")
    common.add_argument("--target", help="target column (dataset.target_name)")
    common.add_argument("--samples-per-day", type=int, help="sampling rate (dataset.samples_per_day)")
    common.add_argument("--window-days", help="window length in days, or 'auto'")
    common.add_argument("--forecaster", choices=["sa", "es"], type=str.lower)
    common.add_argument("--metric", choices=["wd", "tvd"], type=str.lower)
    common.add_argument("--learner", choices=sorted(LEARNER_KINDS), type=str.lower)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = CLIArgumentParser(prog="simreuse", description="Similarity-based model reuse experiments")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("validate", parents=[common], help="load and check a dataset")
    analyze = commands.add_parser("analyze", parents=[common], help="distribution analysis tables and plots")
    analyze.add_argument("--forecasts", action="store_true", help="also export per-window forecasts")
    commands.add_parser("select-window", parents=[common], help="search the segment length")
    run = commands.add_parser("run", parents=[common], help="run one maintenance strategy")
    run.add_argument("strategy", choices=STRATEGY_NAMES)
    compare = commands.add_parser("compare", parents=[common], help="run and compare all strategies")
    compare.add_argument("--sweep", action="store_true", help="run every metric x forecaster reuse configuration")
    return parser


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "dataset.path": args.dataset,
        "dataset.preset": args.preset,
        "dataset.target_name": args.target,
        "dataset.samples_per_day": args.samples_per_day,
        "windowing.window_days": args.window_days,
        "reuse.forecaster": args.forecaster,
        "reuse.metric": args.metric,
        "learner.kind": LEARNER_KINDS.get(args.learner) if args.learner else None,
        "seed": args.seed,
        "output_dir": args.out,
        "reuse.sweep": True if getattr(args, "sweep", False) else None,
    }


def configure_logging(verbose: bool = False):
    logging.basicConfig(
        level=logging.DEBUG if verbose else settings.log_level,
        format="[%(levelname)s] %(message)s",
        force=True,
    )


def dispatch(args: argparse.Namespace):
    config = load_config(args.config, config_overrides(args))
    if args.command == "validate":
        print(cmd_validate(config).summary)
    elif args.command == "analyze":
        for path in cmd_analyze(config, forecasts=args.forecasts):
            print(path)
    elif args.command == "select-window":
        report = cmd_select_window(config)
        print(f"chosen segment length: {report.chosen} days (MSE {report.minimum_mse:.6g})")
    elif args.command == "run":
        report = cmd_run(config, args.strategy)
        print(
            f"{report.label}: MSE {report.aggregate_mse:.6g}, {report.fit_count} fits, "
            f"{report.reduced_training_count} reused"
        )
    elif args.command == "compare":
        summary = cmd_compare(config)
        for comparison in summary["comparisons"]:
            verdict = "significant" if comparison["significant"] else "insignificant"
            print(f"{comparison['strategy_a']} vs {comparison['strategy_b']}: p={comparison['p_value']:.4g} ({verdict})")


def main(argv: Optional[List[str]] = None) -> int:
    verbose = "--verbose" in (argv if argv is not None else sys.argv[1:])
    configure_logging(verbose)
    try:
        dispatch(build_parser().parse_args(argv))
    except SimReuseError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except AssertionError as e:
        logger.error(f"Internal invariant violated: {e}")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
