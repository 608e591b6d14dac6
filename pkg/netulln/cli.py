import argparse
import logging

from netulln.cli_commands import run_experiment, run_report
from netulln.console import configure_logging, print_error
from netulln.errors import ConfigError
from netulln.harness.audit import EXIT_CONFIG, EXIT_FAILED
from netulln.harness.manifest import get_version

logger = logging.getLogger(__name__)


def _positive_int(value: str) -> int:
    parsed = int(value)
    if parsed <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return parsed


def _non_negative_int(value: str) -> int:
    parsed = int(value)
    if parsed < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return parsed


def _run_options() -> argparse.ArgumentParser:
    options = argparse.ArgumentParser(add_help=False)
    options.add_argument(
        "--config",
        help="Run config YAML or a manifest.json from an earlier run "
        "(default: packaged sparse-cycle config)",
    )
    options.add_argument(
        "--seed",
        type=_non_negative_int,
        help="Master seed (overrides the config)",
    )
    options.add_argument("--out", help="Output directory (overrides the config)")
    options.add_argument(
        "--threads",
        type=_positive_int,
        help="Worker threads (outputs do not depend on this)",
    )
    options.add_argument(
        "--strict",
        action="store_true",
        help="Treat WAIVED checks as failures",
    )
    return options


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        description="netulln – Monte Carlo checks of uniform laws and maximal "
        "inequalities for network-dependent data.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {get_version()}",
        help="Show version and exit",
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug logging",
    )
    parser.add_argument(
        "--log-file",
        metavar="PATH",
        help="Also write a debug log to PATH",
    )

    subparsers = parser.add_subparsers(dest="command", required=False)
    run_options = _run_options()

    for verb, help_text in (
        ("diagnose", "Report assumption checks (shells, decay, sparsity, bounds)"),
        ("verify-ulln", "Sup-deviation over a delta-net across the n-grid"),
        ("verify-maximal", "Maximal-inequality moment growth and block moments"),
        ("estimate", "M and GMM estimator consistency"),
        ("full-suite", "Diagnose plus every verification and estimation stage"),
    ):
        verb_parser = subparsers.add_parser(verb, parents=[run_options], help=help_text)
        verb_parser.set_defaults(handler=run_experiment)

    report_parser = subparsers.add_parser(
        "report",
        parents=[run_options],
        help="Print the tables of an existing output directory",
    )
    report_parser.set_defaults(handler=run_report)

    args = parser.parse_args(argv)

    log_level = logging.DEBUG if args.debug else logging.INFO
    configure_logging(stream_level=log_level, file_path=args.log_file)

    if not hasattr(args, "handler"):
        parser.print_help()
        return

    try:
        code = args.handler(args)
    except ConfigError as error:
        print_error(str(error))
        logger.debug("Invalid configuration", exc_info=True)
        raise SystemExit(EXIT_CONFIG) from error
    except ValueError as error:
        print_error(str(error))
        logger.debug("Command failed", exc_info=True)
        raise SystemExit(EXIT_FAILED) from error
    if code:
        raise SystemExit(code)


if __name__ == "__main__":
    main()
