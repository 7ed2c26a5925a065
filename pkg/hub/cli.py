#!/usr/bin/env python3
"""
romschwarz command line

    romschwarz verify1d|offline|online|sweep --config <path> [--rom <path>]
               [--study <name>] [--oracle] [--out <dir>] [--workers <n>] [--seed <n>]

Exit codes: 0 success, 1 budget violation, 2 usage or configuration error,
3 artifact incompatibility.
"""

import argparse
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv
from rich.console import Console
from rich.table import Table

from experiments.studies import StudyName, run_study
from helpers.config_loader import DEFAULT_CONFIG, RunConfig, load_run_config
from hub.errors import ArtifactParseError, CompatibilityError, ConfigurationError, RomSchwarzError
from hub.logger import get_logger, get_romschwarz_logger
from hub.orchestrator import ExperimentOrchestrator, ExperimentReport

EXIT_OK = 0
EXIT_BUDGET = 1
EXIT_USAGE = 2
EXIT_INCOMPATIBLE = 3

COMMANDS = ("verify1d", "offline", "online", "sweep")

console = Console(stderr=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="romschwarz",
        description="Reduced Schwarz domain decomposition for the pipe advection-diffusion problem",
    )
    parser.add_argument("command", choices=COMMANDS, help="Stage to run")
    parser.add_argument("--config", default=str(DEFAULT_CONFIG), help="Run configuration (YAML)")
    parser.add_argument("--rom", help="ROM artifact path (written by offline, read by online)")
    parser.add_argument("--study", choices=[s.value for s in StudyName], help="Study for the sweep command")
    parser.add_argument("--oracle", action="store_true", help="Use the exact trace map online")
    parser.add_argument("--out", default="out", help="Output directory (ROMSCHWARZ_OUT overrides)")
    parser.add_argument("--workers", type=int, help="Parallel runs")
    parser.add_argument("--seed", type=int, help="Seed for training and perturbations")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.workers is not None:
        overrides['workers'] = args.workers
    return overrides


def _configure_logging(config: RunConfig, verbose: bool):
    settings = config.logging.model_dump()
    if verbose:
        settings['level'] = "DEBUG"
    get_romschwarz_logger(settings)


def _print_rows(title: str, rows: List[Dict[str, Any]], columns: Optional[Sequence[str]] = None):
    if not rows:
        return
    columns = list(columns or rows[0].keys())
    table = Table(title=title)
    for col in columns:
        table.add_column(col, justify="right")
    for row in rows:
        cells = []
        for col in columns:
            value = row.get(col, "")
            cells.append(f"{value:.6g}" if isinstance(value, float) else str(value))
        table.add_row(*cells)
    console.print(table)


def _print_report(report: ExperimentReport):
    columns = None
    if report.command == "online":
        columns = ["Pe", "sweeps", "relL2_omega1", "relL2_omega3", "extrapolated", "converged", "omega2_solves"]
    elif report.command.startswith("sweep-"):
        columns = [c for c in ("Pe", "product_kind", "enrichment", "relerr_omega1", "relerr_omega3",
                               "mu", "plateau", "plateau_over_mu", "sweeps")
                   if report.rows and c in report.rows[0]]
    _print_rows(f"{report.command} ({report.run_id})", report.rows, columns)
    for warning in report.warnings:
        console.print(f"[yellow]warning[/yellow] {warning}")
    for path in report.files:
        console.print(f"  wrote {path}")


def run_command(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, _overrides(args))
    _configure_logging(config, args.verbose)
    logger = get_logger("cli")

    out_dir = Path(os.getenv("ROMSCHWARZ_OUT") or args.out)
    orch = ExperimentOrchestrator(config, out_dir, workers=args.workers)
    logger.info("command started", command=args.command, config=args.config, out=str(out_dir),
                config_hash=orch.config_hash[:12])

    if args.command == "verify1d":
        report = orch.verify1d()
    elif args.command == "offline":
        report, _ = orch.offline(args.rom)
    elif args.command == "online":
        if not args.rom and not args.oracle:
            raise ConfigurationError("online needs --rom <path> (or --oracle)")
        report = orch.online(args.rom, oracle=args.oracle)
    else:
        if not args.study:
            raise ConfigurationError("sweep needs --study <name>")
        report = run_study(orch, args.study)

    _print_report(report)
    missing = report.missing_files()
    if missing:
        logger.error("report lists missing files", files=missing)
        return EXIT_BUDGET
    logger.info("command finished", command=args.command, exit_code=report.exit_code)
    return report.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        return run_command(args)
    except ConfigurationError as e:
        console.print(f"[red]configuration error[/red] {e}")
        return EXIT_USAGE
    except (CompatibilityError, ArtifactParseError) as e:
        console.print(f"[red]artifact error[/red] {e}")
        return EXIT_INCOMPATIBLE
    except RomSchwarzError as e:
        get_logger("cli").error("command failed", command=args.command, error=str(e),
                                error_type=type(e).__name__)
        console.print(f"[red]{type(e).__name__}[/red] {e}")
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
