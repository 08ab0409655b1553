#!/usr/bin/env python3
"""
Command line entry point of the MDFC solver.

    python main.py run --config cases/column.cfg
    python main.py run --config cases/benchmark.cfg --method p1 --solver schur
    python main.py converge --config cases/benchmark.cfg --levels 3
    python main.py stability --config cases/stability.cfg --kperp 1e-4,1e-2,1 --kpar 1 --ratios 0.75,1

Exit codes: 0 success, 2 usage or configuration error, 1 any other solver error.
"""

import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from config import get_settings, setup_logging
from exceptions import ConfigError, MDFCError
from mdfc_pipeline import MDFCPipeline
from models.case import SUBDOMAIN_METHODS, CaseConfig, SolverKind, default_grid
from models.operators import MethodKind
from services.case_config import load_case_config

METHOD_CHOICES = [m.value for m in SUBDOMAIN_METHODS]
SOLVER_CHOICES = [s.value for s in SolverKind]


def float_list(text: str) -> List[float]:
    """argparse type for '1e-4,1e-2,1'."""
    try:
        return [float(item) for item in text.replace(";", ",").split(",") if item.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"'{text}' is not a comma-separated list of numbers") from exc


def method_list(text: str) -> List[MethodKind]:
    """argparse type for 'tpfa,p1'."""
    names = [item.strip() for item in text.split(",") if item.strip()]
    bad = [name for name in names if name not in METHOD_CHOICES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown methods {bad} (choose from {METHOD_CHOICES})")
    return [MethodKind(name) for name in names]


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description=settings.APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    parser.add_argument("--log-level", default=None, help="Logging level (default from LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Solve one case")
    run.add_argument("--method", choices=METHOD_CHOICES, help="Override the case method")

    converge = sub.add_parser("converge", help="Mortar flux convergence study")
    converge.add_argument("--levels", type=int, default=None, help="Number of refinement levels")

    for command in (run, converge):
        command.add_argument("--solver", choices=SOLVER_CHOICES, help="Override the case solver")

    stability = sub.add_parser("stability", help="Smallest Schur complement eigenvalue over a parameter grid")
    stability.add_argument("--kperp", type=float_list, default=None, help="Normal permeabilities")
    stability.add_argument("--kpar", type=float_list, default=None, help="Tangential permeabilities")
    stability.add_argument("--ratios", type=float_list, default=None, help="Mortar cells per fracture cell")
    stability.add_argument("--methods", type=method_list, default=None, help="Subdomain methods")

    for command in (run, converge, stability):
        command.add_argument("--config", required=True, help="Case file")
        command.add_argument("--output", default=None, help="Result directory")
    return parser


def with_method(case: CaseConfig, method: str) -> CaseConfig:
    """Case copy with another method; a default grid follows the new method."""
    data = case.model_dump(exclude_unset=True)
    if case.grid == default_grid(case.method):
        data.pop("grid", None)
    data["method"] = method
    try:
        return CaseConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"invalid case configuration: {exc}") from exc


def main(argv: Optional[List[str]] = None) -> int:
    """Main function to run the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        case = load_case_config(args.config)
        if args.command == "run" and args.method:
            case = with_method(case, args.method)
        if getattr(args, "solver", None):
            case = case.model_copy(update={"solver": SolverKind(args.solver)})
        pipeline = MDFCPipeline(case, output_dir=args.output)

        if args.command == "run":
            result = pipeline.run_case()
            rows = [result.summary]
        elif args.command == "converge":
            rows = pipeline.convergence_study(args.levels)
        else:
            rows = pipeline.stability_sweep(args.kperp, args.kpar, args.ratios, args.methods)
    except ConfigError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return 2
    except MDFCError as exc:
        print(f"Error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1

    print("\n" + "=" * 50)
    print(f"{args.command.upper()} RESULTS:")
    print("=" * 50)
    for row in rows:
        print(", ".join(f"{key}={value}" for key, value in row.model_dump().items()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
