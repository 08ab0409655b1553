"""
Configuration management for the MDFC solver.
Handles environment variables, solver tolerances and the built-in geometry tables.
"""

import logging
import os
from typing import Dict, List, Tuple

from dotenv import load_dotenv

# Load environment variables
load_dotenv()


Segment = Tuple[Tuple[float, float], Tuple[float, float]]


class Settings:
    """Application settings and configuration."""

    # Runtime
    MDFC_THREADS: int = int(os.getenv("MDFC_THREADS", str(os.cpu_count() or 1)))
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "info")
    OUTPUT_DIR: str = os.getenv("MDFC_OUTPUT_DIR", "./output")

    # Discretization defaults
    DEFAULT_MORTAR_RATIO: float = float(os.getenv("MDFC_MORTAR_RATIO", "0.75"))
    KAPPA_PAR_THRESHOLD: float = float(os.getenv("MDFC_KAPPA_PAR_THRESHOLD", "0.0"))

    # Tolerances
    GEOMETRY_TOL: float = 1e-9
    LATTICE_TOL: float = 1e-10
    RESIDUAL_TOL: float = 1e-10
    COMPATIBILITY_TOL: float = 1e-9
    SYMMETRY_TOL: float = 1e-12

    # Linear algebra
    DENSE_FALLBACK_MAX: int = 5000
    EIG_DENSE_MAX: int = 2000
    EIG_MAX_ITER: int = 500

    # Convergence study
    MIN_LEVELS: int = 3
    REFERENCE_FACTOR: int = 4

    # Application Info
    APP_NAME: str = "mdfc"
    APP_VERSION: str = "1.0.0"
    APP_DESCRIPTION: str = "Mixed-dimensional flux-coupling solver for Darcy flow in fractured media"


# Built-in geometries on the unit square. Coordinates are multiples of 1/8 so that
# every resolution divisible by 8 resolves them on lattice lines.
# Each fracture entry: label -> (segments, kappa_perp, kappa_par).
BENCHMARK_FRACTURES: Dict[str, Tuple[List[Segment], float, float]] = {
    "crossing_horizontal": ([((0.25, 0.75), (0.75, 0.75))], 1e4, 1.0),
    "crossing_vertical": ([((0.5, 0.625), (0.5, 0.875))], 1e4, 1.0),
    "blocking_left": ([((0.0, 0.5), (0.375, 0.5))], 1.0, 1e-4),
    "blocking_right": ([((0.625, 0.375), (1.0, 0.375))], 1.0, 1e-4),
    "conductive_l": ([((0.75, 0.0), (0.75, 0.25)), ((0.75, 0.25), (1.0, 0.25))], 1e4, 1.0),
}

# Boundary conditions per side: (kind, constant, (d/dx, d/dy)).
BENCHMARK_BOUNDARY = {
    "top": ("dirichlet", 1.0, (0.0, 0.0)),
    "bottom": ("dirichlet", 0.0, (0.0, 0.0)),
    "left": ("neumann", 0.0, (0.0, 0.0)),
    "right": ("neumann", 0.0, (0.0, 0.0)),
}

# Benchmark without the immersed crossing pair, linear pressure on the sides.
STABILITY_FRACTURES = {
    label: spec for label, spec in BENCHMARK_FRACTURES.items() if not label.startswith("crossing")
}

STABILITY_BOUNDARY = {
    "top": ("dirichlet", 1.0, (0.0, 0.0)),
    "bottom": ("dirichlet", 0.0, (0.0, 0.0)),
    "left": ("dirichlet", 0.0, (0.0, 1.0)),
    "right": ("dirichlet", 0.0, (0.0, 1.0)),
}

# Quasi-1D column: full vertical cut, unit pressure drop left to right.
COLUMN_FRACTURES = {
    "cut": ([((0.5, 0.0), (0.5, 1.0))], 1e4, 1.0),
}

COLUMN_BOUNDARY = {
    "left": ("dirichlet", 1.0, (0.0, 0.0)),
    "right": ("dirichlet", 0.0, (0.0, 0.0)),
    "top": ("neumann", 0.0, (0.0, 0.0)),
    "bottom": ("neumann", 0.0, (0.0, 0.0)),
}

BUILTIN_GEOMETRIES = {
    "benchmark2d": (BENCHMARK_FRACTURES, BENCHMARK_BOUNDARY),
    "stability2d": (STABILITY_FRACTURES, STABILITY_BOUNDARY),
    "column": (COLUMN_FRACTURES, COLUMN_BOUNDARY),
    "unfractured": ({}, BENCHMARK_BOUNDARY),
}


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get application settings."""
    return settings


def setup_logging(level: str = None) -> None:
    """Install a basic log handler at the configured level."""
    name = (level or settings.LOG_LEVEL).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
