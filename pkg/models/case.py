"""
Case configuration and result table models.
Defines Pydantic models for case files and for the rows written to CSV.
"""

from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.grid import BoundaryCondition, GridKind
from models.operators import MethodKind


class SolverKind(str, Enum):
    """Outer solution path."""
    GLOBAL = "global"
    SCHUR = "schur"


SUBDOMAIN_METHODS = (MethodKind.TPFA, MethodKind.P1, MethodKind.RT0H)


class FractureParams(BaseModel):
    """Permeabilities of one fracture label."""
    model_config = ConfigDict(extra="forbid")

    kappa_perp: float = Field(1.0, description="Normal permeability (must be positive)")
    kappa_par: float = Field(1.0, ge=0.0, description="Tangential permeability")


class StudyConfig(BaseModel):
    """Settings of the convergence study and stability sweep."""
    model_config = ConfigDict(extra="forbid")

    levels: int = Field(3, ge=1, description="Number of refinement levels")
    base_resolution: int = Field(8, gt=0, description="Cells per side on the coarsest level")
    reference_factor: int = Field(4, ge=2, description="Reference resolution over finest level")
    reference_check: bool = Field(False, description="Also solve at twice the reference resolution")
    kappa_perp: List[float] = Field(default_factory=lambda: [1e-4, 1.0, 1e4])
    kappa_par: List[float] = Field(default_factory=lambda: [1e-4, 1.0, 1e4])
    ratios: List[float] = Field(default_factory=lambda: [0.5, 0.75, 1.0, 1.5])
    methods: List[MethodKind] = Field(default_factory=lambda: list(SUBDOMAIN_METHODS))


class CaseConfig(BaseModel):
    """A full case: geometry, discretization, physical data and study settings."""
    model_config = ConfigDict(extra="forbid")

    name: str = Field("case", min_length=1)
    geometry: str = Field("benchmark2d", description="Built-in geometry name")
    mesh_file: Optional[Path] = Field(None, description="Mesh file used instead of a built-in geometry")
    method: MethodKind = MethodKind.TPFA
    grid: Optional[GridKind] = Field(None, description="Lattice cell shape; defaults from the method")
    resolution: int = Field(16, gt=0, description="Cells per side of the lattice")
    mortar_ratio: Optional[float] = Field(None, gt=0.0, description="Mortar cells per fracture cell")
    solver: SolverKind = Field(SolverKind.GLOBAL, description="Monolithic or Schur complement path")
    kappa_par_threshold: Optional[float] = Field(None, ge=0.0)
    tip_flux: float = 0.0
    write_vtk: bool = True
    output_dir: Optional[Path] = Field(None, description="Result directory; defaults to MDFC_OUTPUT_DIR/<name>")
    seed: int = Field(0, ge=0, description="Seed of the randomized start vectors")

    matrix_kappa: float = Field(1.0, gt=0.0, description="Matrix permeability")
    matrix_source: float = Field(0.0, description="Matrix sink density per unit area")
    fracture_source: float = Field(0.0, description="Fracture sink density per unit length")
    intersection_source: float = Field(0.0, description="Sink of every intersection point")
    default_fracture: FractureParams = Field(default_factory=FractureParams)
    fractures: Dict[str, FractureParams] = Field(default_factory=dict)
    intersection_kappa_perp: Optional[float] = Field(None, description="Normal permeability at intersections")
    boundary: Dict[str, BoundaryCondition] = Field(default_factory=dict)
    study: StudyConfig = Field(default_factory=StudyConfig)

    @model_validator(mode="after")
    def _check_choices(self) -> "CaseConfig":
        if self.method not in SUBDOMAIN_METHODS:
            raise ValueError(f"method must be one of {[m.value for m in SUBDOMAIN_METHODS]}")
        bad = set(self.boundary) - {"left", "right", "bottom", "top"}
        if bad:
            raise ValueError(f"unknown boundary sides {sorted(bad)}")
        if self.grid is None:
            self.grid = default_grid(self.method)
        elif self.grid is GridKind.CARTESIAN_QUADS and self.method is not MethodKind.TPFA:
            raise ValueError(f"method {self.method.value} needs structured_triangles")
        return self

    def fracture(self, label: Optional[str]) -> FractureParams:
        return self.fractures.get(label, self.default_fracture) if label else self.default_fracture


def default_grid(method: MethodKind) -> GridKind:
    """Quads for the two-point scheme, triangles for the element methods."""
    return GridKind.CARTESIAN_QUADS if MethodKind(method) is MethodKind.TPFA else GridKind.STRUCTURED_TRIANGLES


class SummaryRow(BaseModel):
    """One line of summary.csv."""
    case: str
    geometry: str
    method: str
    solver: str
    resolution: int
    mortar_ratio: float
    kappa_perp: float = Field(..., description="Default fracture normal permeability")
    kappa_par: float = Field(..., description="Default fracture tangential permeability")
    matrix_kappa: float
    fracture_source: float
    intersection_source: float
    seed: int
    n_2d: int
    n_1d: int
    n_0d: int
    mortar_dofs: int
    unknowns: int
    residual: float
    boundary_inflow: float = Field(..., description="Total flux entering through the exterior boundary")
    boundary_outflow: float = Field(..., description="Total flux leaving through the exterior boundary")
    global_imbalance: float
    max_cell_imbalance: float
    interface_law_residual: float


class ConvergenceRow(BaseModel):
    """One line of convergence.csv."""
    geometry: str
    method: str
    mortar_ratio: float
    kappa_perp: float
    kappa_par: float
    matrix_kappa: float
    level: int
    resolution: int
    h: float
    reference_resolution: int
    error_1d: float
    error_0d: float
    rate_1d: Optional[float] = None
    rate_0d: Optional[float] = None
    reference_change: Optional[float] = Field(None, description="Relative change of the error against a finer reference")


class StabilityRow(BaseModel):
    """One line of stability.csv."""
    geometry: str
    method: str
    resolution: int
    kappa_perp: float
    kappa_par: float
    mortar_ratio: float
    ratio_outer: float = Field(..., description="Mortar cells per higher-dimensional interface face")
    ratio_inner: float = Field(..., description="Mortar cells per fracture cell")
    n_min: float
