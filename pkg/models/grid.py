"""
Grid models for the mixed-dimensional mesh hierarchy.
Defines the per-subdomain grids, the mesh container with its neighbor sets and
face pairings, and the pydantic records used to describe geometry input.
"""

from dataclasses import dataclass, field, fields
from enum import Enum, IntEnum
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class GridKind(str, Enum):
    """Cell shape of a structured 2D grid."""
    CARTESIAN_QUADS = "cartesian_quads"
    STRUCTURED_TRIANGLES = "structured_triangles"


class BoundaryKind(str, Enum):
    """Exterior boundary condition type."""
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"


class FaceKind(IntEnum):
    """Face tag codes stored in SubdomainGrid.face_kind."""
    INTERIOR = 0
    DIRICHLET = 1
    NEUMANN = 2
    INTERFACE = 3


class Side(IntEnum):
    """Side of a lower-dimensional subdomain, + is left of its traversal direction."""
    PLUS = 1
    MINUS = -1

    @property
    def symbol(self) -> str:
        return "+" if self is Side.PLUS else "-"


class InterfaceKey(NamedTuple):
    """Identifies one interface: lower subdomain, higher neighbor and side."""
    lower: int
    higher: int
    side: Side


class FaceTag(NamedTuple):
    """Readable view of one face's boundary tag."""
    kind: FaceKind
    lower: int = -1
    side: int = 0


class Rectangle(BaseModel):
    """Axis-aligned rectangular domain."""
    model_config = ConfigDict(frozen=True)

    xmin: float = Field(0.0, description="Left edge")
    xmax: float = Field(1.0, description="Right edge")
    ymin: float = Field(0.0, description="Bottom edge")
    ymax: float = Field(1.0, description="Top edge")

    @model_validator(mode="after")
    def _check_extent(self) -> "Rectangle":
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("rectangle must have positive extent")
        return self

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)


class BoundaryCondition(BaseModel):
    """Affine boundary datum: value + slope . (x, y).

    For Dirichlet faces the datum is the pressure; for Neumann faces it is the
    outward flux density (integrated over the face by the mesh builder).
    """
    model_config = ConfigDict(frozen=True)

    kind: BoundaryKind = BoundaryKind.NEUMANN
    value: float = 0.0
    slope: Tuple[float, float] = (0.0, 0.0)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.value + points @ np.asarray(self.slope, dtype=float)


class FractureSegment(BaseModel):
    """One straight fracture piece in domain coordinates."""
    model_config = ConfigDict(frozen=True)

    start: Tuple[float, float]
    end: Tuple[float, float]
    label: str = Field("fracture", min_length=1, description="Parameter group of the segment")


class FractureSpec(BaseModel):
    """Fracture network input for the structured mesh builder."""
    segments: List[FractureSegment] = Field(default_factory=list)

    def touches_boundary(self, domain: Rectangle, tol: float = 1e-12) -> List[Tuple[str, ...]]:
        """Domain sides touched by each segment's endpoints."""
        flags = []
        for segment in self.segments:
            sides = set()
            for x, y in (segment.start, segment.end):
                if abs(x - domain.xmin) < tol:
                    sides.add("left")
                if abs(x - domain.xmax) < tol:
                    sides.add("right")
                if abs(y - domain.ymin) < tol:
                    sides.add("bottom")
                if abs(y - domain.ymax) < tol:
                    sides.add("top")
            flags.append(tuple(sorted(sides)))
        return flags


def _freeze(obj) -> None:
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, np.ndarray):
            value.setflags(write=False)


@dataclass(frozen=True)
class MeshSource:
    """Unsplit 2D mesh plus fracture face tags and exterior boundary data.

    This is the common input of the splitting pipeline, produced either by the
    structured generator or by the mesh file reader.
    """
    nodes: np.ndarray
    cells: np.ndarray
    fracture_edges: np.ndarray
    fracture_labels: Tuple[str, ...]
    boundary: Dict[Tuple[int, int], BoundaryCondition] = field(default_factory=dict)
    default_boundary: BoundaryCondition = BoundaryCondition()
    tip_flux: float = 0.0
    domain: Optional[Rectangle] = None

    def __post_init__(self):
        _freeze(self)


@dataclass(frozen=True)
class SubdomainGrid:
    """Grid of one subdomain of dimension 0, 1 or 2.

    Faces are edges in 2D and points in 1D (area 1). A 0D grid has one cell of
    volume 1 and no faces. face_normals are unit vectors pointing out of
    face_cells[:, 0]; face_cells holds -1 where a face has a single cell.
    Boundary data: face_bc_value holds the Dirichlet value or the integrated
    Neumann flux; node_dirichlet holds nodal Dirichlet values (nan if free).
    """
    id: int
    dim: int
    nodes: np.ndarray
    cells: np.ndarray
    face_nodes: np.ndarray
    face_cells: np.ndarray
    face_areas: np.ndarray
    face_centers: np.ndarray
    face_normals: np.ndarray
    cell_volumes: np.ndarray
    cell_centers: np.ndarray
    cell_faces: np.ndarray
    cell_face_signs: np.ndarray
    face_kind: np.ndarray
    face_lower: np.ndarray
    face_side: np.ndarray
    face_bc_value: np.ndarray
    node_dirichlet: np.ndarray
    node_arc: Optional[np.ndarray] = None
    cell_labels: Tuple[str, ...] = ()
    label: Optional[str] = None

    def __post_init__(self):
        _freeze(self)

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def num_faces(self) -> int:
        return self.face_cells.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def measure(self) -> float:
        return float(self.cell_volumes.sum())

    @property
    def is_simplicial(self) -> bool:
        return self.cells.shape[1] == self.dim + 1

    @property
    def has_dirichlet(self) -> bool:
        return bool(np.any(self.face_kind == FaceKind.DIRICHLET))

    def boundary_tag(self, face: int) -> FaceTag:
        return FaceTag(FaceKind(int(self.face_kind[face])), int(self.face_lower[face]), int(self.face_side[face]))

    def faces_of_kind(self, kind: FaceKind) -> np.ndarray:
        return np.flatnonzero(self.face_kind == kind)

    def interface_faces(self, lower: int, side: int) -> np.ndarray:
        mask = (self.face_kind == FaceKind.INTERFACE) & (self.face_lower == lower) & (self.face_side == side)
        return np.flatnonzero(mask)


@dataclass(frozen=True)
class MixedDimMesh:
    """The full subdomain hierarchy with neighbor sets and face pairings.

    face_pairings[(lower, higher, side)] lists, for each cell of the lower
    subdomain, the coincident face of the higher one.
    """
    subdomains: Tuple[SubdomainGrid, ...]
    up_neighbors: Dict[int, Tuple[int, ...]]
    down_neighbors: Dict[int, Tuple[int, ...]]
    face_pairings: Dict[InterfaceKey, np.ndarray]
    source: Optional[MeshSource] = None

    @property
    def interfaces(self) -> List[InterfaceKey]:
        return sorted(self.face_pairings, key=lambda k: (k.lower, k.higher, -int(k.side)))

    def subdomain(self, index: int) -> SubdomainGrid:
        return self.subdomains[index]

    def grids_of_dim(self, dim: int) -> List[SubdomainGrid]:
        return [g for g in self.subdomains if g.dim == dim]

    def counts_by_dim(self) -> Tuple[int, int, int]:
        """Number of (2D, 1D, 0D) subdomains."""
        return tuple(len(self.grids_of_dim(d)) for d in (2, 1, 0))

    def interfaces_of(self, subdomain: int) -> List[InterfaceKey]:
        return [k for k in self.interfaces if subdomain in (k.lower, k.higher)]


class Finding(BaseModel):
    """One violated invariant."""
    kind: str
    subdomain: Optional[int] = None
    item: Optional[int] = None
    message: str = ""


class ValidationReport(BaseModel):
    """Result of validate_mesh; an empty findings list means the mesh is valid."""
    findings: List[Finding] = Field(default_factory=list)
    total_volume: float = 0.0

    @property
    def is_valid(self) -> bool:
        return not self.findings

    def kinds(self) -> List[str]:
        return [f.kind for f in self.findings]
