"""
Subdomain discretization models.
"""

from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sps


class MethodKind(str, Enum):
    """Subdomain discretization kinds."""
    TPFA = "tpfa"
    P1 = "p1"
    RT0H = "rt0h"
    POINT = "point"
    BLOCKING = "blocking"

    @property
    def zero_stiffness(self) -> bool:
        return self in (MethodKind.POINT, MethodKind.BLOCKING)

    @property
    def conservative(self) -> bool:
        return self in (MethodKind.TPFA, MethodKind.RT0H)


class TraceKind(str, Enum):
    """Shape of a trace basis function along an interface."""
    FACE = "face"
    HAT = "hat"
    POINT = "point"


@dataclass(frozen=True)
class TraceBasis:
    """One boundary degree of freedom seen by a mortar grid.

    FACE: constant on ``faces[0]``. HAT: nodal hat of ``node`` restricted to the
    interface faces in ``faces``. POINT: value at the end face of a 1D grid.
    """
    dof: int
    kind: TraceKind
    faces: Tuple[int, ...]
    node: int = -1


@dataclass(frozen=True)
class SubdomainParams:
    """Physical data of one subdomain.

    kappa: tangential permeability per cell. source: integrated sink per cell.
    Dirichlet values and integrated Neumann fluxes live on the grid faces.
    """
    kappa: np.ndarray
    source: np.ndarray
    kappa_perp: float = 1.0
    label: Optional[str] = None

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, np.ndarray):
                value.setflags(write=False)

    @property
    def min_kappa(self) -> float:
        return float(self.kappa.min()) if self.kappa.size else 0.0


@dataclass(frozen=True)
class SubdomainOperator:
    """Discrete solution operator of one subdomain.

    Unknowns x solve ``A x = load - S psi - N theta`` where psi holds sinks on
    the source basis and theta outward boundary fluxes on the trace basis.
    Outputs are the pressure on the source basis ``S^T x + pressure_offset`` and
    the traces ``N^T x + trace_offset``; the trace map is N^T by construction.

    Diagnostics: ``cell_outflow`` (+ offset) gives the summed outward flux per
    cell for conservative methods; ``reaction`` maps (x, psi, theta) to the
    outward flux through each Dirichlet face or node.
    """
    subdomain: int
    kind: MethodKind
    A: sps.csr_matrix
    load: np.ndarray
    source_injection: sps.csr_matrix
    neumann_injection: sps.csr_matrix
    pressure_offset: np.ndarray
    trace_offset: np.ndarray
    trace_layout: Dict[Tuple[int, int], List[TraceBasis]]
    source_intervals: np.ndarray
    cell_to_source: sps.csr_matrix
    has_dirichlet: bool
    source_measures: np.ndarray
    exterior_trace: Optional[sps.csr_matrix] = None
    exterior_trace_offset: Optional[np.ndarray] = None
    exterior_faces: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    cell_outflow: Optional[sps.csr_matrix] = None
    cell_outflow_offset: Optional[np.ndarray] = None
    reaction_x: Optional[sps.csr_matrix] = None
    reaction_source: Optional[sps.csr_matrix] = None
    reaction_trace: Optional[sps.csr_matrix] = None
    reaction_offset: Optional[np.ndarray] = None
    nodal_values: Optional[sps.csr_matrix] = None
    nodal_offset: Optional[np.ndarray] = None

    @property
    def num_dofs(self) -> int:
        return self.A.shape[0]

    @property
    def num_traces(self) -> int:
        return self.neumann_injection.shape[1]

    @property
    def num_sources(self) -> int:
        return self.source_injection.shape[1]

    @property
    def trace_map(self) -> sps.csr_matrix:
        return self.neumann_injection.T.tocsr()

    @property
    def pure_neumann(self) -> bool:
        """Nonzero stiffness with the constant vector in its kernel."""
        return not self.has_dirichlet and not self.kind.zero_stiffness

    def traces_of(self, lower: int, side: int) -> List[TraceBasis]:
        return self.trace_layout.get((lower, side), [])

    def pressure(self, x: np.ndarray) -> np.ndarray:
        """Pressure on the source basis."""
        return self.source_injection.T @ x + self.pressure_offset

    def cell_pressure(self, x: np.ndarray) -> np.ndarray:
        """Pressure averaged onto grid cells."""
        weights = self.cell_to_source.T
        return weights @ self.pressure(x)

    def trace(self, x: np.ndarray) -> np.ndarray:
        return self.neumann_injection.T @ x + self.trace_offset
