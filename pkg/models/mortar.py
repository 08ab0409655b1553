"""
Mortar interface models: flux grids, projection pairs and the divergence operator.
"""

from dataclasses import dataclass, fields
from typing import Dict, List, Tuple

import numpy as np
import scipy.sparse as sps

from models.grid import InterfaceKey, Side


def _freeze(obj) -> None:
    for f in fields(obj):
        value = getattr(obj, f.name)
        if isinstance(value, np.ndarray):
            value.setflags(write=False)


@dataclass(frozen=True)
class MortarInterface:
    """P0 flux grid on one side of one lower-dimensional subdomain.

    ``edges`` are breakpoints in the arc-length coordinate of the lower
    subdomain (``[0, 1]`` for a point interface, whose single cell has
    measure 1). A positive flux leaves the higher-dimensional neighbor.
    """
    id: int
    lower: int
    higher: int
    side: Side
    dim: int
    edges: np.ndarray
    measures: np.ndarray
    centers: np.ndarray

    def __post_init__(self):
        _freeze(self)

    @property
    def key(self) -> InterfaceKey:
        return InterfaceKey(self.lower, self.higher, self.side)

    @property
    def num_cells(self) -> int:
        return len(self.measures)

    @property
    def measure(self) -> float:
        return float(self.measures.sum())


@dataclass(frozen=True)
class ProjectionPair:
    """Overlap matrices of one interface.

    ``B`` (mortar x higher trace dofs) and ``B_lower`` (mortar x lower source
    dofs) are stored once; both projections derive from them so that
    ``M_T Pi_T = -Pi_N^T`` holds exactly.

    A ``decoupled`` interface joins an intersection to a blocking branch: B is
    empty and the mortar flux is held at zero.
    """
    interface: int
    B: sps.csr_matrix
    B_lower: sps.csr_matrix
    trace_dofs: np.ndarray
    mass: np.ndarray
    decoupled: bool = False

    @property
    def M_T(self) -> sps.dia_matrix:
        return sps.diags(self.mass)

    @property
    def pi_T(self) -> sps.csr_matrix:
        """Higher trace -> mortar (L2 projection)."""
        return sps.diags(1.0 / self.mass) @ self.B

    @property
    def pi_N(self) -> sps.csr_matrix:
        """Mortar -> higher Neumann load."""
        return (-self.B.T).tocsr()

    @property
    def pi_T_lower(self) -> sps.csr_matrix:
        return sps.diags(1.0 / self.mass) @ self.B_lower

    @property
    def pi_N_lower(self) -> sps.csr_matrix:
        return (-self.B_lower.T).tocsr()


@dataclass(frozen=True)
class DivergenceOperator:
    """Maps the stacked mortar vector to per-interface sink and Neumann rows.

    Row blocks: for each interface, ``sink_rows[i]`` (belongs to its lower
    subdomain, coefficient -1) and ``neumann_rows[i]`` (belongs to its higher
    subdomain, coefficient +1).
    """
    D: sps.csr_matrix
    mortar_offsets: np.ndarray
    sink_rows: Dict[int, np.ndarray]
    neumann_rows: Dict[int, np.ndarray]
    lower_of: Dict[int, int]
    higher_of: Dict[int, int]
    measures: np.ndarray

    @property
    def num_mortar_dofs(self) -> int:
        return self.D.shape[1]

    def mortar_slice(self, interface: int) -> slice:
        return slice(int(self.mortar_offsets[interface]), int(self.mortar_offsets[interface + 1]))

    def sink_totals(self, flux: np.ndarray) -> Dict[int, float]:
        """Integrated sink of each lower subdomain, -sum over its mortar cells."""
        rows = self.D @ flux
        totals: Dict[int, float] = {}
        for interface, sink in self.sink_rows.items():
            lower = self.lower_of[interface]
            measures = self.measures[self.mortar_slice(interface)]
            totals[lower] = totals.get(lower, 0.0) + float(rows[sink] @ measures)
        return totals

    def interfaces_with_lower(self, subdomain: int) -> List[int]:
        return [i for i, lower in self.lower_of.items() if lower == subdomain]
