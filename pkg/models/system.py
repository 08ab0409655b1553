"""
Coupled-system models: physical parameters of a whole mesh, the subdomain
partition, the monolithic and Schur complement systems, and solutions.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps

from models.case import SummaryRow
from models.grid import InterfaceKey, MixedDimMesh
from models.mortar import MortarInterface, ProjectionPair
from models.operators import SubdomainOperator, SubdomainParams
from services.linalg import DenseSymMatrix


@dataclass(frozen=True)
class ProblemParams:
    """Per-subdomain parameters and the normal permeability of every interface."""
    subdomains: Dict[int, SubdomainParams]
    kappa_perp: Dict[InterfaceKey, float]

    def __getitem__(self, subdomain: int) -> SubdomainParams:
        return self.subdomains[subdomain]


@dataclass(frozen=True)
class Partition:
    """Flowing (I_a), blocking (I_b) and pure-Neumann flowing subdomains."""
    flowing: Tuple[int, ...]
    blocking: Tuple[int, ...]
    pure_neumann: Tuple[int, ...]

    def is_blocking(self, subdomain: int) -> bool:
        return subdomain in self.blocking

    @property
    def ordered(self) -> Tuple[int, ...]:
        """Subdomain order of the block system: flowing first, blocking last."""
        return self.flowing + self.blocking


@dataclass(frozen=True)
class BlockSystem:
    """Monolithic saddle-point system [[A, C], [C^T, -K]].

    Unknown blocks in order: p_a | lambda_aa | lambda_ab | p_b, where lambda_ab
    holds the mortars whose lower subdomain is blocking. ``subdomain_index``
    and ``mortar_index`` map each subdomain's local unknowns and each stacked
    mortar dof to positions in the global vector.
    """
    matrix: sps.csr_matrix
    rhs: np.ndarray
    subdomain_index: Dict[int, np.ndarray]
    mortar_index: np.ndarray
    block_sizes: Dict[str, int]
    coupling: sps.csr_matrix
    perp_mass: np.ndarray
    partition: Partition

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class LocalInverse:
    """Generalized inverse of one subdomain stiffness and its kernel basis Z."""
    subdomain: int
    apply: Callable[[np.ndarray], np.ndarray]
    kernel: np.ndarray


@dataclass
class SchurSystem:
    """Mortar-only system with pure-Neumann augmentation.

    ``S = K + sum_i C_i^T X_i C_i``; the augmented matrix is
    ``[[S, Q], [Q^T, 0]]`` with ``Q = -C^T Z`` and unknowns (lambda, p_bar).
    """
    S: DenseSymMatrix
    Q: np.ndarray
    rhs_flux: np.ndarray
    rhs_constraint: np.ndarray
    pbar_index: Dict[int, slice]
    coupling: Dict[int, sps.csr_matrix]
    loads: Dict[int, np.ndarray]
    locals: Dict[int, LocalInverse] = field(default_factory=dict)

    @property
    def num_fluxes(self) -> int:
        return self.S.n

    @property
    def augmented(self) -> np.ndarray:
        m = self.Q.shape[1]
        top = np.hstack([self.S.values, self.Q])
        bottom = np.hstack([self.Q.T, np.zeros((m, m))])
        return np.vstack([top, bottom])

    @property
    def augmented_rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs_flux, self.rhs_constraint])


@dataclass
class Solution:
    """Solved state of every subdomain and interface.

    ``states`` are raw subdomain unknowns, ``pressures`` cell pressures,
    ``fluxes`` mortar coefficients (integrated flux = coefficient x measure),
    ``traces`` the higher-side trace projected onto each mortar grid and
    ``lower_pressures`` the lower pressure projected the same way.
    """
    states: Dict[int, np.ndarray]
    pressures: Dict[int, np.ndarray]
    fluxes: Dict[int, np.ndarray]
    traces: Dict[int, np.ndarray]
    lower_pressures: Dict[int, np.ndarray]
    solver: str
    residual: float = 0.0
    mean_pressures: Dict[int, np.ndarray] = field(default_factory=dict)
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def flux_vector(self) -> np.ndarray:
        return np.concatenate([self.fluxes[i] for i in sorted(self.fluxes)]) if self.fluxes else np.zeros(0)

    def pressure_vector(self) -> np.ndarray:
        ids = sorted(self.pressures)
        return np.concatenate([self.pressures[i] for i in ids]) if ids else np.zeros(0)

    def integrated_flux(self, mortar_id: int, measures: np.ndarray) -> float:
        return float(self.fluxes[mortar_id] @ measures)


@dataclass(frozen=True)
class CoupledProblem:
    """Everything needed to assemble and solve one discretized case."""
    mesh: MixedDimMesh
    mortars: Sequence[MortarInterface]
    params: ProblemParams
    partition: Partition
    operators: Dict[int, SubdomainOperator]
    projections: Sequence[ProjectionPair]

    @property
    def num_mortar_dofs(self) -> int:
        return sum(m.num_cells for m in self.mortars)

    @property
    def num_unknowns(self) -> int:
        return sum(op.num_dofs for op in self.operators.values()) + self.num_mortar_dofs


@dataclass
class CaseResult:
    """Outcome of one case run."""
    problem: CoupledProblem
    solution: Solution
    summary: SummaryRow
    files: List[Path] = field(default_factory=list)
