"""
Coupled problem assembly and solution.

Subdomain equations ``A_i x_i + C_i lambda = f_i`` and the interface law
``C^T x - K lambda = h`` form the monolithic system; eliminating x gives the
Schur complement over mortar fluxes.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps

from config import get_settings
from exceptions import (
    MissingOperator,
    MissingProjection,
    NestedBlockingDomains,
    SingularMatrix,
    SingularSystem,
)
from models.grid import MixedDimMesh
from models.mortar import MortarInterface, ProjectionPair
from models.operators import SubdomainOperator
from models.system import BlockSystem, LocalInverse, Partition, ProblemParams, SchurSystem, Solution
from services.discretization import bordered_matrix
from services.linalg import DenseSymMatrix, factor_solve, factorize, finalize_csr, min_eigenvalue_sym, residual_ok
from services.mortar import assemble_perp_mass

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Partition
# ---------------------------------------------------------------------------

def classify_subdomains(mesh: MixedDimMesh, params: ProblemParams, threshold: Optional[float] = None) -> Partition:
    """
    Split subdomains into flowing and blocking sets.

    A fracture is blocking when its tangential permeability is at most the
    threshold (default from settings, exactly zero). Points are flowing and,
    having no boundary, pure-Neumann.

    Intersections of a blocking fracture stay flowing; their mortars towards
    the blocking branches carry no flux.

    Raises:
        NestedBlockingDomains: a blocking subdomain has a blocking up-neighbor,
            or every branch meeting at an intersection is blocking
    """
    threshold = get_settings().KAPPA_PAR_THRESHOLD if threshold is None else threshold
    flowing, blocking, pure = [], [], []
    for grid in mesh.subdomains:
        if grid.dim in (1, 2) and float(params[grid.id].kappa.max()) <= threshold:
            blocking.append(grid.id)
            continue
        flowing.append(grid.id)
        if not grid.has_dirichlet:
            pure.append(grid.id)

    nested = sorted(i for i in blocking if any(j in blocking for j in mesh.up_neighbors.get(i, ())))
    if nested:
        raise NestedBlockingDomains(f"blocking subdomains {nested} have blocking up-neighbors", nested)
    isolated = sorted(
        grid.id for grid in mesh.grids_of_dim(0)
        if all(j in blocking for j in mesh.up_neighbors.get(grid.id, ()))
    )
    if isolated:
        raise NestedBlockingDomains(f"intersections {isolated} meet only blocking fractures", isolated)
    partition = Partition(flowing=tuple(flowing), blocking=tuple(blocking), pure_neumann=tuple(pure))
    logger.debug("partition: %d flowing (%d pure Neumann), %d blocking",
                 len(flowing), len(pure), len(blocking))
    return partition


# ---------------------------------------------------------------------------
# Coupling
# ---------------------------------------------------------------------------

def _check_inputs(mesh, mortars, operators, projections) -> Dict[int, ProjectionPair]:
    for grid in mesh.subdomains:
        if grid.id not in operators:
            raise MissingOperator(grid.id)
    by_id = {p.interface: p for p in projections}
    for mortar in mortars:
        if mortar.id not in by_id:
            raise MissingProjection(mortar.id)
    return by_id


def subdomain_loads(operators: Mapping[int, SubdomainOperator], params: ProblemParams) -> Dict[int, np.ndarray]:
    """f_i = load_i - S_i psi_i for the prescribed sinks."""
    loads = {}
    for i, op in operators.items():
        source = params[i].source
        loads[i] = op.load - op.source_injection @ (op.cell_to_source @ source)
    return loads


def coupling_blocks(
    mortars: Sequence[MortarInterface],
    operators: Mapping[int, SubdomainOperator],
    projections: Mapping[int, ProjectionPair],
) -> Tuple[Dict[int, sps.csr_matrix], np.ndarray]:
    """
    Coupling matrix C_i of every subdomain and the interface right-hand side h.

    Lower neighbor rows: -S_l B_lower^T (mortar flux is an influx, i.e. a
    negative sink). Higher neighbor rows: N_h B^T (mortar flux leaves it).
    Decoupled interfaces get no coupling, so their interface law reads
    -K lambda = 0.
    """
    offsets = np.concatenate([[0], np.cumsum([m.num_cells for m in mortars])]).astype(int)
    n_mortar = int(offsets[-1])
    pieces: Dict[int, List[Tuple[sps.spmatrix, int]]] = {i: [] for i in operators}
    h = np.zeros(n_mortar)
    for m in mortars:
        pair = projections[m.id]
        if pair.decoupled:
            continue
        lower, higher = operators[m.lower], operators[m.higher]
        pieces[m.lower].append((-(lower.source_injection @ pair.B_lower.T), m.id))
        traces = higher.neumann_injection[:, pair.trace_dofs]
        pieces[m.higher].append((traces @ pair.B.T, m.id))
        block = slice(offsets[m.id], offsets[m.id + 1])
        h[block] = pair.B_lower @ lower.pressure_offset - pair.B @ higher.trace_offset[pair.trace_dofs]

    blocks = {}
    for i, op in operators.items():
        rows, cols, vals = [], [], []
        for piece, mortar_id in pieces[i]:
            coo = sps.coo_matrix(piece)
            rows.append(coo.row)
            cols.append(coo.col + offsets[mortar_id])
            vals.append(coo.data)
        if rows:
            blocks[i] = finalize_csr(sps.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(op.num_dofs, n_mortar),
            ))
        else:
            blocks[i] = sps.csr_matrix((op.num_dofs, n_mortar))
    return blocks, h


def _perp_diagonal(mortars: Sequence[MortarInterface], params: ProblemParams) -> np.ndarray:
    kappa = {m.id: params.kappa_perp[m.key] for m in mortars}
    return assemble_perp_mass(mortars, kappa).diagonal()


def _require_dirichlet(operators: Mapping[int, SubdomainOperator]) -> None:
    if not any(op.has_dirichlet for op in operators.values()):
        raise SingularSystem("no subdomain has a Dirichlet boundary; pressure is determined only up to a constant")


# ---------------------------------------------------------------------------
# Monolithic system
# ---------------------------------------------------------------------------

def assemble_global_system(
    mesh: MixedDimMesh,
    mortars: Sequence[MortarInterface],
    operators: Mapping[int, SubdomainOperator],
    params: ProblemParams,
    projections: Sequence[ProjectionPair],
    partition: Optional[Partition] = None,
) -> BlockSystem:
    """
    Assemble the monolithic saddle-point system.

    Args:
        mesh: Mixed-dimensional mesh
        mortars: Mortar grids
        operators: Subdomain operator per subdomain id
        params: Sinks and normal permeabilities
        projections: Projection pair per mortar
        partition: Flowing/blocking split (classified from params if omitted)

    Returns:
        BlockSystem with unknowns ordered p_a | lambda_aa | lambda_ab | p_b
    """
    by_id = _check_inputs(mesh, mortars, operators, projections)
    partition = partition or classify_subdomains(mesh, params)
    blocks, h = coupling_blocks(mortars, operators, by_id)
    loads = subdomain_loads(operators, params)
    perp = _perp_diagonal(mortars, params)

    offsets = np.concatenate([[0], np.cumsum([m.num_cells for m in mortars])]).astype(int)
    flowing_mortars = [m for m in mortars if not partition.is_blocking(m.lower)]
    blocking_mortars = [m for m in mortars if partition.is_blocking(m.lower)]

    position = 0
    subdomain_index: Dict[int, np.ndarray] = {}
    for i in partition.flowing:
        subdomain_index[i] = position + np.arange(operators[i].num_dofs)
        position += operators[i].num_dofs
    n_pa = position
    mortar_index = np.zeros(int(offsets[-1]), dtype=int)
    for group in (flowing_mortars, blocking_mortars):
        for m in group:
            mortar_index[offsets[m.id]:offsets[m.id + 1]] = position + np.arange(m.num_cells)
            position += m.num_cells
    for i in partition.blocking:
        subdomain_index[i] = position + np.arange(operators[i].num_dofs)
        position += operators[i].num_dofs
    n = position

    sub_perm = np.concatenate([subdomain_index[i] for i in partition.ordered]) if partition.ordered else np.zeros(0, int)
    A_local = sps.block_diag([operators[i].A for i in partition.ordered], format="coo")
    C_local = sps.vstack([blocks[i] for i in partition.ordered], format="coo")
    f_local = np.concatenate([loads[i] for i in partition.ordered])

    rows = [sub_perm[A_local.row], sub_perm[C_local.row], mortar_index[C_local.col], mortar_index]
    cols = [sub_perm[A_local.col], mortar_index[C_local.col], sub_perm[C_local.row], mortar_index]
    vals = [A_local.data, C_local.data, C_local.data, -perp]
    matrix = finalize_csr(sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ))
    rhs = np.zeros(n)
    rhs[sub_perm] = f_local
    rhs[mortar_index] = h

    coupling = finalize_csr(sps.coo_matrix(
        (C_local.data, (sub_perm[C_local.row], C_local.col)), shape=(n, len(mortar_index))
    ))
    sizes = {
        "p_a": n_pa,
        "lambda_aa": sum(m.num_cells for m in flowing_mortars),
        "lambda_ab": sum(m.num_cells for m in blocking_mortars),
        "p_b": n - n_pa - int(offsets[-1]),
    }
    logger.debug("global system: %d unknowns %s", n, sizes)
    return BlockSystem(
        matrix=matrix,
        rhs=rhs,
        subdomain_index=subdomain_index,
        mortar_index=mortar_index,
        block_sizes=sizes,
        coupling=coupling,
        perp_mass=perp,
        partition=partition,
    )


def build_solution(
    states: Dict[int, np.ndarray],
    fluxes: np.ndarray,
    mortars: Sequence[MortarInterface],
    operators: Mapping[int, SubdomainOperator],
    projections: Sequence[ProjectionPair],
    solver: str,
    residual: float = 0.0,
) -> Solution:
    """Split stacked unknowns into per-subdomain and per-interface fields."""
    by_id = {p.interface: p for p in projections}
    pressures = {i: operators[i].cell_pressure(x) for i, x in states.items()}
    flux_of, traces, lower_pressures = {}, {}, {}
    position = 0
    for m in mortars:
        pair = by_id[m.id]
        flux_of[m.id] = fluxes[position:position + m.num_cells]
        position += m.num_cells
        trace = operators[m.higher].trace(states[m.higher])[pair.trace_dofs]
        traces[m.id] = pair.pi_T @ trace
        lower_pressures[m.id] = pair.pi_T_lower @ operators[m.lower].pressure(states[m.lower])
    return Solution(
        states=states,
        pressures=pressures,
        fluxes=flux_of,
        traces=traces,
        lower_pressures=lower_pressures,
        solver=solver,
        residual=residual,
    )


def solve_global(
    system: BlockSystem,
    mortars: Sequence[MortarInterface],
    operators: Mapping[int, SubdomainOperator],
    projections: Sequence[ProjectionPair],
) -> Solution:
    """
    Direct solve of the monolithic system.

    Raises:
        SingularSystem: no Dirichlet boundary anywhere, or the factorization
            cannot meet the residual contract
    """
    _require_dirichlet(operators)
    try:
        x = factor_solve(system.matrix, system.rhs)
    except SingularMatrix as exc:
        raise SingularSystem(f"monolithic system is singular ({exc})") from exc
    _, residual = residual_ok(system.matrix, x, system.rhs)
    states = {i: x[index] for i, index in system.subdomain_index.items()}
    logger.info("solved global system with %d unknowns (residual %.2e)", system.size, residual)
    return build_solution(states, x[system.mortar_index], mortars, operators, projections, "global", residual)


# ---------------------------------------------------------------------------
# Schur complement
# ---------------------------------------------------------------------------

def local_inverse(op: SubdomainOperator) -> LocalInverse:
    """Inverse of A (Dirichlet), mean-pinned inverse (pure Neumann) or zero (no stiffness)."""
    n = op.num_dofs
    if op.kind.zero_stiffness:
        return LocalInverse(op.subdomain, lambda rhs: np.zeros_like(rhs), np.eye(n))
    if op.pure_neumann:
        factor = factorize(bordered_matrix(op))

        def apply(rhs: np.ndarray) -> np.ndarray:
            padded = np.concatenate([rhs, np.zeros((1,) + rhs.shape[1:])])
            return factor.solve(padded)[:n]

        return LocalInverse(op.subdomain, apply, np.ones((n, 1)))
    factor = factorize(op.A)
    return LocalInverse(op.subdomain, factor.solve, np.zeros((n, 0)))


def assemble_schur(
    mesh: MixedDimMesh,
    mortars: Sequence[MortarInterface],
    operators: Mapping[int, SubdomainOperator],
    params: ProblemParams,
    projections: Sequence[ProjectionPair],
    partition: Optional[Partition] = None,
) -> SchurSystem:
    """
    Eliminate all subdomain unknowns and keep the mortar fluxes.

    Columns of C_i^T X_i C_i are produced one subdomain at a time (in a thread
    pool); each uses a single factorization of that subdomain's matrix for
    all mortar columns it touches. Pure-Neumann and zero-stiffness
    subdomains add one mean-pressure unknown per kernel vector.

    Returns:
        SchurSystem with dense S
    """
    by_id = _check_inputs(mesh, mortars, operators, projections)
    partition = partition or classify_subdomains(mesh, params)
    blocks, h = coupling_blocks(mortars, operators, by_id)
    loads = subdomain_loads(operators, params)
    n_mortar = len(h)

    def eliminate(i: int):
        inverse = local_inverse(operators[i])
        C = blocks[i]
        touched = np.unique(C.indices)
        contribution = np.zeros((len(touched), len(touched)))
        if touched.size and not operators[i].kind.zero_stiffness:
            Cd = C[:, touched].toarray()
            contribution = Cd.T @ inverse.apply(Cd)
        flux_rhs = C.T @ inverse.apply(loads[i])
        return i, inverse, touched, contribution, flux_rhs

    workers = max(1, min(get_settings().MDFC_THREADS, len(operators)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(eliminate, sorted(operators)))

    S = np.diag(_perp_diagonal(mortars, params))
    rhs_flux = -h.copy()
    locals_: Dict[int, LocalInverse] = {}
    for i, inverse, touched, contribution, flux_rhs in results:
        locals_[i] = inverse
        if touched.size:
            S[np.ix_(touched, touched)] += contribution
        rhs_flux += flux_rhs
    S = 0.5 * (S + S.T)

    pbar_index: Dict[int, slice] = {}
    q_columns, constraint = [], []
    position = 0
    for i in sorted(operators):
        Z = locals_[i].kernel
        if Z.shape[1] == 0:
            continue
        pbar_index[i] = slice(position, position + Z.shape[1])
        position += Z.shape[1]
        q_columns.append(-(blocks[i].T @ Z))
        constraint.append(-(Z.T @ loads[i]))
    Q = np.hstack(q_columns) if q_columns else np.zeros((n_mortar, 0))
    logger.debug("schur system: %d fluxes, %d mean pressures", n_mortar, Q.shape[1])
    return SchurSystem(
        S=DenseSymMatrix(S),
        Q=np.asarray(Q),
        rhs_flux=rhs_flux,
        rhs_constraint=np.concatenate(constraint) if constraint else np.zeros(0),
        pbar_index=pbar_index,
        coupling=blocks,
        loads=loads,
        locals=locals_,
    )


def solve_schur(
    schur: SchurSystem,
    mortars: Sequence[MortarInterface],
    operators: Mapping[int, SubdomainOperator],
    projections: Sequence[ProjectionPair],
) -> Solution:
    """
    Solve the augmented mortar system, then reconstruct every subdomain.

    Raises:
        SingularSystem: as solve_global
    """
    _require_dirichlet(operators)
    matrix = schur.augmented
    rhs = schur.augmented_rhs
    try:
        unknowns = factor_solve(matrix, rhs)
    except SingularMatrix as exc:
        raise SingularSystem(f"schur system is singular ({exc})") from exc
    _, residual = residual_ok(matrix, unknowns, rhs)
    n = schur.num_fluxes
    fluxes, pbar = unknowns[:n], unknowns[n:]

    states: Dict[int, np.ndarray] = {}
    means: Dict[int, np.ndarray] = {}
    for i in sorted(operators):
        inverse = schur.locals[i]
        x = inverse.apply(schur.loads[i] - schur.coupling[i] @ fluxes)
        if i in schur.pbar_index:
            means[i] = pbar[schur.pbar_index[i]]
            x = x + inverse.kernel @ means[i]
        states[i] = x
    logger.info("solved schur system with %d fluxes (residual %.2e)", n, residual)
    solution = build_solution(states, fluxes, mortars, operators, projections, "schur", residual)
    solution.mean_pressures = means
    return solution


def schur_min_eigenvalue(schur: SchurSystem, seed: int = 0) -> float:
    """Smallest eigenvalue of S (the stability indicator n_min)."""
    value, _ = min_eigenvalue_sym(schur.S, seed=seed)
    return value


def schur_spectrum(schur: SchurSystem) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of S and of the augmented saddle matrix, ascending."""
    return np.linalg.eigvalsh(schur.S.values), np.linalg.eigvalsh(schur.augmented)
