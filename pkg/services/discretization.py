"""
Subdomain discretizations.

Each assembler returns a SubdomainOperator in the generic form
``A x = load - S psi - N theta``: psi are integrated sinks per cell, theta
integrated outward fluxes per trace dof. A is symmetric and N^T is the trace
map, so the solution operator is self-adjoint in the mortar pairing.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sps

from config import get_settings
from exceptions import ConfigError, IncompatibleData, NonSimplicialGrid, ZeroDistance
from models.grid import FaceKind, SubdomainGrid
from models.operators import MethodKind, SubdomainOperator, SubdomainParams, TraceBasis, TraceKind
from services.linalg import factor_solve, finalize_csr

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _check_params(grid: SubdomainGrid, params: SubdomainParams) -> None:
    if grid.dim not in (1, 2):
        raise ValueError(f"subdomain {grid.id}: dimension {grid.dim} has no tangential discretization")
    if params.kappa.shape != (grid.num_cells,):
        raise ValueError(f"subdomain {grid.id}: expected {grid.num_cells} permeabilities, got {params.kappa.shape}")
    if not np.all(params.kappa > 0):
        raise ValueError(f"subdomain {grid.id}: tangential permeability must be positive")


def _source_vector(grid: SubdomainGrid, params: SubdomainParams) -> np.ndarray:
    return np.zeros(grid.num_cells) if params.source is None else np.asarray(params.source, dtype=float)


def _source_intervals(grid: SubdomainGrid) -> np.ndarray:
    if grid.dim == 1:
        return np.column_stack([grid.node_arc[:-1], grid.node_arc[1:]])
    return np.zeros((0, 2))


def _interface_groups(grid: SubdomainGrid) -> List[Tuple[Tuple[int, int], np.ndarray]]:
    """Interface faces grouped by (lower, side), lower ascending and + before -."""
    faces = grid.faces_of_kind(FaceKind.INTERFACE)
    keys = sorted({(int(grid.face_lower[f]), int(grid.face_side[f])) for f in faces}, key=lambda k: (k[0], -k[1]))
    return [(key, grid.interface_faces(*key)) for key in keys]


def _face_traces(grid: SubdomainGrid, face_dof: np.ndarray, n_dofs: int):
    """One trace per interface face, injected at that face's unknown."""
    kind = TraceKind.POINT if grid.dim == 1 else TraceKind.FACE
    layout: Dict[Tuple[int, int], List[TraceBasis]] = {}
    rows: List[int] = []
    for key, faces in _interface_groups(grid):
        basis = []
        for f in faces:
            basis.append(TraceBasis(dof=len(rows), kind=kind, faces=(int(f),),
                                    node=int(f) if grid.dim == 1 else -1))
            rows.append(int(face_dof[f]))
        layout[key] = basis
    n_traces = len(rows)
    N = sps.csr_matrix((np.ones(n_traces), (rows, np.arange(n_traces))), shape=(n_dofs, n_traces))
    return layout, N


def _selector(rows: np.ndarray, cols: np.ndarray, values: np.ndarray, shape) -> sps.csr_matrix:
    return finalize_csr(sps.coo_matrix((values, (rows, cols)), shape=shape))


def _cell_injection(n_dofs: int, n_cells: int, first: int = 0) -> sps.csr_matrix:
    return _selector(first + np.arange(n_cells), np.arange(n_cells), np.ones(n_cells), (n_dofs, n_cells))


# ---------------------------------------------------------------------------
# Two-point flux approximation
# ---------------------------------------------------------------------------

def half_transmissibilities(grid: SubdomainGrid, kappa: np.ndarray) -> np.ndarray:
    """kappa * area / |face center - cell center| for every (cell, local face)."""
    faces = grid.cell_faces
    distance = np.linalg.norm(grid.face_centers[faces] - grid.cell_centers[:, None, :], axis=2)
    tiny = 1e-12 * max(float(distance.max(initial=0.0)), 1e-300)
    bad = np.argwhere(distance <= tiny)
    if bad.size:
        cell, local = (int(v) for v in bad[0])
        face = int(faces[cell, local])
        raise ZeroDistance(f"subdomain {grid.id}: center of cell {cell} lies on face {face}", cell, face)
    return kappa[:, None] * grid.face_areas[faces] / distance


def face_transmissibilities(grid: SubdomainGrid, params: SubdomainParams) -> np.ndarray:
    """
    Transmissibility per face: harmonic pair on interior faces, the single
    half-transmissibility on boundary faces.
    """
    _check_params(grid, params)
    return _face_half_pairs(grid, half_transmissibilities(grid, params.kappa))[2]


def _face_half_pairs(grid: SubdomainGrid, half: np.ndarray):
    pairs = np.zeros((grid.num_faces, 2))
    slot = (grid.cell_face_signs < 0).astype(int)
    pairs[grid.cell_faces, slot] = half
    t0, t1 = pairs[:, 0], pairs[:, 1]
    interior = grid.face_cells[:, 1] >= 0
    total = np.where(interior, t0 * t1 / np.where(interior, t0 + t1, 1.0), t0)
    return t0, t1, total


def assemble_tpfa(grid: SubdomainGrid, params: SubdomainParams) -> SubdomainOperator:
    """
    Cell-centered two-point scheme.

    Unknowns are the cell pressures followed by one pressure per interface
    face. Exterior Neumann fluxes go straight into the cell load and their
    face pressure is reconstructed as p_cell - g / T_half.

    Args:
        grid: 1D or 2D subdomain grid
        params: Permeability and sinks of the subdomain

    Returns:
        SubdomainOperator of kind TPFA
    """
    _check_params(grid, params)
    nc = grid.num_cells
    t0, _, trans = _face_half_pairs(grid, half_transmissibilities(grid, params.kappa))
    kind = grid.face_kind
    c0, c1 = grid.face_cells[:, 0], grid.face_cells[:, 1]

    interface = np.flatnonzero(kind == FaceKind.INTERFACE)
    face_dof = -np.ones(grid.num_faces, dtype=int)
    face_dof[interface] = nc + np.arange(len(interface))
    n = nc + len(interface)

    rows, cols, vals = [], [], []

    def couple(a, b, t):
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([t, t, -t, -t])

    inner = np.flatnonzero(kind == FaceKind.INTERIOR)
    couple(c0[inner], c1[inner], trans[inner])
    couple(c0[interface], face_dof[interface], t0[interface])

    load = np.zeros(n)
    dirichlet = np.flatnonzero(kind == FaceKind.DIRICHLET)
    rows.append(c0[dirichlet])
    cols.append(c0[dirichlet])
    vals.append(t0[dirichlet])
    np.add.at(load, c0[dirichlet], t0[dirichlet] * grid.face_bc_value[dirichlet])
    neumann = np.flatnonzero(kind == FaceKind.NEUMANN)
    np.add.at(load, c0[neumann], -grid.face_bc_value[neumann])

    A = _selector(np.concatenate([np.atleast_1d(r) for r in rows]),
                  np.concatenate([np.atleast_1d(c) for c in cols]),
                  np.concatenate([np.atleast_1d(v) for v in vals]), (n, n))
    layout, N = _face_traces(grid, face_dof, n)

    reaction_x = _selector(np.arange(len(dirichlet)), c0[dirichlet], t0[dirichlet], (len(dirichlet), n))
    logger.debug("tpfa subdomain %d: %d cells, %d interface faces", grid.id, nc, len(interface))
    return SubdomainOperator(
        subdomain=grid.id,
        kind=MethodKind.TPFA,
        A=A,
        load=load,
        source_injection=_cell_injection(n, nc),
        neumann_injection=N,
        pressure_offset=np.zeros(nc),
        trace_offset=np.zeros(N.shape[1]),
        trace_layout=layout,
        source_intervals=_source_intervals(grid),
        cell_to_source=sps.identity(nc, format="csr"),
        has_dirichlet=bool(dirichlet.size),
        source_measures=grid.cell_volumes.copy(),
        exterior_trace=_selector(np.arange(len(neumann)), c0[neumann], np.ones(len(neumann)), (len(neumann), n)),
        exterior_trace_offset=-grid.face_bc_value[neumann] / t0[neumann],
        exterior_faces=neumann,
        cell_outflow=finalize_csr(A[:nc]),
        cell_outflow_offset=-load[:nc],
        reaction_x=reaction_x,
        reaction_offset=-t0[dirichlet] * grid.face_bc_value[dirichlet],
    )


# ---------------------------------------------------------------------------
# Linear Lagrange elements
# ---------------------------------------------------------------------------

def _require_simplices(grid: SubdomainGrid) -> None:
    if not grid.is_simplicial:
        raise NonSimplicialGrid(
            f"subdomain {grid.id}: {grid.cells.shape[1]}-node cells are not simplices; use tpfa or a triangle grid"
        )


def p1_local_stiffness(points: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """Exact stiffness kappa |K| grad(phi_a) . grad(phi_b) of every simplex.

    points has shape (cells, d + 1, 2); segments are measured along their length.
    """
    n_cells, k, _ = points.shape
    if k == 2:
        length = np.linalg.norm(points[:, 1] - points[:, 0], axis=1)
        unit = np.array([[1.0, -1.0], [-1.0, 1.0]])
        return (kappa / length)[:, None, None] * unit[None]
    G = np.ones((n_cells, 3, 3))
    G[:, :, 1:] = points
    coefficients = np.linalg.inv(G)
    grads = np.transpose(coefficients[:, 1:, :], (0, 2, 1))
    area = 0.5 * np.abs(np.linalg.det(G))
    return (kappa * area)[:, None, None] * np.einsum("cad,cbd->cab", grads, grads)


def assemble_p1(grid: SubdomainGrid, params: SubdomainParams) -> SubdomainOperator:
    """
    Continuous piecewise-linear elements on triangles or segments.

    Unknowns are the non-Dirichlet nodes. Every (interface, node) pair gets a
    hat trace; Dirichlet nodes contribute a zero column and a fixed offset.
    """
    _check_params(grid, params)
    _require_simplices(grid)
    d = grid.dim
    nc, nn, k = grid.num_cells, grid.num_nodes, d + 1

    local = p1_local_stiffness(grid.nodes[grid.cells], params.kappa)
    rows = np.repeat(grid.cells, k, axis=1).ravel()
    cols = np.tile(grid.cells, (1, k)).ravel()
    K = _selector(rows, cols, local.ravel(), (nn, nn))

    fixed = ~np.isnan(grid.node_dirichlet)
    free_nodes = np.flatnonzero(~fixed)
    fixed_nodes = np.flatnonzero(fixed)
    g = grid.node_dirichlet[fixed_nodes]
    dof_of = -np.ones(nn, dtype=int)
    dof_of[free_nodes] = np.arange(len(free_nodes))
    n = len(free_nodes)

    S_full = _selector(grid.cells.ravel(), np.repeat(np.arange(nc), k), np.full(nc * k, 1.0 / k), (nn, nc))

    exterior = np.zeros(nn)
    neumann = grid.faces_of_kind(FaceKind.NEUMANN)
    face_nodes = grid.face_nodes[neumann]
    np.add.at(exterior, face_nodes.ravel(),
              np.repeat(grid.face_bc_value[neumann] / face_nodes.shape[1], face_nodes.shape[1]))

    layout: Dict[Tuple[int, int], List[TraceBasis]] = {}
    trace_nodes: List[int] = []
    hat_kind = TraceKind.HAT if d == 2 else TraceKind.POINT
    for key, faces in _interface_groups(grid):
        basis = []
        for node in np.unique(grid.face_nodes[faces]):
            touching = tuple(int(f) for f in faces if node in grid.face_nodes[f])
            basis.append(TraceBasis(dof=len(trace_nodes), kind=hat_kind, faces=touching, node=int(node)))
            trace_nodes.append(int(node))
        layout[key] = basis
    n_traces = len(trace_nodes)
    trace_nodes = np.array(trace_nodes, dtype=int)
    N_full = _selector(trace_nodes, np.arange(n_traces), np.ones(n_traces), (nn, n_traces))

    K_ff = K[free_nodes][:, free_nodes]
    K_fd = K[free_nodes][:, fixed_nodes]
    load = -(K_fd @ g) - exterior[free_nodes]

    trace_offset = np.where(fixed[trace_nodes], np.nan_to_num(grid.node_dirichlet[trace_nodes]), 0.0)
    nodal_values = _selector(free_nodes, np.arange(n), np.ones(n), (nn, n))
    nodal_offset = np.nan_to_num(grid.node_dirichlet)

    ext_rows = np.repeat(np.arange(len(neumann)), face_nodes.shape[1])
    exterior_trace = _selector(ext_rows, face_nodes.ravel(), np.full(face_nodes.size, 1.0 / face_nodes.shape[1]),
                               (len(neumann), nn))

    K_d = K[fixed_nodes]
    return SubdomainOperator(
        subdomain=grid.id,
        kind=MethodKind.P1,
        A=finalize_csr(K_ff),
        load=load,
        source_injection=finalize_csr(S_full[free_nodes]),
        neumann_injection=finalize_csr(N_full[free_nodes]),
        pressure_offset=S_full[fixed_nodes].T @ g,
        trace_offset=trace_offset,
        trace_layout=layout,
        source_intervals=_source_intervals(grid),
        cell_to_source=sps.identity(nc, format="csr"),
        has_dirichlet=bool(fixed_nodes.size),
        source_measures=grid.cell_volumes.copy(),
        exterior_trace=finalize_csr(exterior_trace @ nodal_values),
        exterior_trace_offset=exterior_trace @ nodal_offset,
        exterior_faces=neumann,
        reaction_x=finalize_csr(-K_d[:, free_nodes]),
        reaction_source=finalize_csr(-S_full[fixed_nodes]),
        reaction_trace=finalize_csr(-N_full[fixed_nodes]),
        reaction_offset=-(K_d[:, fixed_nodes] @ g) - exterior[fixed_nodes],
        nodal_values=nodal_values,
        nodal_offset=nodal_offset,
    )


# ---------------------------------------------------------------------------
# Hybridized lowest-order Raviart-Thomas
# ---------------------------------------------------------------------------

def rt0_local_mass(points: np.ndarray, kappa: np.ndarray) -> np.ndarray:
    """Flux mass matrix of the RT0 basis of every simplex.

    Basis i is (x - P_i) / (d |K|) with P_i the vertex opposite local face i,
    where local face i of a cell is ``cell_faces[c, i]`` (opposite vertex
    ``(i + d) mod (d + 1)``).
    """
    n_cells, k, _ = points.shape
    d = k - 1
    opposite = points[:, (np.arange(k) + d) % k, :]
    w = points[:, :, None, :] - opposite[:, None, :, :]
    s = w.sum(axis=1)
    if d == 1:
        volume = np.linalg.norm(points[:, 1] - points[:, 0], axis=1)
    else:
        e1, e2 = points[:, 1] - points[:, 0], points[:, 2] - points[:, 0]
        volume = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    integral = np.einsum("caid,cajd->cij", w, w) + np.einsum("cid,cjd->cij", s, s)
    factor = volume / ((d + 1) * (d + 2)) / (kappa * (d * volume) ** 2)
    return factor[:, None, None] * integral


def assemble_rt0h(grid: SubdomainGrid, params: SubdomainParams) -> SubdomainOperator:
    """
    Mixed RT0/P0 elements with fluxes condensed onto face pressures.

    Unknowns are the cell pressures followed by the non-Dirichlet face
    pressures. Per cell the outward face fluxes are u = W (p_K - lambda_faces)
    with W the inverse local flux mass matrix.
    """
    _check_params(grid, params)
    _require_simplices(grid)
    nc, nf, k = grid.num_cells, grid.num_faces, grid.dim + 1
    kind = grid.face_kind

    dirichlet = np.flatnonzero(kind == FaceKind.DIRICHLET)
    open_faces = np.flatnonzero(kind != FaceKind.DIRICHLET)
    face_dof = -np.ones(nf, dtype=int)
    face_dof[open_faces] = nc + np.arange(len(open_faces))
    n = nc + len(open_faces)
    known_value = np.where(kind == FaceKind.DIRICHLET, grid.face_bc_value, 0.0)

    W = np.linalg.inv(rt0_local_mass(grid.nodes[grid.cells], params.kappa))
    W1 = W.sum(axis=2)
    local = np.zeros((nc, k + 1, k + 1))
    local[:, 0, 0] = W1.sum(axis=1)
    local[:, 0, 1:] = -W1
    local[:, 1:, 0] = -W1
    local[:, 1:, 1:] = W

    dofs = np.column_stack([np.arange(nc), face_dof[grid.cell_faces]])
    values = np.column_stack([np.zeros(nc), known_value[grid.cell_faces]])
    free = dofs >= 0
    pair = free[:, :, None] & free[:, None, :]
    rows = np.broadcast_to(dofs[:, :, None], local.shape)[pair]
    cols = np.broadcast_to(dofs[:, None, :], local.shape)[pair]
    A = _selector(rows, cols, local[pair], (n, n))

    load = np.zeros(n)
    shift = -np.einsum("cij,cj->ci", local, values)
    np.add.at(load, dofs[free], shift[free])
    neumann = np.flatnonzero(kind == FaceKind.NEUMANN)
    np.add.at(load, face_dof[neumann], -grid.face_bc_value[neumann])

    layout, N = _face_traces(grid, face_dof, n)

    # Outward flux through each Dirichlet face of its single cell.
    r_rows, r_cols, r_vals = [], [], []
    r_offset = np.zeros(len(dirichlet))
    for row, f in enumerate(dirichlet):
        c = int(grid.face_cells[f, 0])
        j = int(np.flatnonzero(grid.cell_faces[c] == f)[0])
        r_rows.append(row)
        r_cols.append(c)
        r_vals.append(W1[c, j])
        for i, face in enumerate(grid.cell_faces[c]):
            if face_dof[face] >= 0:
                r_rows.append(row)
                r_cols.append(face_dof[face])
                r_vals.append(-W[c, j, i])
            else:
                r_offset[row] -= W[c, j, i] * known_value[face]

    logger.debug("rt0h subdomain %d: %d cells, %d face unknowns", grid.id, nc, len(open_faces))
    return SubdomainOperator(
        subdomain=grid.id,
        kind=MethodKind.RT0H,
        A=A,
        load=load,
        source_injection=_cell_injection(n, nc),
        neumann_injection=N,
        pressure_offset=np.zeros(nc),
        trace_offset=np.zeros(N.shape[1]),
        trace_layout=layout,
        source_intervals=_source_intervals(grid),
        cell_to_source=sps.identity(nc, format="csr"),
        has_dirichlet=bool(dirichlet.size),
        source_measures=grid.cell_volumes.copy(),
        exterior_trace=_selector(np.arange(len(neumann)), face_dof[neumann], np.ones(len(neumann)), (len(neumann), n)),
        exterior_trace_offset=np.zeros(len(neumann)),
        exterior_faces=neumann,
        cell_outflow=finalize_csr(A[:nc]),
        cell_outflow_offset=-load[:nc],
        reaction_x=_selector(np.array(r_rows, dtype=int), np.array(r_cols, dtype=int), np.array(r_vals),
                             (len(dirichlet), n)),
        reaction_offset=r_offset,
    )


# ---------------------------------------------------------------------------
# Pressure-only subdomains
# ---------------------------------------------------------------------------

def assemble_point_or_blocking(
    grid: SubdomainGrid,
    params: SubdomainParams,
    classification: str = "point",
    mortar_edges: Optional[np.ndarray] = None,
) -> SubdomainOperator:
    """
    Zero-stiffness operator of a 0D point or a blocking fracture.

    A blocking fracture carries one pressure per cell of the partition in
    ``mortar_edges`` (arc length breakpoints shared by both of its sides);
    without one, its own cells are used.
    """
    if grid.dim == 0:
        kind = MethodKind.POINT
        intervals = np.array([[0.0, 1.0]])
        to_source = sps.identity(1, format="csr")
    elif classification == MethodKind.BLOCKING.value:
        kind = MethodKind.BLOCKING
        edges = grid.node_arc if mortar_edges is None else np.asarray(mortar_edges, dtype=float)
        intervals = np.column_stack([edges[:-1], edges[1:]])
        cells = _source_intervals(grid)
        left = np.maximum(intervals[:, None, 0], cells[None, :, 0])
        right = np.minimum(intervals[:, None, 1], cells[None, :, 1])
        overlap = np.clip(right - left, 0.0, None)
        to_source = sps.csr_matrix(overlap / grid.cell_volumes[None, :])
    else:
        raise ValueError(f"subdomain {grid.id}: classification '{classification}' needs a 0D grid or 'blocking'")

    n = len(intervals)
    return SubdomainOperator(
        subdomain=grid.id,
        kind=kind,
        A=sps.csr_matrix((n, n)),
        load=np.zeros(n),
        source_injection=sps.identity(n, format="csr"),
        neumann_injection=sps.csr_matrix((n, 0)),
        pressure_offset=np.zeros(n),
        trace_offset=np.zeros(0),
        trace_layout={},
        source_intervals=intervals,
        cell_to_source=to_source,
        has_dirichlet=False,
        source_measures=np.diff(intervals, axis=1).ravel(),
    )


ASSEMBLERS = {
    MethodKind.TPFA: assemble_tpfa,
    MethodKind.P1: assemble_p1,
    MethodKind.RT0H: assemble_rt0h,
}


def assemble_operator(
    grid: SubdomainGrid,
    params: SubdomainParams,
    method: MethodKind,
    blocking: bool = False,
    mortar_edges: Optional[np.ndarray] = None,
) -> SubdomainOperator:
    """Pick the assembler for a subdomain from its dimension and class."""
    if grid.dim == 0:
        return assemble_point_or_blocking(grid, params, MethodKind.POINT.value)
    if blocking:
        return assemble_point_or_blocking(grid, params, MethodKind.BLOCKING.value, mortar_edges)
    try:
        method = MethodKind(method)
        return ASSEMBLERS[method](grid, params)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"unknown subdomain method '{method}'") from exc


# ---------------------------------------------------------------------------
# Local solves
# ---------------------------------------------------------------------------

def mean_constraint(op: SubdomainOperator) -> np.ndarray:
    """Vector c with c @ x equal to the integral of the pressure."""
    return op.source_injection @ op.source_measures


def bordered_matrix(op: SubdomainOperator) -> sps.csr_matrix:
    """[[A, c], [c^T, 0]] pinning the integral of the pressure."""
    c = sps.csr_matrix(mean_constraint(op)[:, None])
    return finalize_csr(sps.bmat([[op.A, c], [c.T, None]]))


def local_rhs(op: SubdomainOperator, psi: Optional[np.ndarray] = None,
              theta: Optional[np.ndarray] = None) -> np.ndarray:
    """load - S psi - N theta, with psi per grid cell and theta per trace dof."""
    rhs = np.array(op.load, dtype=float)
    if psi is not None:
        rhs -= op.source_injection @ (op.cell_to_source @ np.asarray(psi, dtype=float))
    if theta is not None:
        rhs -= op.neumann_injection @ np.asarray(theta, dtype=float)
    return rhs


def _data_scale(op: SubdomainOperator, psi, theta) -> float:
    scale = float(np.abs(op.load).sum())
    if psi is not None:
        scale += float(np.abs(psi).sum())
    if theta is not None:
        scale += float(np.abs(theta).sum())
    return max(scale, 1e-300)


def solve_local(op: SubdomainOperator, rhs: np.ndarray, scale: Optional[float] = None) -> np.ndarray:
    """Apply the (mean-pinned where needed) inverse of A to a load vector."""
    tol = get_settings().COMPATIBILITY_TOL
    scale = max(float(np.abs(rhs).sum()), 1e-300) if scale is None else scale
    if op.kind.zero_stiffness:
        imbalance = float(np.abs(rhs).max(initial=0.0))
        if imbalance > tol * scale:
            raise IncompatibleData(f"subdomain {op.subdomain} has no stiffness but nonzero loads", imbalance)
        return np.zeros(op.num_dofs)
    if op.pure_neumann:
        imbalance = float(rhs.sum())
        if abs(imbalance) > tol * scale:
            raise IncompatibleData(
                f"subdomain {op.subdomain} has no Dirichlet boundary and loads sum to {imbalance:.3e}", imbalance
            )
        bordered = bordered_matrix(op)
        return factor_solve(bordered, np.concatenate([rhs, [0.0]]))[:-1]
    return factor_solve(op.A, rhs)


def apply_solution_operator(
    op: SubdomainOperator,
    psi: Optional[np.ndarray] = None,
    theta: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Solve one subdomain for given sinks and boundary fluxes.

    Args:
        op: Subdomain operator
        psi: Integrated sink per grid cell (zero if omitted)
        theta: Integrated outward flux per trace dof (zero if omitted)

    Returns:
        Tuple of (pressure per grid cell, trace values)

    Raises:
        IncompatibleData: pure-Neumann or zero-stiffness data that do not balance
    """
    rhs = local_rhs(op, psi, theta)
    x = solve_local(op, rhs, _data_scale(op, psi, theta))
    return op.cell_pressure(x), op.trace(x)
