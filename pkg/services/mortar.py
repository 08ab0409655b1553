"""
Mortar grids, projections, the discrete divergence and the normal mass matrix.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Mapping, Sequence

import numpy as np
import scipy.sparse as sps

from config import get_settings
from exceptions import DegenerateKappaPerp, GeometryMismatch, MissingOperator
from models.grid import InterfaceKey, MixedDimMesh, SubdomainGrid
from models.mortar import DivergenceOperator, MortarInterface, ProjectionPair
from models.operators import MethodKind, SubdomainOperator, TraceKind

logger = logging.getLogger(__name__)


def mortar_cell_count(ratio: float, lower_cells: int) -> int:
    """max(1, round-half-up(ratio * n))."""
    return max(1, int(np.floor(ratio * lower_cells + 0.5)))


def _points_at(grid: SubdomainGrid, arc: np.ndarray) -> np.ndarray:
    """Coordinates of arc-length positions along a 1D grid."""
    x = np.interp(arc, grid.node_arc, grid.nodes[:, 0])
    y = np.interp(arc, grid.node_arc, grid.nodes[:, 1])
    return np.column_stack([x, y])


def build_mortar_grids(mesh: MixedDimMesh, coarsening_ratio: float = None) -> List[MortarInterface]:
    """
    Build one equal-length P0 mortar grid per interface.

    Args:
        mesh: Mixed-dimensional mesh
        coarsening_ratio: Mortar cells per lower-dimensional cell (default from settings)

    Returns:
        Mortar interfaces, numbered in mesh.interfaces order
    """
    ratio = get_settings().DEFAULT_MORTAR_RATIO if coarsening_ratio is None else float(coarsening_ratio)
    if not ratio > 0:
        raise ValueError(f"mortar ratio must be positive, got {ratio}")
    if ratio > 1:
        logger.warning("mortar ratio %.3g > 1: mortar grids are finer than the fracture grids; "
                       "stability degrades for large normal permeability", ratio)

    mortars = []
    for number, key in enumerate(mesh.interfaces):
        lower = mesh.subdomain(key.lower)
        if lower.dim == 0:
            edges = np.array([0.0, 1.0])
            centers = lower.cell_centers.copy()
        else:
            n = mortar_cell_count(ratio, lower.num_cells)
            edges = np.linspace(0.0, lower.node_arc[-1], n + 1)
            centers = _points_at(lower, 0.5 * (edges[:-1] + edges[1:]))
        mortars.append(MortarInterface(
            id=number,
            lower=key.lower,
            higher=key.higher,
            side=key.side,
            dim=lower.dim,
            edges=edges,
            measures=np.diff(edges),
            centers=centers,
        ))
    logger.debug("built %d mortar grids with %d cells", len(mortars), sum(m.num_cells for m in mortars))
    return mortars


def _overlap(edges: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Overlap intervals of mortar cells (rows) with supports [lo, hi] (columns)."""
    left = np.maximum(edges[:-1, None], lo[None, :])
    right = np.minimum(edges[1:, None], hi[None, :])
    return left, right, np.clip(right - left, 0.0, None)


def _face_intervals(mesh: MixedDimMesh, key: InterfaceKey, faces: Sequence[int]):
    """Arc-length interval and oriented node pair of each higher face on an interface."""
    lower = mesh.subdomain(key.lower)
    higher = mesh.subdomain(key.higher)
    pairing = mesh.face_pairings[key]
    cell_of = {int(f): c for c, f in enumerate(pairing)}
    starts, ends, first, second = [], [], [], []
    for f in faces:
        c = cell_of[int(f)]
        s0, s1 = lower.node_arc[c], lower.node_arc[c + 1]
        a, b = higher.face_nodes[f]
        if np.linalg.norm(higher.nodes[a] - lower.nodes[c]) <= np.linalg.norm(higher.nodes[b] - lower.nodes[c]):
            first.append(a)
            second.append(b)
        else:
            first.append(b)
            second.append(a)
        starts.append(s0)
        ends.append(s1)
    return np.array(starts), np.array(ends), np.array(first), np.array(second)


def _trace_overlap(mesh: MixedDimMesh, mortar: MortarInterface, operator: SubdomainOperator) -> sps.csr_matrix:
    basis = operator.traces_of(mortar.lower, int(mortar.side))
    if not basis:
        raise GeometryMismatch(f"subdomain {mortar.higher} exposes no trace on interface {mortar.id}", mortar.id)
    n_local = len(basis)
    if mortar.dim == 0:
        return sps.csr_matrix(np.ones((1, 1)))

    key = mortar.key
    if basis[0].kind is TraceKind.FACE:
        faces = [b.faces[0] for b in basis]
        lo, hi, _, _ = _face_intervals(mesh, key, faces)
        _, _, overlap = _overlap(mortar.edges, lo, hi)
        return sps.csr_matrix(overlap)

    # Hats: integrate both linear pieces of every interface face exactly.
    node_dof = {b.node: j for j, b in enumerate(basis)}
    faces = sorted({f for b in basis for f in b.faces})
    lo, hi, first, second = _face_intervals(mesh, key, faces)
    left, right, overlap = _overlap(mortar.edges, lo, hi)
    width = (hi - lo)[None, :]
    inside = overlap > 0
    # phi_first = (hi - s) / width, phi_second = (s - lo) / width
    int_first = np.where(inside, ((hi[None, :] - left) ** 2 - (hi[None, :] - right) ** 2) / (2 * width), 0.0)
    int_second = np.where(inside, ((right - lo[None, :]) ** 2 - (left - lo[None, :]) ** 2) / (2 * width), 0.0)
    B = np.zeros((mortar.num_cells, n_local))
    for j in range(len(faces)):
        B[:, node_dof[int(first[j])]] += int_first[:, j]
        B[:, node_dof[int(second[j])]] += int_second[:, j]
    return sps.csr_matrix(B)


def _source_overlap(mesh: MixedDimMesh, mortar: MortarInterface, operator: SubdomainOperator) -> sps.csr_matrix:
    if mortar.dim == 0:
        return sps.csr_matrix(np.ones((1, 1)))
    intervals = operator.source_intervals
    _, _, overlap = _overlap(mortar.edges, intervals[:, 0], intervals[:, 1])
    return sps.csr_matrix(overlap)


def _check_rows(matrix: sps.csr_matrix, mortar: MortarInterface, what: str) -> None:
    totals = np.asarray(matrix.sum(axis=1)).ravel()
    error = np.abs(totals - mortar.measures)
    if np.any(error > get_settings().GEOMETRY_TOL):
        raise GeometryMismatch(
            f"{what} overlap on interface {mortar.id} differs from the mortar measure by {error.max():.3e}",
            mortar.id,
        )


def assemble_projections(
    mesh: MixedDimMesh,
    mortars: Sequence[MortarInterface],
    operators: Mapping[int, SubdomainOperator],
) -> List[ProjectionPair]:
    """
    Assemble the exact overlap matrices between mortar cells and subdomain bases.

    Args:
        mesh: Mixed-dimensional mesh
        mortars: Mortar grids from build_mortar_grids
        operators: Subdomain operators providing trace layouts and source intervals

    Returns:
        One ProjectionPair per mortar, in mortar order
    """
    def build(mortar: MortarInterface) -> ProjectionPair:
        for subdomain in (mortar.lower, mortar.higher):
            if subdomain not in operators:
                raise MissingOperator(subdomain)
        higher = operators[mortar.higher]
        B_lower = _source_overlap(mesh, mortar, operators[mortar.lower])
        if higher.kind is MethodKind.BLOCKING:
            # No tangential flow reaches the intersection through a blocking branch.
            _check_rows(B_lower, mortar, "source")
            return ProjectionPair(interface=mortar.id, B=sps.csr_matrix((mortar.num_cells, 0)), B_lower=B_lower,
                                  trace_dofs=np.zeros(0, dtype=int), mass=mortar.measures.copy(), decoupled=True)
        B = _trace_overlap(mesh, mortar, higher)
        _check_rows(B, mortar, "trace")
        _check_rows(B_lower, mortar, "source")
        dofs = np.array([b.dof for b in higher.traces_of(mortar.lower, int(mortar.side))], dtype=int)
        return ProjectionPair(interface=mortar.id, B=B, B_lower=B_lower, trace_dofs=dofs, mass=mortar.measures.copy())

    workers = max(1, min(get_settings().MDFC_THREADS, len(mortars)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(build, mortars))


def assemble_divergence(mesh: MixedDimMesh, mortars: Sequence[MortarInterface]) -> DivergenceOperator:
    """Stack -I (sink rows) and +I (Neumann rows) blocks for every interface."""
    sizes = np.array([m.num_cells for m in mortars], dtype=int)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n = int(offsets[-1])
    rows, cols, vals = [], [], []
    sink_rows: Dict[int, np.ndarray] = {}
    neumann_rows: Dict[int, np.ndarray] = {}
    for m in mortars:
        dofs = np.arange(offsets[m.id], offsets[m.id + 1])
        sink = 2 * offsets[m.id] + np.arange(m.num_cells)
        neumann = sink + m.num_cells
        sink_rows[m.id] = sink
        neumann_rows[m.id] = neumann
        rows += [sink, neumann]
        cols += [dofs, dofs]
        vals += [-np.ones(m.num_cells), np.ones(m.num_cells)]
    if n:
        D = sps.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n, n))
    else:
        D = sps.csr_matrix((0, 0))
    return DivergenceOperator(
        D=D,
        mortar_offsets=offsets,
        sink_rows=sink_rows,
        neumann_rows=neumann_rows,
        lower_of={m.id: m.lower for m in mortars},
        higher_of={m.id: m.higher for m in mortars},
        measures=np.concatenate([m.measures for m in mortars]) if mortars else np.zeros(0),
    )


def assemble_perp_mass(mortars: Sequence[MortarInterface], kappa_perp: Mapping[int, float]) -> sps.dia_matrix:
    """
    Diagonal matrix of measure / kappa_perp over all mortar cells.

    Args:
        mortars: Mortar grids
        kappa_perp: Normal permeability per mortar id

    Returns:
        Sparse diagonal matrix
    """
    bad = [m.id for m in mortars if not kappa_perp[m.id] > 0]
    if bad:
        raise DegenerateKappaPerp(f"normal permeability must be positive on interfaces {bad}", bad)
    if not mortars:
        return sps.diags(np.zeros(0))
    diagonal = np.concatenate([m.measures / kappa_perp[m.id] for m in mortars])
    return sps.diags(diagonal)
