"""
Post-processing: mass balance and boundary flux diagnostics, and mortar flux
errors between solutions computed on different grids.
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from exceptions import InterfaceMismatch
from models.grid import FaceKind, MixedDimMesh, SubdomainGrid
from models.mortar import MortarInterface, ProjectionPair
from models.operators import SubdomainOperator
from models.system import ProblemParams, Solution

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Flux diagnostics
# ---------------------------------------------------------------------------

def source_totals(
    mortars: Sequence[MortarInterface],
    projections: Sequence[ProjectionPair],
    operators: Mapping[int, SubdomainOperator],
    params: ProblemParams,
    solution: Solution,
) -> Dict[int, np.ndarray]:
    """Total sink on each source basis: prescribed sinks minus mortar inflow."""
    by_id = {p.interface: p for p in projections}
    totals = {i: op.cell_to_source @ params[i].source for i, op in operators.items()}
    for m in mortars:
        totals[m.lower] = totals[m.lower] - by_id[m.id].B_lower.T @ solution.fluxes[m.id]
    return totals


def trace_fluxes(
    mortars: Sequence[MortarInterface],
    projections: Sequence[ProjectionPair],
    operators: Mapping[int, SubdomainOperator],
    solution: Solution,
) -> Dict[int, np.ndarray]:
    """Integrated outward flux on every trace dof, scattered from the mortars."""
    by_id = {p.interface: p for p in projections}
    theta = {i: np.zeros(op.num_traces) for i, op in operators.items()}
    for m in mortars:
        pair = by_id[m.id]
        np.add.at(theta[m.higher], pair.trace_dofs, pair.B.T @ solution.fluxes[m.id])
    return theta


def recover_fluxes(op: SubdomainOperator, x: np.ndarray) -> Optional[np.ndarray]:
    """Summed outward flux of every cell (conservative methods only)."""
    if op.cell_outflow is None:
        return None
    return op.cell_outflow @ x + op.cell_outflow_offset


def cell_mass_balance(op: SubdomainOperator, x: np.ndarray, sinks: np.ndarray) -> Optional[np.ndarray]:
    """
    Outflow plus sink per cell, zero for a conservative solution.

    Pressure-only subdomains have no outflow, so their residual is the sink
    itself. Returns None for P1, which is not locally conservative.
    """
    if op.kind.zero_stiffness:
        return np.asarray(sinks, dtype=float)
    outflow = recover_fluxes(op, x)
    if outflow is None:
        return None
    return outflow + sinks


def dirichlet_fluxes(op: SubdomainOperator, x: np.ndarray, sinks: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Outward flux through each Dirichlet face (TPFA, RT0H) or node (P1)."""
    if op.reaction_x is None:
        return np.zeros(0)
    flux = op.reaction_x @ x + op.reaction_offset
    if op.reaction_source is not None:
        flux = flux + op.reaction_source @ sinks
    if op.reaction_trace is not None:
        flux = flux + op.reaction_trace @ theta
    return flux


def compute_diagnostics(
    mesh: MixedDimMesh,
    mortars: Sequence[MortarInterface],
    projections: Sequence[ProjectionPair],
    operators: Mapping[int, SubdomainOperator],
    params: ProblemParams,
    solution: Solution,
) -> Dict[str, float]:
    """
    Conservation and interface-law diagnostics of a solved problem.

    Keys: max_cell_imbalance (over conservative and pressure-only
    subdomains), boundary_inflow / boundary_outflow (Dirichlet and exterior
    Neumann), global_imbalance (outflow minus inflow plus all sinks),
    interface_law_residual (max over mortar cells), flux_scale.
    """
    sinks = source_totals(mortars, projections, operators, params, solution)
    theta = trace_fluxes(mortars, projections, operators, solution)

    imbalance = 0.0
    outflow = inflow = 0.0
    for grid in mesh.subdomains:
        op = operators[grid.id]
        x = solution.states[grid.id]
        balance = cell_mass_balance(op, x, sinks[grid.id])
        if balance is not None and balance.size:
            imbalance = max(imbalance, float(np.abs(balance).max()))
        boundary = np.concatenate([
            dirichlet_fluxes(op, x, sinks[grid.id], theta[grid.id]),
            _neumann_fluxes(grid) if not op.kind.zero_stiffness else np.zeros(0),
        ])
        outflow += float(boundary[boundary > 0].sum())
        inflow -= float(boundary[boundary < 0].sum())

    prescribed = sum(float(params[i].source.sum()) for i in operators)
    flux_scale = max(inflow, outflow, sum(float(np.abs(params[i].source).sum()) for i in operators), 1e-300)

    law = 0.0
    decoupled = {p.interface for p in projections if p.decoupled}
    for m in mortars:
        if m.id in decoupled:
            continue
        kappa = params.kappa_perp[m.key]
        residual = solution.lower_pressures[m.id] - solution.traces[m.id] + solution.fluxes[m.id] / kappa
        if residual.size:
            law = max(law, float(np.abs(residual).max()))

    diagnostics = {
        "max_cell_imbalance": imbalance,
        "boundary_inflow": inflow,
        "boundary_outflow": outflow,
        "global_imbalance": abs(outflow - inflow + prescribed),
        "interface_law_residual": law,
        "flux_scale": flux_scale,
    }
    logger.debug("diagnostics: %s", diagnostics)
    return diagnostics


def _neumann_fluxes(grid: SubdomainGrid) -> np.ndarray:
    return grid.face_bc_value[grid.faces_of_kind(FaceKind.NEUMANN)]


# ---------------------------------------------------------------------------
# Mortar errors
# ---------------------------------------------------------------------------

def p0_l2_difference(edges_a: np.ndarray, values_a: np.ndarray, edges_b: np.ndarray, values_b: np.ndarray) -> float:
    """L2 norm of the difference of two P0 fields on the common refinement of their partitions."""
    edges_a, edges_b = np.asarray(edges_a, dtype=float), np.asarray(edges_b, dtype=float)
    if abs(edges_a[-1] - edges_b[-1]) > 1e-9 * max(abs(edges_a[-1]), 1.0) or abs(edges_a[0] - edges_b[0]) > 1e-9:
        raise InterfaceMismatch("P0 fields cover different intervals")
    breaks = np.union1d(edges_a, edges_b)
    lengths = np.diff(breaks)
    keep = lengths > 1e-14 * max(breaks[-1] - breaks[0], 1e-300)
    mid = 0.5 * (breaks[:-1] + breaks[1:])[keep]
    a = np.asarray(values_a)[np.clip(np.searchsorted(edges_a, mid) - 1, 0, len(values_a) - 1)]
    b = np.asarray(values_b)[np.clip(np.searchsorted(edges_b, mid) - 1, 0, len(values_b) - 1)]
    return float(np.sqrt(np.sum(lengths[keep] * (a - b) ** 2)))


def _rounded(point, digits: int = 8) -> Tuple[float, float]:
    return tuple(float(round(v, digits)) + 0.0 for v in point)


def _subdomain_signature(grid: SubdomainGrid) -> Tuple:
    if grid.dim == 0:
        return (0, _rounded(grid.nodes[0]))
    if grid.dim == 1:
        return (1,) + tuple(sorted([_rounded(grid.nodes[0]), _rounded(grid.nodes[-1])]))
    centroid = (grid.cell_volumes[:, None] * grid.cell_centers).sum(axis=0) / grid.measure
    return (2, _rounded(centroid, 6), round(grid.measure, 8))


def interface_signatures(mesh: MixedDimMesh, mortars: Sequence[MortarInterface]) -> Dict[Tuple, Tuple[int, bool]]:
    """
    Resolution-independent key of every mortar.

    Returns a map signature -> (mortar id, reversed) where reversed tells
    that the lower branch runs against its canonical (sorted endpoint)
    direction; sides are flipped accordingly.
    """
    signatures: Dict[Tuple, Tuple[int, bool]] = {}
    for m in mortars:
        lower = mesh.subdomain(m.lower)
        reversed_ = lower.dim == 1 and _rounded(lower.nodes[0]) > _rounded(lower.nodes[-1])
        side = -int(m.side) if reversed_ else int(m.side)
        if lower.dim == 0:
            # A point sees each branch end once; the branch identifies the interface.
            side = 0
        key = (_subdomain_signature(lower), _subdomain_signature(mesh.subdomain(m.higher)), side)
        signatures[key] = (m.id, reversed_)
    return signatures


def _oriented(mortar: MortarInterface, values: np.ndarray, reversed_: bool):
    if not reversed_:
        return mortar.edges, values
    return mortar.edges[-1] - mortar.edges[::-1], values[::-1]


def mortar_l2_error(
    solution: Solution,
    mesh: MixedDimMesh,
    mortars: Sequence[MortarInterface],
    reference: Solution,
    reference_mesh: MixedDimMesh,
    reference_mortars: Sequence[MortarInterface],
) -> Dict[int, float]:
    """
    L2 error of the mortar fluxes against a reference solution, per interface dimension.

    Interfaces are matched geometrically, so the two solutions may live on
    different grids and mortar partitions.

    Returns:
        {1: error over 1D interfaces, 0: error over point interfaces}

    Raises:
        InterfaceMismatch: the two interface sets differ
    """
    ours = interface_signatures(mesh, mortars)
    theirs = interface_signatures(reference_mesh, reference_mortars)
    if set(ours) != set(theirs):
        missing = len(set(ours) ^ set(theirs))
        raise InterfaceMismatch(f"{missing} interfaces are not present in both solutions")

    by_id = {m.id: m for m in mortars}
    ref_by_id = {m.id: m for m in reference_mortars}
    squares = {0: 0.0, 1: 0.0}
    for key, (mid, rev) in ours.items():
        rid, ref_rev = theirs[key]
        m, r = by_id[mid], ref_by_id[rid]
        edges_a, values_a = _oriented(m, solution.fluxes[mid], rev)
        edges_b, values_b = _oriented(r, reference.fluxes[rid], ref_rev)
        squares[m.dim] += p0_l2_difference(edges_a, values_a, edges_b, values_b) ** 2
    return {dim: float(np.sqrt(total)) for dim, total in squares.items()}


def convergence_rates(errors: Sequence[float]) -> List[Optional[float]]:
    """log2(e_k / e_{k+1}) for consecutive halvings; None where undefined."""
    rates: List[Optional[float]] = [None]
    for coarse, fine in zip(errors[:-1], errors[1:]):
        rates.append(float(np.log2(coarse / fine)) if coarse > 0 and fine > 0 else None)
    return rates
