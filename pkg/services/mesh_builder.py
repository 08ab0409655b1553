"""
Mixed-dimensional mesh construction.
Generates structured 2D grids with lattice-aligned fractures, splits the grid
along fracture faces into +/- copies, extracts 1D fracture branches and 0D
intersection points, and validates the resulting hierarchy.
"""

import logging
from collections import defaultdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import connected_components

from config import BUILTIN_GEOMETRIES, get_settings
from exceptions import ConfigError, EmptyDomain, NonConformingFracture, TopologyError
from models.grid import (
    BoundaryCondition,
    BoundaryKind,
    FaceKind,
    Finding,
    FractureSegment,
    FractureSpec,
    GridKind,
    InterfaceKey,
    MeshSource,
    MixedDimMesh,
    Rectangle,
    Side,
    SubdomainGrid,
    ValidationReport,
)

logger = logging.getLogger(__name__)

SIDES = ("left", "right", "bottom", "top")


# ---------------------------------------------------------------------------
# Structured generator
# ---------------------------------------------------------------------------

def _lattice_index(value: float, origin: float, step: float, count: int, tol: float) -> Optional[int]:
    position = (value - origin) / step
    index = int(round(position))
    if abs(position - index) > tol * max(1, count) or index < 0 or index > count:
        return None
    return index


def make_structured_source(
    domain: Rectangle,
    resolution: Tuple[int, int],
    grid_kind: GridKind,
    fractures: FractureSpec,
    boundary: Optional[Dict[str, BoundaryCondition]] = None,
    tip_flux: float = 0.0,
) -> MeshSource:
    """Build the unsplit lattice mesh with fracture edges and boundary data."""
    nx, ny = (int(r) for r in resolution)
    if nx <= 0 or ny <= 0:
        raise EmptyDomain(f"resolution {nx}x{ny} has no cells")
    tol = get_settings().LATTICE_TOL
    hx = (domain.xmax - domain.xmin) / nx
    hy = (domain.ymax - domain.ymin) / ny

    xs = np.linspace(domain.xmin, domain.xmax, nx + 1)
    ys = np.linspace(domain.ymin, domain.ymax, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])

    def node(i, j):
        return j * (nx + 1) + i

    ii, jj = np.meshgrid(np.arange(nx), np.arange(ny))
    ii, jj = ii.ravel(), jj.ravel()
    sw, se, ne, nw = node(ii, jj), node(ii + 1, jj), node(ii + 1, jj + 1), node(ii, jj + 1)
    if GridKind(grid_kind) is GridKind.CARTESIAN_QUADS:
        cells = np.column_stack([sw, se, ne, nw])
    else:
        lower = np.column_stack([sw, se, ne])
        upper = np.column_stack([sw, ne, nw])
        cells = np.stack([lower, upper], axis=1).reshape(-1, 3)

    edges: List[Tuple[int, int]] = []
    labels: List[str] = []
    seen = set()
    for number, segment in enumerate(fractures.segments):
        (x0, y0), (x1, y1) = segment.start, segment.end
        i0 = _lattice_index(x0, domain.xmin, hx, nx, tol)
        i1 = _lattice_index(x1, domain.xmin, hx, nx, tol)
        j0 = _lattice_index(y0, domain.ymin, hy, ny, tol)
        j1 = _lattice_index(y1, domain.ymin, hy, ny, tol)
        if None in (i0, i1, j0, j1):
            raise NonConformingFracture(
                f"segment {number} ({segment.label}) has an endpoint off the {nx}x{ny} lattice", number
            )
        if (i0 != i1) == (j0 != j1):
            raise NonConformingFracture(
                f"segment {number} ({segment.label}) is not axis-aligned or has zero length", number
            )
        if i0 == i1:
            if i0 in (0, nx):
                raise NonConformingFracture(f"segment {number} runs along the domain boundary", number)
            lo, hi = sorted((j0, j1))
            pieces = [(node(i0, j), node(i0, j + 1)) for j in range(lo, hi)]
        else:
            if j0 in (0, ny):
                raise NonConformingFracture(f"segment {number} runs along the domain boundary", number)
            lo, hi = sorted((i0, i1))
            pieces = [(node(i, j0), node(i + 1, j0)) for i in range(lo, hi)]
        for a, b in pieces:
            key = (min(a, b), max(a, b))
            if key in seen:
                raise NonConformingFracture(f"segment {number} overlaps another fracture segment", number)
            seen.add(key)
            edges.append((a, b))
            labels.append(segment.label)

    conditions = {side: BoundaryCondition() for side in SIDES}
    conditions.update(boundary or {})
    bc: Dict[Tuple[int, int], BoundaryCondition] = {}
    for i in range(nx):
        bc[(node(i, 0), node(i + 1, 0))] = conditions["bottom"]
        bc[(node(i, ny), node(i + 1, ny))] = conditions["top"]
    for j in range(ny):
        bc[(node(0, j), node(0, j + 1))] = conditions["left"]
        bc[(node(nx, j), node(nx, j + 1))] = conditions["right"]

    return MeshSource(
        nodes=nodes,
        cells=np.asarray(cells, dtype=int),
        fracture_edges=np.asarray(edges, dtype=int).reshape(-1, 2),
        fracture_labels=tuple(labels),
        boundary=bc,
        tip_flux=float(tip_flux),
        domain=domain,
    )


def build_structured_mesh(
    domain: Rectangle,
    resolution: Tuple[int, int],
    grid_kind: GridKind,
    fractures: FractureSpec,
    boundary: Optional[Dict[str, BoundaryCondition]] = None,
    tip_flux: float = 0.0,
) -> MixedDimMesh:
    """
    Generate a lattice mesh and split it along the fracture segments.

    Args:
        domain: Axis-aligned rectangle
        resolution: Number of cells (nx, ny)
        grid_kind: Quads, or triangles split along the SW-NE diagonal
        fractures: Axis-aligned segments with endpoints on lattice lines
        boundary: Condition per side name; unspecified sides are no-flow
        tip_flux: Integrated flux imposed at immersed fracture tips

    Returns:
        The validated-by-construction MixedDimMesh
    """
    source = make_structured_source(domain, resolution, grid_kind, fractures, boundary, tip_flux)
    return split_mesh(source)


def builtin_fractures(name: str) -> Tuple[FractureSpec, Dict[str, BoundaryCondition], Dict[str, Tuple[float, float]]]:
    """Fracture spec, side conditions and per-label (kappa_perp, kappa_par) of a built-in geometry."""
    if name not in BUILTIN_GEOMETRIES:
        raise ConfigError(f"unknown builtin geometry '{name}' (choose from {sorted(BUILTIN_GEOMETRIES)})")
    table, sides = BUILTIN_GEOMETRIES[name]
    segments = [
        FractureSegment(start=start, end=end, label=label)
        for label, (pieces, _, _) in table.items()
        for start, end in pieces
    ]
    boundary = {
        side: BoundaryCondition(kind=BoundaryKind(kind), value=value, slope=slope)
        for side, (kind, value, slope) in sides.items()
    }
    kappas = {label: (perp, par) for label, (_, perp, par) in table.items()}
    return FractureSpec(segments=segments), boundary, kappas


def build_builtin_geometry(
    name: str,
    resolution: int,
    grid_kind: GridKind = GridKind.CARTESIAN_QUADS,
    boundary: Optional[Dict[str, BoundaryCondition]] = None,
    tip_flux: float = 0.0,
) -> MixedDimMesh:
    """Mesh one of the built-in unit-square geometries at resolution x resolution."""
    fractures, default_boundary, _ = builtin_fractures(name)
    sides = dict(default_boundary)
    sides.update(boundary or {})
    return build_structured_mesh(Rectangle(), (resolution, resolution), grid_kind, fractures, sides, tip_flux)


# ---------------------------------------------------------------------------
# Splitting pipeline
# ---------------------------------------------------------------------------

def _components(n: int, pairs: np.ndarray) -> np.ndarray:
    """Connected component label per vertex, labels ordered by smallest member."""
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    graph = sps.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, raw = connected_components(graph, directed=False)
    first = {}
    for vertex, label in enumerate(raw):
        first.setdefault(label, len(first))
    return np.array([first[label] for label in raw], dtype=int)


def _signed_area(points: np.ndarray) -> Tuple[float, np.ndarray]:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    area = 0.5 * cross.sum()
    if abs(area) < 1e-300:
        return area, points.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * area)
    cy = ((y + yn) * cross).sum() / (6.0 * area)
    return area, np.array([cx, cy])


def _point_bc(node: int, boundary_edges: Dict[int, List[Tuple[int, int]]], source: MeshSource, point: np.ndarray):
    """Condition seen by a fracture end lying on the exterior boundary."""
    values = []
    for key in boundary_edges.get(node, []):
        condition = source.boundary.get(key, source.default_boundary)
        if condition.kind is BoundaryKind.DIRICHLET:
            values.append(float(condition.evaluate(point)[0]))
    if values:
        return FaceKind.DIRICHLET, float(np.mean(values))
    return FaceKind.NEUMANN, 0.0


def split_mesh(source: MeshSource) -> MixedDimMesh:
    """
    Split a tagged 2D mesh into the mixed-dimensional hierarchy.

    Args:
        source: Unsplit mesh with fracture face tags and exterior conditions

    Returns:
        MixedDimMesh with ids ordered 2D, then 1D, then 0D
    """
    nodes = np.asarray(source.nodes, dtype=float)
    cells = np.asarray(source.cells, dtype=int)
    n_cells, k = cells.shape
    if n_cells == 0:
        raise EmptyDomain("mesh has no cells")

    # Unique edges of the unsplit mesh.
    local = np.stack([cells, np.roll(cells, -1, axis=1)], axis=2).reshape(-1, 2)
    keys = np.sort(local, axis=1)
    unique_edges, edge_of = np.unique(keys, axis=0, return_inverse=True)
    edge_of = edge_of.reshape(n_cells, k)
    n_edges = len(unique_edges)
    counts = np.bincount(edge_of.ravel(), minlength=n_edges)
    if np.any(counts > 2):
        raise TopologyError("an edge is shared by more than two cells")
    edge_cells = -np.ones((n_edges, 2), dtype=int)
    order = np.argsort(edge_of.ravel(), kind="stable")
    owner = np.repeat(np.arange(n_cells), k)[order]
    sorted_edges = edge_of.ravel()[order]
    starts = np.searchsorted(sorted_edges, np.arange(n_edges))
    edge_cells[:, 0] = owner[starts]
    second = counts == 2
    edge_cells[second, 1] = owner[starts[second] + 1]
    edge_index = {(int(a), int(b)): e for e, (a, b) in enumerate(unique_edges)}

    boundary_edges: Dict[int, List[Tuple[int, int]]] = defaultdict(list)
    for e in np.flatnonzero(counts == 1):
        a, b = (int(v) for v in unique_edges[e])
        boundary_edges[a].append((a, b))
        boundary_edges[b].append((a, b))

    # Fracture edges.
    is_frac = np.zeros(n_edges, dtype=bool)
    frac_label: Dict[int, str] = {}
    for (a, b), label in zip(np.asarray(source.fracture_edges, dtype=int).reshape(-1, 2), source.fracture_labels):
        key = (int(min(a, b)), int(max(a, b)))
        if key not in edge_index:
            raise TopologyError(f"fracture face {key} is not an edge of the mesh")
        e = edge_index[key]
        if counts[e] != 2:
            raise TopologyError(f"fracture face {key} lies on the domain boundary")
        if is_frac[e]:
            raise TopologyError(f"fracture face {key} is tagged twice")
        is_frac[e] = True
        frac_label[e] = label

    # Fracture graph and chains.
    incident: Dict[int, List[int]] = defaultdict(list)
    for e in np.flatnonzero(is_frac):
        a, b = unique_edges[e]
        incident[int(a)].append(int(e))
        incident[int(b)].append(int(e))
    degree = {v: len(es) for v, es in incident.items()}
    stops = sorted(v for v, d in degree.items() if d != 2)
    junctions = sorted(v for v, d in degree.items() if d >= 3)

    chains: List[Tuple[List[int], List[int]]] = []
    visited = set()
    for start in stops:
        for first_edge in sorted(incident[start]):
            if first_edge in visited:
                continue
            chain_nodes, chain_edges = [start], []
            current, edge = start, first_edge
            while True:
                visited.add(edge)
                chain_edges.append(edge)
                a, b = (int(v) for v in unique_edges[edge])
                nxt = b if a == current else a
                chain_nodes.append(nxt)
                if degree[nxt] != 2:
                    break
                edge = next(e for e in incident[nxt] if e != edge)
                if edge in visited:
                    break
                current = nxt
            chains.append((chain_nodes, chain_edges))
    if len(visited) != int(is_frac.sum()):
        raise TopologyError("closed fracture loop without an intersection")

    edge_chain = {}
    for c, (_, chain_edges) in enumerate(chains):
        for position, e in enumerate(chain_edges):
            edge_chain[e] = (c, position)

    # Node splitting by fans of cells around each fracture node.
    node_cells: Dict[int, List[int]] = defaultdict(list)
    for c in range(n_cells):
        for v in cells[c]:
            if int(v) in incident:
                node_cells[int(v)].append(c)
    node_edges: Dict[int, List[int]] = defaultdict(list)
    for e, (a, b) in enumerate(unique_edges):
        if int(a) in incident:
            node_edges[int(a)].append(e)
        if int(b) in incident:
            node_edges[int(b)].append(e)

    split_cells = cells.copy()
    coords = [nodes]
    original_node = list(range(len(nodes)))
    n_total = len(nodes)
    for v in sorted(incident):
        around = sorted(set(node_cells[v]))
        position = {c: i for i, c in enumerate(around)}
        links = [
            (position[edge_cells[e, 0]], position[edge_cells[e, 1]])
            for e in node_edges[v]
            if counts[e] == 2 and not is_frac[e]
        ]
        fan = _components(len(around), np.array(links, dtype=int))
        for group in range(1, fan.max() + 1):
            copy = n_total
            n_total += 1
            coords.append(nodes[v][None, :])
            original_node.append(v)
            for i in np.flatnonzero(fan == group):
                row = split_cells[around[i]]
                row[row == v] = copy
    all_nodes = np.vstack(coords)
    original_node = np.array(original_node, dtype=int)

    # Matrix components.
    inner = np.flatnonzero((counts == 2) & ~is_frac)
    component = _components(n_cells, edge_cells[inner])
    n_matrix = int(component.max()) + 1
    n_chains = len(chains)
    chain_id = {c: n_matrix + c for c in range(n_chains)}
    point_id = {v: n_matrix + n_chains + q for q, v in enumerate(junctions)}

    pairings: Dict[Tuple[int, int, int], np.ndarray] = {}
    grids: List[SubdomainGrid] = []
    for sub in range(n_matrix):
        grid, sub_pairs = _matrix_grid(
            sub, np.flatnonzero(component == sub), split_cells, all_nodes, original_node,
            edge_of, is_frac, edge_chain, chains, chain_id, unique_edges, source,
        )
        grids.append(grid)
        for key, faces in sub_pairs.items():
            pairings[key] = faces

    for c, (chain_nodes, chain_edges) in enumerate(chains):
        grids.append(_fracture_grid(
            chain_id[c], chain_nodes, chain_edges, nodes, frac_label, point_id, boundary_edges, source
        ))
        n_chain_cells = len(chain_edges)
        if chain_nodes[0] in point_id:
            pairings[(point_id[chain_nodes[0]], chain_id[c], int(Side.PLUS))] = np.array([0])
        if chain_nodes[-1] in point_id:
            pairings[(point_id[chain_nodes[-1]], chain_id[c], int(Side.MINUS))] = np.array([n_chain_cells])

    for v in junctions:
        grids.append(_point_grid(point_id[v], nodes[v]))

    # Each fracture side must be covered by a single matrix component.
    for c, (_, chain_edges) in enumerate(chains):
        for side in (Side.PLUS, Side.MINUS):
            owners = [key for key in pairings if key[0] == chain_id[c] and key[2] == int(side)]
            if len(owners) != 1 or np.any(pairings[owners[0]] < 0):
                raise TopologyError(f"side {side.symbol} of fracture branch {chain_id[c]} is not covered by one matrix component")

    face_pairings = {
        InterfaceKey(lower, higher, Side(side)): faces for (lower, higher, side), faces in pairings.items()
    }
    up: Dict[int, set] = defaultdict(set)
    down: Dict[int, set] = defaultdict(set)
    for key in face_pairings:
        up[key.lower].add(key.higher)
        down[key.higher].add(key.lower)
    mesh = MixedDimMesh(
        subdomains=tuple(grids),
        up_neighbors={g.id: tuple(sorted(up[g.id])) for g in grids},
        down_neighbors={g.id: tuple(sorted(down[g.id])) for g in grids},
        face_pairings=face_pairings,
        source=source,
    )
    logger.info("split mesh into %d/%d/%d subdomains (2D/1D/0D)", *mesh.counts_by_dim())
    return mesh


def _matrix_grid(sub, members, split_cells, all_nodes, original_node, edge_of, is_frac,
                 edge_chain, chains, chain_id, unique_edges, source):
    """Build one 2D subdomain grid from its cells of the split mesh."""
    sub_cells = split_cells[members]
    n_cells, k = sub_cells.shape
    used, local_cells = np.unique(sub_cells, return_inverse=True)
    local_cells = local_cells.reshape(n_cells, k)
    sub_nodes = all_nodes[used]

    # Duplicated fracture faces never merge: their key carries the owning cell.
    edges = edge_of[members]
    n_edges_total = len(is_frac)
    face_key = np.where(
        is_frac[edges],
        n_edges_total + np.arange(n_cells)[:, None] * k + np.arange(k)[None, :],
        edges,
    )
    _, face_of = np.unique(face_key.ravel(), return_inverse=True)
    face_of = face_of.reshape(n_cells, k)
    n_faces = int(face_of.max()) + 1

    face_cells = -np.ones((n_faces, 2), dtype=int)
    face_nodes = np.zeros((n_faces, 2), dtype=int)
    face_edge = np.zeros(n_faces, dtype=int)
    for c in range(n_cells):
        for m in range(k):
            f = face_of[c, m]
            if face_cells[f, 0] < 0:
                face_cells[f, 0] = c
                face_nodes[f] = (local_cells[c, m], local_cells[c, (m + 1) % k])
                face_edge[f] = edges[c, m]
            else:
                face_cells[f, 1] = c
    cell_face_signs = np.where(face_cells[face_of, 0] == np.arange(n_cells)[:, None], 1, -1)

    volumes = np.zeros(n_cells)
    centers = np.zeros((n_cells, 2))
    for c in range(n_cells):
        volumes[c], centers[c] = _signed_area(sub_nodes[local_cells[c]])
    a, b = sub_nodes[face_nodes[:, 0]], sub_nodes[face_nodes[:, 1]]
    tangent = b - a
    areas = np.linalg.norm(tangent, axis=1)
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / np.where(areas > 0, areas, 1.0)[:, None]
    face_centers = 0.5 * (a + b)

    kind = np.full(n_faces, int(FaceKind.INTERIOR), dtype=int)
    lower = -np.ones(n_faces, dtype=int)
    side = np.zeros(n_faces, dtype=int)
    value = np.zeros(n_faces)
    node_values: Dict[int, List[float]] = defaultdict(list)
    pairs: Dict[Tuple[int, int, int], np.ndarray] = {}
    for f in np.flatnonzero(face_cells[:, 1] < 0):
        e = int(face_edge[f])
        if is_frac[e]:
            c, position = edge_chain[e]
            chain_nodes = chains[c][0]
            start = all_nodes[chain_nodes[position]]
            direction = all_nodes[chain_nodes[position + 1]] - start
            offset = centers[face_cells[f, 0]] - start
            s = Side.PLUS if direction[0] * offset[1] - direction[1] * offset[0] > 0 else Side.MINUS
            kind[f], lower[f], side[f] = FaceKind.INTERFACE, chain_id[c], int(s)
            key = (chain_id[c], sub, int(s))
            if key not in pairs:
                pairs[key] = -np.ones(len(chains[c][1]), dtype=int)
            pairs[key][position] = f
            continue
        n0, n1 = (int(v) for v in unique_edges[e])
        condition = source.boundary.get((n0, n1), source.default_boundary)
        datum = float(condition.evaluate(face_centers[f])[0])
        if condition.kind is BoundaryKind.DIRICHLET:
            kind[f], value[f] = FaceKind.DIRICHLET, datum
            for local_node in face_nodes[f]:
                node_values[int(local_node)].append(float(condition.evaluate(sub_nodes[local_node])[0]))
        else:
            kind[f], value[f] = FaceKind.NEUMANN, datum * areas[f]
    node_dirichlet = np.full(len(sub_nodes), np.nan)
    for local_node, values in node_values.items():
        node_dirichlet[local_node] = np.mean(values)

    grid = SubdomainGrid(
        id=sub,
        dim=2,
        nodes=sub_nodes,
        cells=local_cells,
        face_nodes=face_nodes,
        face_cells=face_cells,
        face_areas=areas,
        face_centers=face_centers,
        face_normals=normals,
        cell_volumes=volumes,
        cell_centers=centers,
        cell_faces=face_of,
        cell_face_signs=cell_face_signs,
        face_kind=kind,
        face_lower=lower,
        face_side=side,
        face_bc_value=value,
        node_dirichlet=node_dirichlet,
    )
    return grid, pairs


def _fracture_grid(index, chain_nodes, chain_edges, nodes, frac_label, point_id, boundary_edges, source):
    """Build the 1D grid of one fracture branch (a polyline in traversal order)."""
    points = nodes[chain_nodes]
    n_cells = len(chain_edges)
    n_faces = n_cells + 1
    cells = np.column_stack([np.arange(n_cells), np.arange(1, n_faces)])
    tangent = points[1:] - points[:-1]
    lengths = np.linalg.norm(tangent, axis=1)
    unit = tangent / lengths[:, None]

    face_cells = -np.ones((n_faces, 2), dtype=int)
    face_cells[0, 0] = 0
    face_cells[1:, 0] = np.arange(n_cells)
    face_cells[1:-1, 1] = np.arange(1, n_cells)
    normals = np.vstack([-unit[:1], unit])
    signs = np.ones((n_cells, 2), dtype=int)
    signs[1:, 0] = -1

    kind = np.full(n_faces, int(FaceKind.INTERIOR), dtype=int)
    lower = -np.ones(n_faces, dtype=int)
    side = np.zeros(n_faces, dtype=int)
    value = np.zeros(n_faces)
    node_dirichlet = np.full(n_faces, np.nan)
    for face, v, s in ((0, chain_nodes[0], Side.PLUS), (n_faces - 1, chain_nodes[-1], Side.MINUS)):
        if v in point_id:
            kind[face], lower[face], side[face] = FaceKind.INTERFACE, point_id[v], int(s)
        elif v in boundary_edges:
            kind[face], value[face] = _point_bc(v, boundary_edges, source, nodes[v])
            if kind[face] == FaceKind.DIRICHLET:
                node_dirichlet[face] = value[face]
        else:
            kind[face], value[face] = FaceKind.NEUMANN, source.tip_flux

    labels = tuple(frac_label[e] for e in chain_edges)
    if len(set(labels)) > 1:
        logger.warning("fracture branch %d merges labels %s; using '%s' for its interfaces",
                       index, sorted(set(labels)), labels[0])
    return SubdomainGrid(
        id=index,
        dim=1,
        nodes=points,
        cells=cells,
        face_nodes=np.arange(n_faces)[:, None],
        face_cells=face_cells,
        face_areas=np.ones(n_faces),
        face_centers=points.copy(),
        face_normals=normals,
        cell_volumes=lengths,
        cell_centers=0.5 * (points[1:] + points[:-1]),
        cell_faces=cells.copy(),
        cell_face_signs=signs,
        face_kind=kind,
        face_lower=lower,
        face_side=side,
        face_bc_value=value,
        node_dirichlet=node_dirichlet,
        node_arc=np.concatenate([[0.0], np.cumsum(lengths)]),
        cell_labels=labels,
        label=labels[0],
    )


def _point_grid(index: int, point: np.ndarray) -> SubdomainGrid:
    empty_int = np.zeros((0, 2), dtype=int)
    return SubdomainGrid(
        id=index,
        dim=0,
        nodes=np.asarray(point, dtype=float).reshape(1, 2),
        cells=np.zeros((1, 1), dtype=int),
        face_nodes=np.zeros((0, 1), dtype=int),
        face_cells=empty_int,
        face_areas=np.zeros(0),
        face_centers=np.zeros((0, 2)),
        face_normals=np.zeros((0, 2)),
        cell_volumes=np.ones(1),
        cell_centers=np.asarray(point, dtype=float).reshape(1, 2),
        cell_faces=np.zeros((1, 0), dtype=int),
        cell_face_signs=np.zeros((1, 0), dtype=int),
        face_kind=np.zeros(0, dtype=int),
        face_lower=np.zeros(0, dtype=int),
        face_side=np.zeros(0, dtype=int),
        face_bc_value=np.zeros(0),
        node_dirichlet=np.full(1, np.nan),
    )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_mesh(mesh: MixedDimMesh, domain_area: Optional[float] = None) -> ValidationReport:
    """
    Check every grid and hierarchy invariant.

    Args:
        mesh: Mesh to inspect
        domain_area: Expected total 2D volume; taken from the mesh source if omitted

    Returns:
        ValidationReport listing each violation (empty when valid)
    """
    findings: List[Finding] = []
    ids = {g.id for g in mesh.subdomains}

    for grid in mesh.subdomains:
        for c in np.flatnonzero(grid.cell_volumes <= 0):
            findings.append(Finding(kind="NegativeVolume", subdomain=grid.id, item=int(c),
                                    message=f"cell {c} has volume {grid.cell_volumes[c]:.3e}"))
        if grid.dim == 0:
            if grid.num_cells != 1 or grid.num_faces != 0 or grid.cell_volumes[0] != 1.0:
                findings.append(Finding(kind="PointGrid", subdomain=grid.id,
                                        message="0D grid must have one unit cell and no faces"))
            if len(mesh.up_neighbors.get(grid.id, ())) == 0 or len(
                [k for k in mesh.face_pairings if k.lower == grid.id]
            ) < 3:
                findings.append(Finding(kind="IsolatedIntersection", subdomain=grid.id,
                                        message="intersection with fewer than three branch ends"))
            continue
        for f in np.flatnonzero(grid.face_areas <= 0):
            findings.append(Finding(kind="ZeroFaceArea", subdomain=grid.id, item=int(f)))
        norms = np.linalg.norm(grid.face_normals, axis=1)
        for f in np.flatnonzero(np.abs(norms - 1.0) >= 1e-12):
            findings.append(Finding(kind="NonUnitNormal", subdomain=grid.id, item=int(f)))
        for f in np.flatnonzero(grid.face_kind == FaceKind.INTERFACE):
            lower = int(grid.face_lower[f])
            if lower not in ids or lower not in mesh.down_neighbors.get(grid.id, ()):
                findings.append(Finding(kind="DanglingInterface", subdomain=grid.id, item=int(f),
                                        message=f"interface face references subdomain {lower}"))
        if grid.dim == 1:
            length = float(np.sum(np.linalg.norm(np.diff(grid.nodes, axis=0), axis=1)))
            if abs(length - grid.measure) > 1e-12 * max(1.0, length):
                findings.append(Finding(kind="VolumeMismatch", subdomain=grid.id,
                                        message="cell lengths do not sum to the branch length"))

    for i, highers in mesh.up_neighbors.items():
        for j in highers:
            if mesh.subdomain(j).dim != mesh.subdomain(i).dim + 1:
                findings.append(Finding(kind="DimensionMismatch", subdomain=i, item=j))
            if i not in mesh.down_neighbors.get(j, ()):
                findings.append(Finding(kind="InconsistentNeighbors", subdomain=i, item=j))
    for j, lowers in mesh.down_neighbors.items():
        for i in lowers:
            if j not in mesh.up_neighbors.get(i, ()):
                findings.append(Finding(kind="InconsistentNeighbors", subdomain=j, item=i))

    for grid in mesh.grids_of_dim(1):
        for side in (Side.PLUS, Side.MINUS):
            keys = [k for k in mesh.face_pairings if k.lower == grid.id and k.side == side]
            covered = np.zeros(grid.num_cells, dtype=int)
            for key in keys:
                faces = mesh.face_pairings[key]
                covered += faces >= 0
                higher = mesh.subdomain(key.higher)
                ok = faces >= 0
                if np.any(np.abs(higher.face_areas[faces[ok]] - grid.cell_volumes[ok]) > 1e-9):
                    findings.append(Finding(kind="UncoveredFractureCell", subdomain=grid.id,
                                            message=f"side {side.symbol} face lengths differ from cell lengths"))
            for c in np.flatnonzero(covered != 1):
                findings.append(Finding(kind="UncoveredFractureCell", subdomain=grid.id, item=int(c),
                                        message=f"side {side.symbol} covered {covered[c]} times"))

    total = float(sum(g.cell_volumes.sum() for g in mesh.grids_of_dim(2)))
    if domain_area is None and mesh.source is not None:
        if mesh.source.domain is not None:
            domain_area = mesh.source.domain.area
    if domain_area is not None and abs(total - domain_area) > 1e-12 * max(1.0, domain_area):
        findings.append(Finding(kind="VolumeMismatch", message=f"2D volume {total} differs from {domain_area}"))

    # Subdomains with a Dirichlet boundary plus their descendants must reach everything.
    if mesh.subdomains:
        n = len(mesh.subdomains)
        pairs = np.array([(k.lower, k.higher) for k in mesh.face_pairings], dtype=int).reshape(-1, 2)
        labels = _components(n, pairs)
        anchored = {labels[g.id] for g in mesh.subdomains if g.has_dirichlet}
        for grid in mesh.subdomains:
            if labels[grid.id] not in anchored:
                findings.append(Finding(kind="NoDirichletAnchor", subdomain=grid.id,
                                        message="not connected to any subdomain with a Dirichlet boundary"))

    return ValidationReport(findings=findings, total_volume=total)
