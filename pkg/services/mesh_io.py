"""
Plain-text mesh files.

Format (``#`` starts a comment, blank lines ignored)::

    NODES
    <index> <x> <y>
    CELLS
    <index> <node> <node> <node> [<node>]
    FRACTURE_FACES
    <node> <node> <branch-id>
    BOUNDARY
    <node> <node> dirichlet|neumann <value>

Boundary edges without an entry are no-flow. Neumann values are flux
densities (per unit length).
"""

import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from exceptions import ParseError
from models.grid import BoundaryCondition, BoundaryKind, MeshSource, MixedDimMesh, Rectangle
from services.mesh_builder import split_mesh

logger = logging.getLogger(__name__)

SECTIONS = ("NODES", "CELLS", "FRACTURE_FACES", "BOUNDARY")


def parse_mesh_text(text: str, path: str = None, tip_flux: float = 0.0) -> MeshSource:
    """Parse mesh file contents into an unsplit MeshSource."""
    section = None
    node_rows: List[Tuple[int, float, float, int]] = []
    cell_rows: List[Tuple[int, List[int], int]] = []
    fracture_rows: List[Tuple[int, int, str, int]] = []
    boundary_rows: List[Tuple[int, int, BoundaryCondition, int]] = []

    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0].upper() in SECTIONS and len(tokens) == 1:
            section = tokens[0].upper()
            continue
        if section is None:
            raise ParseError(f"data before any section header: '{line}'", number, path)
        try:
            if section == "NODES":
                if len(tokens) != 3:
                    raise ParseError("node line needs: index x y", number, path)
                node_rows.append((int(tokens[0]), float(tokens[1]), float(tokens[2]), number))
            elif section == "CELLS":
                if len(tokens) not in (4, 5):
                    raise ParseError("cell line needs an index and 3 or 4 nodes", number, path)
                cell_rows.append((int(tokens[0]), [int(t) for t in tokens[1:]], number))
            elif section == "FRACTURE_FACES":
                if len(tokens) != 3:
                    raise ParseError("fracture face line needs: node node branch-id", number, path)
                fracture_rows.append((int(tokens[0]), int(tokens[1]), tokens[2], number))
            else:
                if len(tokens) != 4:
                    raise ParseError("boundary line needs: node node kind value", number, path)
                kind = tokens[2].lower()
                if kind not in ("dirichlet", "neumann"):
                    raise ParseError(f"unknown boundary kind '{tokens[2]}'", number, path)
                condition = BoundaryCondition(kind=BoundaryKind(kind), value=float(tokens[3]))
                boundary_rows.append((int(tokens[0]), int(tokens[1]), condition, number))
        except ValueError as exc:
            raise ParseError(f"bad number in '{line}' ({exc})", number, path) from exc

    if not node_rows:
        raise ParseError("missing NODES section", None, path)
    if not cell_rows:
        raise ParseError("missing CELLS section", None, path)

    position: Dict[int, int] = {}
    for index, _, _, number in node_rows:
        if index in position:
            raise ParseError(f"duplicate node index {index}", number, path)
        position[index] = len(position)
    nodes = np.array([(x, y) for _, x, y, _ in node_rows])

    def lookup(index: int, number: int) -> int:
        if index not in position:
            raise ParseError(f"reference to missing node {index}", number, path)
        return position[index]

    sizes = {len(nodes_of) for _, nodes_of, _ in cell_rows}
    if len(sizes) != 1:
        raise ParseError("mixed cell shapes are not supported", cell_rows[0][2], path)
    seen_cells = set()
    cells = []
    for index, nodes_of, number in cell_rows:
        if index in seen_cells:
            raise ParseError(f"duplicate cell index {index}", number, path)
        seen_cells.add(index)
        cells.append([lookup(n, number) for n in nodes_of])

    fracture_edges = [(lookup(a, number), lookup(b, number)) for a, b, _, number in fracture_rows]
    labels = tuple(label for _, _, label, _ in fracture_rows)
    boundary = {}
    for a, b, condition, number in boundary_rows:
        i, j = lookup(a, number), lookup(b, number)
        boundary[(min(i, j), max(i, j))] = condition

    lo, hi = nodes.min(axis=0), nodes.max(axis=0)
    return MeshSource(
        nodes=nodes,
        cells=np.asarray(cells, dtype=int),
        fracture_edges=np.asarray(fracture_edges, dtype=int).reshape(-1, 2),
        fracture_labels=labels,
        boundary=boundary,
        tip_flux=tip_flux,
        domain=Rectangle(xmin=lo[0], xmax=hi[0], ymin=lo[1], ymax=hi[1]),
    )


def read_mesh_file(path: Union[str, Path], tip_flux: float = 0.0) -> MixedDimMesh:
    """
    Read a mesh file and run the splitting pipeline on it.

    Args:
        path: Mesh file in the NODES/CELLS/FRACTURE_FACES/BOUNDARY format
        tip_flux: Integrated flux imposed at immersed fracture tips

    Returns:
        MixedDimMesh
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read mesh file ({exc})", None, str(path)) from exc
    source = parse_mesh_text(text, str(path), tip_flux)
    logger.info("read %s: %d nodes, %d cells, %d fracture faces",
                path, len(source.nodes), len(source.cells), len(source.fracture_edges))
    return split_mesh(source)


def write_mesh_file(source: MeshSource, path: Union[str, Path]) -> Path:
    """Write an unsplit mesh; affine boundary data is sampled at edge midpoints."""
    path = Path(path)
    lines = ["NODES"]
    lines += [f"{i} {float(x)!r} {float(y)!r}" for i, (x, y) in enumerate(source.nodes)]
    lines.append("CELLS")
    lines += [f"{i} " + " ".join(str(int(n)) for n in cell) for i, cell in enumerate(source.cells)]
    lines.append("FRACTURE_FACES")
    lines += [f"{int(a)} {int(b)} {label}" for (a, b), label in zip(source.fracture_edges, source.fracture_labels)]
    lines.append("BOUNDARY")
    for (a, b), condition in sorted(source.boundary.items()):
        midpoint = 0.5 * (source.nodes[a] + source.nodes[b])
        value = float(condition.evaluate(midpoint)[0])
        lines.append(f"{a} {b} {condition.kind.value} {value!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
