"""
Legacy ASCII VTK output through meshio: one file per subdomain plus an index.
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Union

import meshio
import numpy as np

from models.grid import MixedDimMesh, SubdomainGrid
from models.mortar import MortarInterface
from models.system import Solution

logger = logging.getLogger(__name__)

CELL_TYPES = {(0, 1): "vertex", (1, 2): "line", (2, 3): "triangle", (2, 4): "quad"}


def _points3(points: np.ndarray) -> np.ndarray:
    return np.column_stack([points, np.zeros(len(points))])


def _cell_mortar_flux(grid: SubdomainGrid, mortar: MortarInterface, flux: np.ndarray) -> np.ndarray:
    """Average of a mortar flux over each cell of its lower grid."""
    if grid.dim == 0:
        return np.asarray(flux, dtype=float)
    lo, hi = grid.node_arc[:-1], grid.node_arc[1:]
    left = np.maximum(mortar.edges[:-1, None], lo[None, :])
    right = np.minimum(mortar.edges[1:, None], hi[None, :])
    overlap = np.clip(right - left, 0.0, None)
    return (overlap.T @ flux) / grid.cell_volumes


def subdomain_mesh(grid: SubdomainGrid, solution: Solution, mortars: Sequence[MortarInterface]) -> meshio.Mesh:
    """meshio.Mesh of one subdomain with pressure and incoming mortar fluxes as cell data."""
    cell_type = CELL_TYPES[(grid.dim, grid.cells.shape[1])]
    cell_data: Dict[str, List[np.ndarray]] = {
        "pressure": [np.asarray(solution.pressures[grid.id], dtype=float)],
        "subdomain": [np.full(grid.num_cells, grid.id, dtype=float)],
    }
    for m in mortars:
        if m.lower != grid.id:
            continue
        name = f"mortar_flux_{m.higher}_{'plus' if int(m.side) > 0 else 'minus'}"
        cell_data[name] = [_cell_mortar_flux(grid, m, solution.fluxes[m.id])]
    return meshio.Mesh(_points3(grid.nodes), [(cell_type, grid.cells)], cell_data=cell_data)


def write_vtk(
    mesh: MixedDimMesh,
    solution: Solution,
    mortars: Sequence[MortarInterface],
    directory: Union[str, Path],
) -> List[Path]:
    """
    Write ``fields_<id>.vtk`` for every subdomain and ``fields_index.txt``.

    Args:
        mesh: Mixed-dimensional mesh
        solution: Solved fields
        mortars: Mortar grids (listed in the index with their geometry)
        directory: Output directory, created if needed

    Returns:
        Paths of all written files, index last
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for grid in mesh.subdomains:
        path = directory / f"fields_{grid.id}.vtk"
        meshio.write(str(path), subdomain_mesh(grid, solution, mortars), file_format="vtk", binary=False)
        written.append(path)

    lines = ["# subdomain dim file"]
    lines += [f"subdomain {g.id} {g.dim} fields_{g.id}.vtk" for g in mesh.subdomains]
    lines.append("# mortar id lower higher side cells measure start end integrated_flux")
    for m in mortars:
        lower = mesh.subdomain(m.lower)
        start, end = (lower.nodes[0], lower.nodes[-1]) if lower.dim == 1 else (lower.nodes[0], lower.nodes[0])
        total = float(solution.fluxes[m.id] @ m.measures)
        lines.append(
            f"mortar {m.id} {m.lower} {m.higher} {m.side.symbol} {m.num_cells} {m.measure:.12g} "
            f"{start[0]:.12g},{start[1]:.12g} {end[0]:.12g},{end[1]:.12g} {total:.12g}"
        )
    index = directory / "fields_index.txt"
    index.write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(index)
    logger.info("wrote %d VTK files to %s", len(written) - 1, directory)
    return written
