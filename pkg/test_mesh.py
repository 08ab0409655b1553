#!/usr/bin/env python3
"""
Tests for mesh construction, the text mesh format and mesh validation.
"""

import numpy as np
import pytest

from exceptions import EmptyDomain, NonConformingFracture, ParseError
from models.grid import FaceKind, FractureSegment, FractureSpec, GridKind, Rectangle, Side
from services.mesh_builder import build_builtin_geometry, build_structured_mesh, split_mesh, validate_mesh
from services.mesh_io import parse_mesh_text, read_mesh_file, write_mesh_file

SPLIT_SQUARE = """\
NODES
0 0.0 0.0
1 0.5 0.0
2 1.0 0.0
3 0.0 0.5
4 0.5 0.5
5 1.0 0.5
6 0.0 1.0
7 0.5 1.0
8 1.0 1.0
CELLS
0 0 1 4 3
1 1 2 5 4
2 3 4 7 6
3 4 5 8 7
FRACTURE_FACES
{fractures}
BOUNDARY
0 3 dirichlet 1
3 6 dirichlet 1
2 5 dirichlet 0
5 8 dirichlet 0
"""


def vertical_cut():
    return FractureSpec(segments=[FractureSegment(start=(0.5, 0.0), end=(0.5, 1.0), label="cut")])


def split_square_text(fractures: str = "1 4 cut\n4 7 cut") -> str:
    return SPLIT_SQUARE.format(fractures=fractures)


def test_split_square_counts():
    mesh = build_structured_mesh(Rectangle(), (2, 2), GridKind.CARTESIAN_QUADS, vertical_cut())
    assert mesh.counts_by_dim() == (2, 1, 0)
    assert [g.num_cells for g in mesh.grids_of_dim(2)] == [2, 2]
    assert mesh.grids_of_dim(1)[0].num_cells == 2
    assert validate_mesh(mesh).is_valid


def test_fracture_sides_face_their_matrix_halves():
    mesh = build_structured_mesh(Rectangle(), (4, 4), GridKind.CARTESIAN_QUADS, vertical_cut())
    fracture = mesh.grids_of_dim(1)[0]
    for key, faces in mesh.face_pairings.items():
        higher = mesh.subdomain(key.higher)
        x = higher.face_centers[faces, 0]
        assert np.allclose(x, 0.5)
        centers = higher.cell_centers[higher.face_cells[faces, 0], 0]
        # The branch runs upward, so + is the left side.
        assert np.all(centers < 0.5) if key.side == Side.PLUS else np.all(centers > 0.5)
    assert fracture.measure == pytest.approx(1.0)


def test_unfractured_mesh():
    mesh = build_builtin_geometry("unfractured", 4)
    assert mesh.counts_by_dim() == (1, 0, 0)
    assert mesh.up_neighbors[0] == () and mesh.down_neighbors[0] == ()
    report = validate_mesh(mesh)
    assert report.is_valid
    assert report.total_volume == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("grid_kind", [GridKind.CARTESIAN_QUADS, GridKind.STRUCTURED_TRIANGLES])
def test_benchmark_counts(grid_kind):
    mesh = build_builtin_geometry("benchmark2d", 8, grid_kind)
    assert mesh.counts_by_dim() == (2, 7, 1)
    point = mesh.grids_of_dim(0)[0]
    assert point.num_cells == 1 and point.num_faces == 0
    assert np.allclose(point.nodes[0], (0.5, 0.75))
    assert len(mesh.up_neighbors[point.id]) == 4
    assert validate_mesh(mesh).is_valid


def test_splitting_preserves_volume_and_pairs_faces():
    mesh = build_builtin_geometry("benchmark2d", 16, GridKind.STRUCTURED_TRIANGLES)
    total = sum(g.cell_volumes.sum() for g in mesh.grids_of_dim(2))
    assert total == pytest.approx(1.0, abs=1e-12)
    fracture_cells = sum(g.num_cells for g in mesh.grids_of_dim(1))
    paired = sum(len(faces) for key, faces in mesh.face_pairings.items() if mesh.subdomain(key.lower).dim == 1)
    assert paired == 2 * fracture_cells


def test_bent_fracture_is_one_branch():
    mesh = build_builtin_geometry("column", 8)
    assert mesh.counts_by_dim() == (2, 1, 0)
    conductive = build_builtin_geometry("stability2d", 8)
    labels = [g.label for g in conductive.grids_of_dim(1)]
    assert labels.count("conductive_l") == 1


def test_off_lattice_segment():
    fractures = FractureSpec(segments=[FractureSegment(start=(0.3, 0.0), end=(0.3, 1.0))])
    with pytest.raises(NonConformingFracture) as excinfo:
        build_structured_mesh(Rectangle(), (8, 8), GridKind.CARTESIAN_QUADS, fractures)
    assert excinfo.value.segment == 0


def test_diagonal_segment():
    fractures = FractureSpec(segments=[FractureSegment(start=(0.25, 0.25), end=(0.75, 0.75))])
    with pytest.raises(NonConformingFracture):
        build_structured_mesh(Rectangle(), (8, 8), GridKind.CARTESIAN_QUADS, fractures)


def test_empty_domain():
    with pytest.raises(EmptyDomain):
        build_structured_mesh(Rectangle(), (0, 4), GridKind.CARTESIAN_QUADS, FractureSpec())


def test_read_split_square_matches_generated(tmp_path):
    path = tmp_path / "split.mesh"
    path.write_text(split_square_text())
    read = read_mesh_file(path)
    generated = build_structured_mesh(Rectangle(), (2, 2), GridKind.CARTESIAN_QUADS, vertical_cut())
    assert read.counts_by_dim() == generated.counts_by_dim()
    for a, b in zip(read.subdomains, generated.subdomains):
        assert np.allclose(np.sort(a.cell_volumes), np.sort(b.cell_volumes))
    assert validate_mesh(read).is_valid


def test_mesh_file_round_trip(tmp_path):
    source = parse_mesh_text(split_square_text())
    path = write_mesh_file(source, tmp_path / "copy.mesh")
    again = read_mesh_file(path)
    original = split_mesh(source)
    assert again.counts_by_dim() == original.counts_by_dim()
    left = again.subdomain(0)
    assert np.allclose(left.face_bc_value[left.faces_of_kind(FaceKind.DIRICHLET)], 1.0)


def test_immersed_tip_is_no_flow(tmp_path):
    path = tmp_path / "tip.mesh"
    path.write_text(split_square_text("1 4 cut"))
    mesh = read_mesh_file(path)
    assert mesh.counts_by_dim() == (1, 1, 0)
    fracture = mesh.grids_of_dim(1)[0]
    assert fracture.face_kind[-1] == FaceKind.NEUMANN
    assert fracture.face_bc_value[-1] == 0.0
    assert not fracture.has_dirichlet


def test_tip_flux_override(tmp_path):
    path = tmp_path / "tip.mesh"
    path.write_text(split_square_text("1 4 cut"))
    fracture = read_mesh_file(path, tip_flux=0.5).grids_of_dim(1)[0]
    assert fracture.face_bc_value[-1] == 0.5
    assert fracture.face_bc_value[0] == 0.0


def test_missing_node_reports_line():
    text = split_square_text().replace("3 4 5 8 7", "3 4 5 8 9")
    with pytest.raises(ParseError) as excinfo:
        parse_mesh_text(text, "bad.mesh")
    assert excinfo.value.line == text.splitlines().index("3 4 5 8 9") + 1
    assert "bad.mesh" in str(excinfo.value)


def test_unknown_boundary_kind():
    text = split_square_text().replace("0 3 dirichlet 1", "0 3 robin 1")
    with pytest.raises(ParseError):
        parse_mesh_text(text)


def test_negative_volume_is_reported():
    text = split_square_text().replace("0 0 1 4 3", "0 0 3 4 1")
    mesh = split_mesh(parse_mesh_text(text))
    assert "NegativeVolume" in validate_mesh(mesh).kinds()
