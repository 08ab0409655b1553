#!/usr/bin/env python3
"""
Tests for the subdomain discretizations and local solves.
"""

import numpy as np
import pytest

from exceptions import ConfigError, IncompatibleData, NonSimplicialGrid
from models.grid import BoundaryCondition, BoundaryKind, FaceKind, FractureSpec, GridKind, Rectangle
from models.operators import MethodKind, SubdomainParams
from services.discretization import (
    apply_solution_operator,
    assemble_operator,
    assemble_p1,
    assemble_point_or_blocking,
    assemble_rt0h,
    assemble_tpfa,
    face_transmissibilities,
    local_rhs,
    p1_local_stiffness,
    solve_local,
)
from services.mesh_builder import build_builtin_geometry, build_structured_mesh
from services.postprocess import cell_mass_balance, dirichlet_fluxes

LINEAR_SIDES = {
    "left": BoundaryCondition(kind=BoundaryKind.DIRICHLET, value=0.0),
    "right": BoundaryCondition(kind=BoundaryKind.DIRICHLET, value=0.0, slope=(1.0, 0.0)),
}


def unit_params(grid, kappa: float = 1.0) -> SubdomainParams:
    return SubdomainParams(kappa=np.full(grid.num_cells, kappa), source=np.zeros(grid.num_cells))


def linear_square(grid_kind: GridKind, resolution: int = 4):
    """Unfractured unit square with exact pressure p = x."""
    mesh = build_structured_mesh(Rectangle(), (resolution, resolution), grid_kind, FractureSpec(), LINEAR_SIDES)
    return mesh.subdomain(0)


def test_tpfa_two_cells():
    mesh = build_structured_mesh(Rectangle(xmax=2.0), (2, 1), GridKind.CARTESIAN_QUADS, FractureSpec())
    op = assemble_tpfa(mesh.subdomain(0), unit_params(mesh.subdomain(0)))
    assert np.allclose(op.A.toarray(), [[1.0, -1.0], [-1.0, 1.0]])
    assert op.pure_neumann


def test_fracture_transmissibilities():
    mesh = build_builtin_geometry("column", 2)
    fracture = mesh.grids_of_dim(1)[0]
    trans = face_transmissibilities(fracture, unit_params(fracture))
    assert np.sort(trans).tolist() == pytest.approx([2.0, 4.0, 4.0])


def test_p1_local_stiffness_right_triangle():
    points = np.array([[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]])
    local = p1_local_stiffness(points, np.ones(1))
    expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]]
    assert np.allclose(local[0], expected)


def test_p1_local_stiffness_segment():
    points = np.array([[[0.0, 0.0], [0.0, 2.0]]])
    assert np.allclose(p1_local_stiffness(points, np.array([3.0]))[0], [[1.5, -1.5], [-1.5, 1.5]])


@pytest.mark.parametrize("method,grid_kind", [
    (MethodKind.TPFA, GridKind.CARTESIAN_QUADS),
    (MethodKind.P1, GridKind.STRUCTURED_TRIANGLES),
    (MethodKind.RT0H, GridKind.STRUCTURED_TRIANGLES),
])
def test_linear_pressure_is_exact(method, grid_kind):
    grid = linear_square(grid_kind)
    op = assemble_operator(grid, unit_params(grid), method)
    pressure, _ = apply_solution_operator(op)
    assert np.allclose(pressure, grid.cell_centers[:, 0], atol=1e-12)


@pytest.mark.parametrize("method,grid_kind", [
    (MethodKind.TPFA, GridKind.CARTESIAN_QUADS),
    (MethodKind.RT0H, GridKind.STRUCTURED_TRIANGLES),
])
def test_conservative_boundary_fluxes(method, grid_kind):
    grid = linear_square(grid_kind)
    op = assemble_operator(grid, unit_params(grid), method)
    x = solve_local(op, local_rhs(op))
    flux = dirichlet_fluxes(op, x, np.zeros(grid.num_cells), np.zeros(op.num_traces))
    left = grid.face_centers[grid.faces_of_kind(FaceKind.DIRICHLET), 0] < 0.5
    # Flow runs from x = 1 towards x = 0.
    assert flux[left].sum() == pytest.approx(1.0)
    assert flux[~left].sum() == pytest.approx(-1.0)
    assert np.allclose(cell_mass_balance(op, x, np.zeros(grid.num_cells)), 0.0, atol=1e-12)


def test_p1_is_not_locally_conservative():
    grid = linear_square(GridKind.STRUCTURED_TRIANGLES)
    op = assemble_p1(grid, unit_params(grid))
    x = solve_local(op, local_rhs(op))
    assert cell_mass_balance(op, x, np.zeros(grid.num_cells)) is None


@pytest.mark.parametrize("assembler", [assemble_tpfa, assemble_p1, assemble_rt0h])
def test_pure_neumann_rows_sum_to_zero(assembler):
    mesh = build_structured_mesh(Rectangle(), (3, 3), GridKind.STRUCTURED_TRIANGLES, FractureSpec())
    grid = mesh.subdomain(0)
    op = assembler(grid, unit_params(grid))
    assert op.pure_neumann
    assert np.allclose(op.A @ np.ones(op.num_dofs), 0.0, atol=1e-12)


def test_pure_neumann_solve_is_mean_free():
    mesh = build_structured_mesh(Rectangle(xmax=2.0), (2, 1), GridKind.CARTESIAN_QUADS, FractureSpec())
    op = assemble_tpfa(mesh.subdomain(0), unit_params(mesh.subdomain(0)))
    pressure, _ = apply_solution_operator(op, psi=np.array([1.0, -1.0]))
    assert np.allclose(pressure, [-0.5, 0.5])


def test_incompatible_pure_neumann_data():
    mesh = build_structured_mesh(Rectangle(xmax=2.0), (2, 1), GridKind.CARTESIAN_QUADS, FractureSpec())
    op = assemble_tpfa(mesh.subdomain(0), unit_params(mesh.subdomain(0)))
    with pytest.raises(IncompatibleData) as excinfo:
        apply_solution_operator(op, psi=np.array([1.0, 0.0]))
    assert excinfo.value.imbalance == pytest.approx(-1.0)


def test_element_methods_need_simplices():
    mesh = build_structured_mesh(Rectangle(), (2, 2), GridKind.CARTESIAN_QUADS, FractureSpec())
    grid = mesh.subdomain(0)
    for assembler in (assemble_p1, assemble_rt0h):
        with pytest.raises(NonSimplicialGrid):
            assembler(grid, unit_params(grid))


def test_unknown_method():
    grid = linear_square(GridKind.CARTESIAN_QUADS)
    with pytest.raises(ConfigError):
        assemble_operator(grid, unit_params(grid), "mfd")


@pytest.mark.parametrize("method,grid_kind", [
    (MethodKind.TPFA, GridKind.CARTESIAN_QUADS),
    (MethodKind.P1, GridKind.STRUCTURED_TRIANGLES),
    (MethodKind.RT0H, GridKind.STRUCTURED_TRIANGLES),
])
def test_solution_operator_is_self_adjoint(method, grid_kind):
    mesh = build_builtin_geometry("column", 4, grid_kind)
    rng = np.random.default_rng(1)
    for grid in mesh.grids_of_dim(2):
        op = assemble_operator(grid, unit_params(grid), method)
        assert abs(op.A - op.A.T).max() < 1e-12
        p0, t0 = apply_solution_operator(op)
        a, b = rng.standard_normal((2, op.num_traces))
        _, ta = apply_solution_operator(op, theta=a)
        _, tb = apply_solution_operator(op, theta=b)
        assert (ta - t0) @ b == pytest.approx((tb - t0) @ a, rel=1e-10, abs=1e-12)
        phi, chi = rng.standard_normal((2, grid.num_cells))
        pa, _ = apply_solution_operator(op, psi=phi)
        pb, _ = apply_solution_operator(op, psi=chi)
        assert (pa - p0) @ chi == pytest.approx((pb - p0) @ phi, rel=1e-10, abs=1e-12)


def test_tpfa_face_unknowns_only_on_interfaces():
    mesh = build_builtin_geometry("column", 8)
    left = mesh.subdomain(0)
    fracture = mesh.grids_of_dim(1)[0]
    op = assemble_tpfa(left, unit_params(left))
    assert op.num_dofs == left.num_cells + 8
    assert len(op.traces_of(fracture.id, 1)) == 8
    assert op.traces_of(fracture.id, -1) == []


def test_blocking_operator_uses_mortar_partition():
    mesh = build_builtin_geometry("column", 8)
    fracture = mesh.grids_of_dim(1)[0]
    edges = np.linspace(0.0, 1.0, 5)
    op = assemble_point_or_blocking(fracture, unit_params(fracture), "blocking", edges)
    assert op.kind is MethodKind.BLOCKING
    assert op.num_dofs == 4
    assert np.allclose(op.source_measures, 0.25)
    assert np.allclose(np.asarray(op.cell_to_source.sum(axis=0)).ravel(), 1.0)


def test_point_operator_rejects_unbalanced_sink():
    mesh = build_builtin_geometry("benchmark2d", 8)
    point = mesh.grids_of_dim(0)[0]
    op = assemble_operator(point, unit_params(point), MethodKind.TPFA)
    assert op.kind is MethodKind.POINT
    with pytest.raises(IncompatibleData):
        apply_solution_operator(op, psi=np.array([1.0]))
