#!/usr/bin/env python3
"""
Tests for mortar flux errors, convergence rates and VTK output.
"""

import numpy as np
import pytest

from exceptions import InterfaceMismatch
from mdfc_pipeline import MDFCPipeline
from models.case import CaseConfig
from services.postprocess import convergence_rates, interface_signatures, mortar_l2_error, p0_l2_difference
from services.vtk_writer import write_vtk


def solved(tmp_path, geometry: str, resolution: int, ratio: float = 1.0):
    pipeline = MDFCPipeline(
        CaseConfig(name=geometry, geometry=geometry, method="tpfa", resolution=resolution, mortar_ratio=ratio),
        output_dir=tmp_path,
    )
    problem = pipeline.build_problem(pipeline.build_mesh())
    return problem, pipeline.solve(problem)


def test_identical_fields():
    edges = np.linspace(0.0, 1.0, 5)
    values = np.array([1.0, 2.0, 3.0, 4.0])
    assert p0_l2_difference(edges, values, edges, values) == 0.0


def test_constant_difference():
    assert p0_l2_difference([0.0, 1.0], [2.5], [0.0, 0.5, 1.0], [0.0, 0.0]) == pytest.approx(2.5)


def test_common_refinement():
    error = p0_l2_difference([0.0, 0.5, 1.0], [1.0, 0.0], [0.0, 1.0], [0.5])
    assert error == pytest.approx(0.5)


def test_different_intervals():
    with pytest.raises(InterfaceMismatch):
        p0_l2_difference([0.0, 1.0], [1.0], [0.0, 2.0], [1.0])


def test_convergence_rates():
    assert convergence_rates([1.0, 0.5, 0.25]) == [None, pytest.approx(1.0), pytest.approx(1.0)]
    assert convergence_rates([0.4, 0.1]) == [None, pytest.approx(2.0)]
    assert convergence_rates([1.0, 0.0]) == [None, None]


def test_signatures_do_not_depend_on_resolution(tmp_path):
    coarse, _ = solved(tmp_path, "benchmark2d", 8)
    fine, _ = solved(tmp_path, "benchmark2d", 16)
    assert set(interface_signatures(coarse.mesh, coarse.mortars)) == set(interface_signatures(fine.mesh, fine.mortars))


def test_column_error_vanishes_across_grids(tmp_path):
    coarse, coarse_solution = solved(tmp_path, "column", 8, 0.75)
    fine, fine_solution = solved(tmp_path, "column", 16, 1.0)
    errors = mortar_l2_error(coarse_solution, coarse.mesh, coarse.mortars,
                             fine_solution, fine.mesh, fine.mortars)
    assert errors[1] < 1e-10
    assert errors[0] == 0.0


def test_error_against_itself(tmp_path):
    problem, solution = solved(tmp_path, "benchmark2d", 8)
    errors = mortar_l2_error(solution, problem.mesh, problem.mortars, solution, problem.mesh, problem.mortars)
    assert errors == {0: 0.0, 1: 0.0}


def test_mismatched_interfaces(tmp_path):
    column, column_solution = solved(tmp_path, "column", 8)
    benchmark, benchmark_solution = solved(tmp_path, "benchmark2d", 8)
    with pytest.raises(InterfaceMismatch):
        mortar_l2_error(column_solution, column.mesh, column.mortars,
                        benchmark_solution, benchmark.mesh, benchmark.mortars)


def test_vtk_files(tmp_path):
    problem, solution = solved(tmp_path, "benchmark2d", 8)
    files = write_vtk(problem.mesh, solution, problem.mortars, tmp_path / "vtk")
    assert len(files) == len(problem.mesh.subdomains) + 1
    assert all(path.exists() for path in files)
    assert (tmp_path / "vtk" / "fields_index.txt") in files
    text = (tmp_path / "vtk" / "fields_0.vtk").read_text()
    assert "pressure" in text
