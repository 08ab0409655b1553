#!/usr/bin/env python3
"""
Tests for the coupled system: the monolithic and Schur complement paths,
the flowing/blocking partition, conservation and the stability indicator.
"""

from pathlib import Path

import numpy as np
import pytest

from exceptions import NestedBlockingDomains
from mdfc_pipeline import MDFCPipeline
from models.case import CaseConfig, FractureParams
from services.assembly import assemble_global_system, assemble_schur, schur_min_eigenvalue, schur_spectrum
from services.case_config import load_case_config

CASES = Path(__file__).parent / "cases"
METHODS = ["tpfa", "p1", "rt0h"]


def pipeline_for(tmp_path, **fields) -> MDFCPipeline:
    return MDFCPipeline(CaseConfig(**fields), output_dir=tmp_path)


def column_flux(kappa_perp: float, kappa: float = 1.0) -> float:
    """Flux per unit length through the column: two half matrices and two interfaces in series."""
    return 1.0 / (1.0 / kappa + 2.0 / kappa_perp)


def system_args(problem):
    return (problem.mesh, problem.mortars, problem.operators, problem.params, problem.projections,
            problem.partition)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("kappa_perp", [1.0, 1e4])
@pytest.mark.parametrize("solver", ["global", "schur"])
def test_column_flux(tmp_path, method, kappa_perp, solver):
    pipeline = pipeline_for(
        tmp_path, name="column", geometry="column", method=method, resolution=8, mortar_ratio=0.75,
        fractures={"cut": FractureParams(kappa_perp=kappa_perp, kappa_par=1.0)},
    )
    problem = pipeline.build_problem(pipeline.build_mesh())
    solution = pipeline.solve(problem, solver)
    q = column_flux(kappa_perp)
    rtol = 1e-8 if method == "p1" else 1e-10
    plus, minus = problem.mortars
    assert np.allclose(solution.fluxes[plus.id], q, rtol=rtol, atol=0.0)
    assert np.allclose(solution.fluxes[minus.id], -q, rtol=rtol, atol=0.0)
    assert solution.diagnostics["boundary_inflow"] == pytest.approx(q, rel=rtol)
    assert solution.diagnostics["interface_law_residual"] < 1e-8


def test_column_oracle_values():
    assert column_flux(1.0) == pytest.approx(1.0 / 3.0)
    assert column_flux(1e4) == pytest.approx(1.0 / (1.0 + 2e-4))


@pytest.mark.parametrize("method", METHODS)
def test_global_and_schur_agree_on_benchmark(tmp_path, method):
    pipeline = pipeline_for(tmp_path, name="benchmark", method=method, resolution=8)
    problem = pipeline.build_problem(pipeline.build_mesh())
    monolithic = pipeline.solve(problem, "global")
    reduced = pipeline.solve(problem, "schur")
    scale = np.abs(monolithic.flux_vector()).max()
    assert np.allclose(reduced.flux_vector(), monolithic.flux_vector(), rtol=0.0, atol=1e-9 * scale)
    pressure_scale = np.abs(monolithic.pressure_vector()).max()
    for i in problem.operators:
        assert np.allclose(reduced.pressures[i], monolithic.pressures[i], rtol=0.0, atol=1e-9 * pressure_scale)


def test_schur_mean_constraints_hold(tmp_path):
    pipeline = pipeline_for(tmp_path, name="benchmark", method="tpfa", resolution=8)
    problem = pipeline.build_problem(pipeline.build_mesh())
    schur = assemble_schur(*system_args(problem))
    # Immersed crossing branches and the intersection point have no Dirichlet boundary.
    assert len(schur.pbar_index) == len(problem.partition.pure_neumann) >= 3
    solution = pipeline.solve(problem, "schur")
    assert np.allclose(schur.Q.T @ solution.flux_vector(), schur.rhs_constraint, atol=1e-10)
    # Sources are zero, so mortar inflow balances mortar outflow on every floating subdomain.
    for i in problem.partition.pure_neumann:
        inflow = sum(solution.integrated_flux(m.id, m.measures) for m in problem.mortars if m.lower == i)
        outflow = sum(solution.integrated_flux(m.id, m.measures) for m in problem.mortars if m.higher == i)
        assert inflow - outflow == pytest.approx(0.0, abs=1e-10)


@pytest.mark.parametrize("solver", ["global", "schur"])
def test_floating_subdomains_balance_their_sources(tmp_path, solver):
    pipeline = pipeline_for(tmp_path, name="benchmark", method="tpfa", resolution=8,
                            fracture_source=0.7, intersection_source=0.3)
    problem = pipeline.build_problem(pipeline.build_mesh())
    solution = pipeline.solve(problem, solver)
    assert problem.partition.pure_neumann
    for i in problem.partition.pure_neumann:
        inflow = sum(solution.integrated_flux(m.id, m.measures) for m in problem.mortars if m.lower == i)
        outflow = sum(solution.integrated_flux(m.id, m.measures) for m in problem.mortars if m.higher == i)
        sink = float(problem.params[i].source.sum())
        assert sink != 0.0
        assert inflow - outflow == pytest.approx(sink, abs=1e-10)
    assert solution.diagnostics["global_imbalance"] < 1e-10 * solution.diagnostics["flux_scale"]


@pytest.mark.parametrize("method", ["tpfa", "rt0h"])
def test_conservative_methods_balance_every_cell(tmp_path, method):
    pipeline = pipeline_for(tmp_path, name="benchmark", method=method, resolution=8)
    problem = pipeline.build_problem(pipeline.build_mesh())
    diagnostics = pipeline.solve(problem).diagnostics
    scale = diagnostics["flux_scale"]
    assert diagnostics["max_cell_imbalance"] < 1e-10 * scale
    assert diagnostics["global_imbalance"] < 1e-10 * scale
    assert diagnostics["boundary_inflow"] == pytest.approx(diagnostics["boundary_outflow"], rel=1e-10)


def test_p1_global_balance(tmp_path):
    pipeline = pipeline_for(tmp_path, name="benchmark", method="p1", resolution=8)
    problem = pipeline.build_problem(pipeline.build_mesh())
    diagnostics = pipeline.solve(problem).diagnostics
    assert diagnostics["global_imbalance"] < 1e-10 * diagnostics["flux_scale"]
    assert diagnostics["interface_law_residual"] < 1e-8


def blocking_case(tmp_path, kappa_par: float, **extra) -> MDFCPipeline:
    blocking = FractureParams(kappa_perp=1.0, kappa_par=kappa_par)
    return pipeline_for(
        tmp_path, name="benchmark", method="tpfa", resolution=8, mortar_ratio=1.0,
        fractures={"blocking_left": blocking, "blocking_right": blocking}, **extra,
    )


def test_blocking_partition(tmp_path):
    pipeline = blocking_case(tmp_path, 0.0)
    problem = pipeline.build_problem(pipeline.build_mesh())
    labels = sorted(problem.mesh.subdomain(i).label for i in problem.partition.blocking)
    assert labels == ["blocking_left", "blocking_right"]
    system = assemble_global_system(*system_args(problem))
    blocking_mortars = [m for m in problem.mortars if problem.partition.is_blocking(m.lower)]
    assert system.block_sizes["lambda_ab"] == sum(m.num_cells for m in blocking_mortars)
    # One pressure per mortar cell of each blocking fracture.
    assert system.block_sizes["p_b"] == sum(m.num_cells for m in blocking_mortars) // 2


@pytest.mark.parametrize("solver,kappa_par,tol", [("global", 1e-12, 1e-6), ("schur", 1e-10, 1e-5)])
def test_blocking_limit(tmp_path, solver, kappa_par, tol):
    exact = blocking_case(tmp_path, 0.0)
    nearly = blocking_case(tmp_path, kappa_par)
    blocked = exact.solve(exact.build_problem(exact.build_mesh()), solver)
    flowing = nearly.solve(nearly.build_problem(nearly.build_mesh()), solver)
    scale = np.abs(flowing.flux_vector()).max()
    assert np.allclose(blocked.flux_vector(), flowing.flux_vector(), atol=tol * scale)
    for i in flowing.pressures:
        assert np.allclose(blocked.pressures[i], flowing.pressures[i], atol=tol)


def test_threshold_makes_weak_fractures_blocking(tmp_path):
    pipeline = pipeline_for(tmp_path, name="benchmark", method="tpfa", resolution=8, kappa_par_threshold=1e-3)
    problem = pipeline.build_problem(pipeline.build_mesh())
    assert len(problem.partition.blocking) == 2


def crossing_case(tmp_path, kappa_par: float, **fractures) -> MDFCPipeline:
    blocking = FractureParams(kappa_perp=1e4, kappa_par=kappa_par)
    return pipeline_for(
        tmp_path, name="benchmark", method="tpfa", resolution=8, mortar_ratio=1.0,
        fractures={"crossing_horizontal": blocking, **fractures},
    )


@pytest.mark.parametrize("solver", ["global", "schur"])
def test_blocking_fracture_through_intersection(tmp_path, solver):
    exact = crossing_case(tmp_path, 0.0)
    problem = exact.build_problem(exact.build_mesh())
    labels = sorted(problem.mesh.subdomain(i).label for i in problem.partition.blocking)
    assert labels == ["crossing_horizontal", "crossing_horizontal"]
    decoupled = [p.interface for p in problem.projections if p.decoupled]
    assert len(decoupled) == 2
    blocked = exact.solve(problem, solver)
    scale = blocked.diagnostics["flux_scale"]
    assert all(np.abs(blocked.fluxes[i]).max() < 1e-12 * scale for i in decoupled)
    assert blocked.diagnostics["global_imbalance"] < 1e-10 * scale
    assert blocked.diagnostics["interface_law_residual"] < 1e-8

    nearly = crossing_case(tmp_path, 1e-10)
    flowing = nearly.solve(nearly.build_problem(nearly.build_mesh()), solver)
    flux_scale = np.abs(flowing.flux_vector()).max()
    assert np.allclose(blocked.flux_vector(), flowing.flux_vector(), atol=1e-5 * flux_scale)
    for i in problem.partition.flowing:
        assert np.allclose(blocked.pressures[i], flowing.pressures[i], atol=1e-5)


def test_intersection_of_blocking_fractures(tmp_path):
    pipeline = crossing_case(tmp_path, 0.0, crossing_vertical=FractureParams(kappa_perp=1e4, kappa_par=0.0))
    mesh = pipeline.build_mesh()
    with pytest.raises(NestedBlockingDomains) as excinfo:
        pipeline.build_problem(mesh)
    assert excinfo.value.subdomains == tuple(g.id for g in mesh.grids_of_dim(0))


def test_nested_blocking_domains(tmp_path):
    pipeline = pipeline_for(tmp_path, name="benchmark", method="tpfa", resolution=8, kappa_par_threshold=10.0)
    mesh = pipeline.build_mesh()
    with pytest.raises(NestedBlockingDomains) as excinfo:
        pipeline.build_problem(mesh)
    assert set(excinfo.value.subdomains) == {g.id for g in mesh.grids_of_dim(1)}


def test_split_square_block_sizes(tmp_path):
    case = load_case_config(CASES / "split_square.cfg")
    pipeline = MDFCPipeline(case, output_dir=tmp_path)
    problem = pipeline.build_problem(pipeline.build_mesh())
    system = assemble_global_system(*system_args(problem))
    # Two cells and two interface faces per half, two fracture cells.
    assert system.block_sizes == {"p_a": 10, "lambda_aa": 4, "lambda_ab": 0, "p_b": 0}
    assert problem.num_mortar_dofs == 4
    solution = pipeline.solve(problem)
    assert np.allclose(solution.fluxes[0], 1.0 / 3.0)
    assert np.allclose(solution.fluxes[1], -1.0 / 3.0)


def test_schur_is_symmetric_positive_definite(tmp_path):
    pipeline = pipeline_for(tmp_path, name="stability", geometry="stability2d", method="tpfa", resolution=8)
    problem = pipeline.build_problem(pipeline.build_mesh())
    schur = assemble_schur(*system_args(problem))
    S = schur.S.values
    assert np.allclose(S, S.T)
    values, _ = schur_spectrum(schur)
    assert values[0] > 0
    assert schur_min_eigenvalue(schur) == pytest.approx(values[0], rel=1e-8)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("ratio", [0.75, 1.0])
def test_stability_scales_with_normal_permeability(tmp_path, method, ratio):
    pipeline = pipeline_for(tmp_path, name="stability", method=method, resolution=8)
    rows = pipeline.stability_sweep([1e-4, 1e-3, 1e-2, 1e-1], [1.0], [ratio], [method])
    assert all(row.geometry == "stability2d" for row in rows)
    scaled = [row.n_min * row.kappa_perp for row in rows]
    # S = K + C^T X C with X positive semidefinite, so n_min * kappa_perp >= smallest mortar measure.
    assert max(scaled) <= 2.0 * min(scaled)


@pytest.mark.parametrize("method", METHODS)
def test_stability_ignores_tangential_permeability(tmp_path, method):
    pipeline = pipeline_for(tmp_path, name="stability", method=method, resolution=8)
    kappa_par = [10.0 ** k for k in range(-4, 5)]
    rows = pipeline.stability_sweep([1.0], kappa_par, [0.75], [method])
    assert sorted(row.kappa_par for row in rows) == pytest.approx(kappa_par)
    values = [row.n_min for row in sorted(rows, key=lambda r: r.kappa_par)]
    assert all(v > 0 for v in values)
    # Larger tangential permeability only shrinks the fracture compliance.
    assert all(low >= high * (1 - 1e-9) for low, high in zip(values, values[1:]))
    assert values[-1] == pytest.approx(values[0], rel=1e-2)
    assert (tmp_path / "stability.csv").exists()
