#!/usr/bin/env python3
"""
Tests for case files, the pipeline drivers and the command line.
"""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from exceptions import ConfigError
from main import main, with_method
from mdfc_pipeline import MDFCPipeline, interface_ratios
from models.case import CaseConfig, FractureParams, StudyConfig
from models.grid import BoundaryKind, GridKind
from models.operators import MethodKind
from services.case_config import load_case_config, parse_boundary, parse_case_text

CASES = Path(__file__).parent / "cases"
METHODS = ["tpfa", "p1", "rt0h"]

FULL_CASE = """\
[case]
name = demo
geometry = benchmark2d
method = rt0h
resolution = 8
mortar_ratio = 0.5  # coarse mortars
seed = 3

[matrix]
kappa = 2
source = 0.1

[fractures]
kappa_perp = 10
kappa_par = 100
intersection_kappa_perp = 5

[fracture.blocking_left]
kappa_par = 0

[boundary]
top = dirichlet 1
left = dirichlet 0 0 1

[study]
ratios = 0.5, 0.75
methods = tpfa, rt0h
"""


# Case files

def test_parse_full_case():
    case = parse_case_text(FULL_CASE)
    assert case.name == "demo"
    assert case.method is MethodKind.RT0H
    assert case.grid is GridKind.STRUCTURED_TRIANGLES
    assert case.mortar_ratio == 0.5
    assert case.seed == 3
    assert case.matrix_kappa == 2.0 and case.matrix_source == 0.1
    assert case.default_fracture.kappa_perp == 10.0
    assert case.intersection_kappa_perp == 5.0
    assert case.fractures["blocking_left"].kappa_par == 0.0
    assert case.fractures["blocking_left"].kappa_perp == 1.0
    assert case.boundary["left"].kind is BoundaryKind.DIRICHLET
    assert case.boundary["left"].slope == (0.0, 1.0)
    assert case.study.ratios == [0.5, 0.75]
    assert case.study.methods == [MethodKind.TPFA, MethodKind.RT0H]


def test_parse_boundary():
    assert parse_boundary("neumann -0.5") == {"kind": "neumann", "value": -0.5}
    with pytest.raises(ConfigError):
        parse_boundary("dirichlet 1 2")
    with pytest.raises(ConfigError):
        parse_boundary("dirichlet one")


@pytest.mark.parametrize("text", [
    "[case]\nname = x\n[solver]\ntol = 1\n",
    "[case]\ncolour = red\n",
    "[case]\nmethod = mfd\n",
    "[case]\nmethod = p1\ngrid = cartesian_quads\n",
    "[boundary]\nfront = dirichlet 1\n",
    "[case]\nresolution = 0\n",
    "no section header\n",
])
def test_invalid_case_text(text):
    with pytest.raises(ConfigError):
        parse_case_text(text)


def test_mesh_file_is_relative_to_case_file():
    case = load_case_config(CASES / "split_square.cfg")
    assert case.mesh_file == CASES / "split_square.mesh"


def test_missing_case_file(tmp_path):
    with pytest.raises(ConfigError):
        load_case_config(tmp_path / "absent.cfg")


# Pipeline

def test_run_column_case(tmp_path):
    case = load_case_config(CASES / "column.cfg")
    result = MDFCPipeline(case, output_dir=tmp_path).run_case()
    summary = result.summary
    assert (summary.n_2d, summary.n_1d, summary.n_0d) == (2, 1, 0)
    assert summary.boundary_inflow == pytest.approx(1.0 / 3.0, rel=1e-8)
    assert summary.boundary_outflow == pytest.approx(1.0 / 3.0, rel=1e-8)
    assert summary.mortar_dofs == 32
    table = pd.read_csv(tmp_path / "summary.csv")
    assert table.loc[0, "method"] == "tpfa"
    assert table.loc[0, "boundary_inflow"] == pytest.approx(1.0 / 3.0, rel=1e-8)
    assert (tmp_path / "fields_index.txt") in result.files


def test_run_without_vtk(tmp_path):
    case = load_case_config(CASES / "column.cfg").model_copy(update={"write_vtk": False})
    result = MDFCPipeline(case, output_dir=tmp_path).run_case()
    assert result.files == [tmp_path / "summary.csv"]


def test_summary_records_parameters(tmp_path):
    case = CaseConfig(
        name="summary", geometry="column", resolution=8, matrix_kappa=2.0, seed=7, write_vtk=False,
        fracture_source=0.5, default_fracture=FractureParams(kappa_perp=10.0, kappa_par=100.0),
    )
    MDFCPipeline(case, output_dir=tmp_path).run_case()
    row = pd.read_csv(tmp_path / "summary.csv").loc[0]
    assert (row["kappa_perp"], row["kappa_par"], row["matrix_kappa"]) == (10.0, 100.0, 2.0)
    assert (row["fracture_source"], row["intersection_source"], row["seed"]) == (0.5, 0.0, 7)


def test_output_directory_defaults(tmp_path):
    case = CaseConfig(name="demo", output_dir=tmp_path / "chosen")
    assert MDFCPipeline(case).output_dir == tmp_path / "chosen"
    assert MDFCPipeline(case, output_dir=tmp_path).output_dir == tmp_path


def test_interface_ratios(tmp_path):
    pipeline = MDFCPipeline(CaseConfig(geometry="column", resolution=8, mortar_ratio=0.75), output_dir=tmp_path)
    problem = pipeline.build_problem(pipeline.build_mesh())
    assert interface_ratios(problem) == pytest.approx((0.75, 0.75))


@pytest.mark.parametrize("method", METHODS)
def test_convergence_study(tmp_path, method):
    case = CaseConfig(
        name="converge", geometry="benchmark2d", method=method,
        study=StudyConfig(levels=3, base_resolution=8, reference_factor=4),
    )
    rows = MDFCPipeline(case, output_dir=tmp_path).convergence_study()
    assert [row.resolution for row in rows] == [8, 16, 32]
    assert all(row.reference_resolution == 128 for row in rows)
    assert rows[0].rate_1d is None
    errors = [row.error_1d for row in rows]
    assert errors[0] > errors[1] > errors[2] > 0
    if method == "rt0h":
        assert np.mean([row.rate_1d for row in rows[1:]]) >= 0.8
    assert len(pd.read_csv(tmp_path / "convergence.csv")) == 3


def test_convergence_reference_check(tmp_path):
    case = CaseConfig(
        name="converge", geometry="column", method="tpfa",
        study=StudyConfig(levels=3, base_resolution=8, reference_factor=4, reference_check=True),
    )
    rows = MDFCPipeline(case, output_dir=tmp_path).convergence_study()
    assert [row.reference_change is None for row in rows] == [True, True, False]
    # Series flow is reproduced exactly at every level.
    assert all(row.error_1d < 1e-8 for row in rows)
    assert "reference_change" in pd.read_csv(tmp_path / "convergence.csv").columns


def test_convergence_reference_uses_matching_mortars(tmp_path, monkeypatch):
    case = CaseConfig(
        name="converge", geometry="column", method="tpfa", mortar_ratio=0.5,
        default_fracture=FractureParams(kappa_perp=2.0, kappa_par=3.0), matrix_kappa=4.0,
        study=StudyConfig(levels=3, base_resolution=8, reference_factor=4),
    )
    pipeline = MDFCPipeline(case, output_dir=tmp_path)
    solve_at = pipeline.solve_at
    inner = {}

    def recording(method, resolution, grid, ratio=None):
        problem, solution = solve_at(method, resolution, grid, ratio)
        inner[resolution] = interface_ratios(problem)[1]
        return problem, solution

    monkeypatch.setattr(pipeline, "solve_at", recording)
    pipeline.convergence_study()
    assert inner == pytest.approx({8: 0.5, 16: 0.5, 32: 0.5, 128: 1.0})
    table = pd.read_csv(tmp_path / "convergence.csv")
    assert (table["kappa_perp"] == 2.0).all()
    assert (table["kappa_par"] == 3.0).all()
    assert (table["matrix_kappa"] == 4.0).all()


@pytest.mark.parametrize("update", [
    {"study": StudyConfig(levels=2)},
    {"study": StudyConfig(reference_factor=2)},
    {"mesh_file": CASES / "split_square.mesh"},
])
def test_convergence_study_limits(tmp_path, update):
    case = CaseConfig(name="converge").model_copy(update=update)
    with pytest.raises(ConfigError):
        MDFCPipeline(case, output_dir=tmp_path).convergence_study()


@pytest.mark.parametrize("kappa_perp,ratios", [([0.0], [1.0]), ([1.0], [0.0])])
def test_stability_sweep_rejects_nonpositive(tmp_path, kappa_perp, ratios):
    pipeline = MDFCPipeline(CaseConfig(name="stability"), output_dir=tmp_path)
    with pytest.raises(ConfigError):
        pipeline.stability_sweep(kappa_perp, [1.0], ratios, ["tpfa"])


def test_stability_sweep_rows(tmp_path):
    pipeline = MDFCPipeline(CaseConfig(name="stability", resolution=8), output_dir=tmp_path)
    rows = pipeline.stability_sweep([1e-2, 1.0], [1.0], [0.5, 1.0], ["tpfa", "p1"])
    assert len(rows) == 8
    assert all(row.n_min > 0 and np.isfinite(row.ratio_outer) for row in rows)
    assert {row.method for row in rows} == {"tpfa", "p1"}


# Command line

def test_cli_run(tmp_path, capsys):
    assert main(["run", "--config", str(CASES / "column.cfg"), "--output", str(tmp_path)]) == 0
    assert (tmp_path / "summary.csv").exists()
    assert "RUN RESULTS" in capsys.readouterr().out


def test_cli_method_override(tmp_path):
    code = main(["run", "--config", str(CASES / "column.cfg"), "--output", str(tmp_path), "--method", "rt0h"])
    assert code == 0
    assert pd.read_csv(tmp_path / "summary.csv").loc[0, "method"] == "rt0h"


def test_cli_solver_override(tmp_path):
    code = main(["run", "--config", str(CASES / "column.cfg"), "--output", str(tmp_path), "--solver", "schur"])
    assert code == 0
    table = pd.read_csv(tmp_path / "summary.csv")
    assert table.loc[0, "solver"] == "schur"
    assert table.loc[0, "boundary_inflow"] == pytest.approx(1.0 / 3.0, rel=1e-8)


def test_with_method_follows_default_grid():
    case = load_case_config(CASES / "column.cfg")
    assert with_method(case, "p1").grid is GridKind.STRUCTURED_TRIANGLES


def test_cli_invalid_method(tmp_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--config", str(CASES / "column.cfg"), "--output", str(tmp_path), "--method", "mfd"])
    assert excinfo.value.code == 2


def test_cli_bad_config(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("[case]\ncolour = red\n")
    assert main(["run", "--config", str(path), "--output", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err


def test_cli_too_few_levels(tmp_path):
    code = main(["converge", "--config", str(CASES / "benchmark.cfg"), "--output", str(tmp_path), "--levels", "2"])
    assert code == 2


def test_cli_stability(tmp_path):
    code = main([
        "stability", "--config", str(CASES / "stability.cfg"), "--output", str(tmp_path),
        "--kperp", "1", "--kpar", "1e-4,1", "--ratios", "0.75", "--methods", "tpfa",
    ])
    assert code == 0
    table = pd.read_csv(tmp_path / "stability.csv")
    assert len(table) == 2
    assert (table["n_min"] > 0).all()


def test_cli_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "1.0.0" in capsys.readouterr().out
