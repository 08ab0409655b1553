#!/usr/bin/env python3
"""
MDFC Pipeline
Runs mixed-dimensional Darcy flow cases: single solves with summary tables and
VTK fields, mesh convergence studies of the mortar fluxes, and stability
sweeps of the flux Schur complement.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from config import get_settings
from exceptions import ConfigError
from models.case import (
    CaseConfig,
    ConvergenceRow,
    SolverKind,
    StabilityRow,
    SummaryRow,
    default_grid,
)
from models.grid import GridKind, MixedDimMesh
from models.operators import MethodKind
from models.system import CaseResult, CoupledProblem, Solution
from services.assembly import (
    assemble_global_system,
    assemble_schur,
    classify_subdomains,
    schur_min_eigenvalue,
    solve_global,
    solve_schur,
)
from services.discretization import assemble_operator
from services.mesh_builder import build_builtin_geometry, builtin_fractures
from services.mesh_io import read_mesh_file
from services.mortar import assemble_projections, build_mortar_grids
from services.parameters import assign_parameters, with_uniform_fractures
from services.postprocess import compute_diagnostics, convergence_rates, mortar_l2_error
from services.vtk_writer import write_vtk

logger = logging.getLogger(__name__)

STABILITY_GEOMETRY = "stability2d"


def interface_ratios(problem: CoupledProblem) -> Tuple[float, float]:
    """
    Mortar cells per higher-dimensional face and per fracture cell, over all
    matrix-fracture interfaces.

    Returns:
        Tuple of (ratio_outer, ratio_inner); (nan, nan) without fractures
    """
    mortar_cells = outer = inner = 0
    for m in problem.mortars:
        lower = problem.mesh.subdomain(m.lower)
        if lower.dim != 1:
            continue
        mortar_cells += m.num_cells
        inner += lower.num_cells
        outer += len(problem.mesh.subdomain(m.higher).interface_faces(m.lower, int(m.side)))
    if not mortar_cells:
        return float("nan"), float("nan")
    return mortar_cells / outer, mortar_cells / inner


class MDFCPipeline:
    """Driver for single cases, convergence studies and stability sweeps."""

    def __init__(self, case: CaseConfig, output_dir: Union[str, Path, None] = None):
        """
        Initialize the pipeline for one case configuration.

        Args:
            case: Validated case configuration
            output_dir: Result directory (overrides the case and the environment)
        """
        self.case = case
        self.settings = get_settings()
        if output_dir is None:
            output_dir = case.output_dir or Path(self.settings.OUTPUT_DIR) / case.name
        self.output_dir = Path(output_dir)

    @property
    def mortar_ratio(self) -> float:
        if self.case.mortar_ratio is None:
            return self.settings.DEFAULT_MORTAR_RATIO
        return self.case.mortar_ratio

    def grid_for(self, method: MethodKind) -> GridKind:
        """The case grid for its own method, the method default otherwise."""
        method = MethodKind(method)
        if method is self.case.method or self.case.grid is GridKind.STRUCTURED_TRIANGLES:
            return self.case.grid
        return default_grid(method)

    # ------------------------------------------------------------------
    # Building blocks
    # ------------------------------------------------------------------

    def build_mesh(
        self,
        resolution: Optional[int] = None,
        grid: Optional[GridKind] = None,
        case: Optional[CaseConfig] = None,
    ) -> MixedDimMesh:
        """
        Mesh a built-in geometry or read the case's mesh file.

        Args:
            resolution: Cells per side (defaults to the case resolution)
            grid: Lattice cell shape (defaults to the case grid)
            case: Case to mesh (defaults to the pipeline's case)

        Returns:
            MixedDimMesh
        """
        case = case or self.case
        if case.mesh_file is not None:
            return read_mesh_file(case.mesh_file, case.tip_flux)
        return build_builtin_geometry(
            case.geometry,
            resolution or case.resolution,
            grid or case.grid,
            case.boundary,
            case.tip_flux,
        )

    @staticmethod
    def fracture_table(case: CaseConfig) -> Optional[Dict[str, Tuple[float, float]]]:
        if case.mesh_file is not None:
            return None
        return builtin_fractures(case.geometry)[2]

    def build_problem(
        self,
        mesh: MixedDimMesh,
        case: Optional[CaseConfig] = None,
        method: Optional[MethodKind] = None,
        ratio: Optional[float] = None,
    ) -> CoupledProblem:
        """
        Assign parameters, build mortar grids, discretize every subdomain and
        assemble the projections.

        Blocking fractures take their pressure unknowns on the partition of
        their own mortar grids.
        """
        case = case or self.case
        method = MethodKind(method or case.method)
        params = assign_parameters(mesh, case, self.fracture_table(case))
        mortars = build_mortar_grids(mesh, self.mortar_ratio if ratio is None else ratio)
        partition = classify_subdomains(mesh, params, case.kappa_par_threshold)
        blocking_edges = {m.lower: m.edges for m in mortars if partition.is_blocking(m.lower)}
        operators = {
            grid.id: assemble_operator(
                grid,
                params[grid.id],
                method,
                blocking=partition.is_blocking(grid.id),
                mortar_edges=blocking_edges.get(grid.id),
            )
            for grid in mesh.subdomains
        }
        projections = assemble_projections(mesh, mortars, operators)
        return CoupledProblem(
            mesh=mesh,
            mortars=mortars,
            params=params,
            partition=partition,
            operators=operators,
            projections=projections,
        )

    def solve(self, problem: CoupledProblem, solver: Optional[SolverKind] = None) -> Solution:
        """Solve with the monolithic or the Schur path and attach diagnostics."""
        solver = SolverKind(solver or self.case.solver)
        args = (problem.mesh, problem.mortars, problem.operators, problem.params, problem.projections,
                problem.partition)
        if solver is SolverKind.GLOBAL:
            solution = solve_global(assemble_global_system(*args), problem.mortars, problem.operators,
                                    problem.projections)
        else:
            solution = solve_schur(assemble_schur(*args), problem.mortars, problem.operators,
                                   problem.projections)
        solution.diagnostics = compute_diagnostics(
            problem.mesh, problem.mortars, problem.projections, problem.operators, problem.params, solution
        )
        return solution

    def solve_at(
        self, method: MethodKind, resolution: int, grid: GridKind, ratio: Optional[float] = None,
    ) -> Tuple[CoupledProblem, Solution]:
        mesh = self.build_mesh(resolution, grid)
        problem = self.build_problem(mesh, method=method, ratio=ratio)
        return problem, self.solve(problem)

    def summarize(self, problem: CoupledProblem, solution: Solution) -> SummaryRow:
        n_2d, n_1d, n_0d = problem.mesh.counts_by_dim()
        diagnostics = solution.diagnostics
        return SummaryRow(
            case=self.case.name,
            geometry=str(self.case.mesh_file) if self.case.mesh_file else self.case.geometry,
            method=MethodKind(self.case.method).value,
            solver=solution.solver,
            resolution=self.case.resolution,
            mortar_ratio=self.mortar_ratio,
            kappa_perp=self.case.default_fracture.kappa_perp,
            kappa_par=self.case.default_fracture.kappa_par,
            matrix_kappa=self.case.matrix_kappa,
            fracture_source=self.case.fracture_source,
            intersection_source=self.case.intersection_source,
            seed=self.case.seed,
            n_2d=n_2d,
            n_1d=n_1d,
            n_0d=n_0d,
            mortar_dofs=problem.num_mortar_dofs,
            unknowns=problem.num_unknowns,
            residual=solution.residual,
            boundary_inflow=diagnostics["boundary_inflow"],
            boundary_outflow=diagnostics["boundary_outflow"],
            global_imbalance=diagnostics["global_imbalance"],
            max_cell_imbalance=diagnostics["max_cell_imbalance"],
            interface_law_residual=diagnostics["interface_law_residual"],
        )

    def write_table(self, rows: Sequence[BaseModel], name: str) -> Path:
        """Write table rows as CSV into the output directory."""
        self.output_dir.mkdir(parents=True, exist_ok=True)
        path = self.output_dir / name
        pd.DataFrame([row.model_dump() for row in rows]).to_csv(path, index=False)
        logger.info("wrote %d rows to %s", len(rows), path)
        return path

    # ------------------------------------------------------------------
    # Drivers
    # ------------------------------------------------------------------

    def run_case(self) -> CaseResult:
        """
        Solve the configured case and write summary.csv and the VTK fields.

        Returns:
            CaseResult with the assembled problem, the solution and the summary row
        """
        print(f"Running case '{self.case.name}'...")

        print("1. Building mesh...")
        mesh = self.build_mesh()
        n_2d, n_1d, n_0d = mesh.counts_by_dim()
        print(f"   {n_2d} matrix, {n_1d} fracture and {n_0d} intersection subdomains")

        print("2. Discretizing...")
        problem = self.build_problem(mesh)
        print(f"   {problem.num_unknowns} unknowns, {problem.num_mortar_dofs} of them mortar fluxes")

        print(f"3. Solving ({SolverKind(self.case.solver).value})...")
        solution = self.solve(problem)
        print(f"   Residual {solution.residual:.2e}, boundary inflow "
              f"{solution.diagnostics['boundary_inflow']:.10g}")

        print("4. Writing results...")
        summary = self.summarize(problem, solution)
        files = [self.write_table([summary], "summary.csv")]
        if self.case.write_vtk:
            files += write_vtk(mesh, solution, problem.mortars, self.output_dir)

        print(f"Results saved to {self.output_dir}")
        return CaseResult(problem=problem, solution=solution, summary=summary, files=files)

    def convergence_study(self, levels: Optional[int] = None) -> List[ConvergenceRow]:
        """
        Mortar flux errors of the case method on successively halved grids.

        The reference is computed with the hybridized mixed method on
        triangles, ``reference_factor`` times finer than the finest level,
        with matching mortar grids.

        Args:
            levels: Number of refinement levels (defaults to the study settings)

        Returns:
            One ConvergenceRow per level, also written to convergence.csv
        """
        study = self.case.study
        levels = study.levels if levels is None else levels
        if levels < self.settings.MIN_LEVELS:
            raise ConfigError(f"convergence study needs at least {self.settings.MIN_LEVELS} levels, got {levels}")
        if study.reference_factor < self.settings.REFERENCE_FACTOR:
            raise ConfigError(f"reference must be at least {self.settings.REFERENCE_FACTOR}x finer than "
                              f"the finest level, got {study.reference_factor}")
        if self.case.mesh_file is not None:
            raise ConfigError("convergence study needs a built-in geometry")

        method = MethodKind(self.case.method)
        resolutions = [study.base_resolution * 2 ** k for k in range(levels)]
        reference_resolution = study.reference_factor * resolutions[-1]
        print(f"Convergence study of {method.value} on '{self.case.geometry}'...")

        print(f"1. Solving reference (rt0h, {reference_resolution}x{reference_resolution})...")
        reference_problem, reference = self.solve_at(MethodKind.RT0H, reference_resolution,
                                                     GridKind.STRUCTURED_TRIANGLES, ratio=1.0)

        print(f"2. Solving {levels} levels...")
        errors: List[Dict[int, float]] = []
        finest = None
        for resolution in resolutions:
            problem, solution = self.solve_at(method, resolution, self.case.grid)
            errors.append(mortar_l2_error(solution, problem.mesh, problem.mortars,
                                          reference, reference_problem.mesh, reference_problem.mortars))
            finest = (problem, solution)
            print(f"   {resolution}x{resolution}: 1D error {errors[-1][1]:.3e}, 0D error {errors[-1][0]:.3e}")

        change = None
        if study.reference_check:
            print(f"3. Checking reference ({2 * reference_resolution}x{2 * reference_resolution})...")
            check_problem, check = self.solve_at(MethodKind.RT0H, 2 * reference_resolution,
                                                 GridKind.STRUCTURED_TRIANGLES, ratio=1.0)
            problem, solution = finest
            rechecked = mortar_l2_error(solution, problem.mesh, problem.mortars,
                                        check, check_problem.mesh, check_problem.mortars)[1]
            change = abs(rechecked - errors[-1][1]) / max(rechecked, 1e-300)
            print(f"   Finest-level error changes by {100 * change:.1f}%")
            if change > 0.2:
                logger.warning("reference solution does not dominate the error (change %.1f%%)", 100 * change)

        rates_1d = convergence_rates([e[1] for e in errors])
        rates_0d = convergence_rates([e[0] for e in errors])
        rows = [
            ConvergenceRow(
                geometry=self.case.geometry,
                method=method.value,
                mortar_ratio=self.mortar_ratio,
                kappa_perp=self.case.default_fracture.kappa_perp,
                kappa_par=self.case.default_fracture.kappa_par,
                matrix_kappa=self.case.matrix_kappa,
                level=level,
                resolution=resolution,
                h=1.0 / resolution,
                reference_resolution=reference_resolution,
                error_1d=error[1],
                error_0d=error[0],
                rate_1d=rates_1d[level],
                rate_0d=rates_0d[level],
                reference_change=change if level == levels - 1 else None,
            )
            for level, (resolution, error) in enumerate(zip(resolutions, errors))
        ]

        print("Writing results...")
        self.write_table(rows, "convergence.csv")
        mean_rate = np.mean([r for r in rates_1d if r is not None])
        print(f"Mean 1D rate {mean_rate:.2f}; results saved to {self.output_dir}")
        return rows

    def stability_sweep(
        self,
        kappa_perp: Optional[Sequence[float]] = None,
        kappa_par: Optional[Sequence[float]] = None,
        ratios: Optional[Sequence[float]] = None,
        methods: Optional[Sequence[MethodKind]] = None,
    ) -> List[StabilityRow]:
        """
        Smallest eigenvalue of the flux Schur complement over a parameter grid.

        Without an explicit geometry in the case, the sweep runs on the
        benchmark reduced to its boundary-touching fractures.

        Args:
            kappa_perp: Normal permeabilities (all positive)
            kappa_par: Tangential permeabilities
            ratios: Mortar cells per fracture cell
            methods: Subdomain methods

        Returns:
            One StabilityRow per parameter tuple, also written to stability.csv
        """
        study = self.case.study
        kappa_perp = list(study.kappa_perp if kappa_perp is None else kappa_perp)
        kappa_par = list(study.kappa_par if kappa_par is None else kappa_par)
        ratios = list(study.ratios if ratios is None else ratios)
        methods = [MethodKind(m) for m in (study.methods if methods is None else methods)]
        if not all(k > 0 for k in kappa_perp):
            raise ConfigError(f"normal permeabilities must be positive, got {kappa_perp}")
        if not all(r > 0 for r in ratios):
            raise ConfigError(f"mortar ratios must be positive, got {ratios}")

        case = self.case
        if "geometry" not in case.model_fields_set and case.mesh_file is None:
            case = case.model_copy(update={"geometry": STABILITY_GEOMETRY})
        geometry = str(case.mesh_file) if case.mesh_file else case.geometry
        tasks = list(product(methods, kappa_perp, kappa_par, ratios))
        print(f"Stability sweep on '{geometry}': {len(tasks)} parameter tuples...")

        print("1. Building meshes...")
        meshes = {method: self.build_mesh(grid=self.grid_for(method), case=case) for method in methods}

        def evaluate(task) -> StabilityRow:
            method, perp, par, ratio = task
            labels = {g.label for g in meshes[method].grids_of_dim(1) if g.label}
            uniform = with_uniform_fractures(case, labels, perp, par)
            problem = self.build_problem(meshes[method], case=uniform, method=method, ratio=ratio)
            schur = assemble_schur(problem.mesh, problem.mortars, problem.operators, problem.params,
                                   problem.projections, problem.partition)
            outer, inner = interface_ratios(problem)
            return StabilityRow(
                geometry=geometry,
                method=method.value,
                resolution=case.resolution,
                kappa_perp=perp,
                kappa_par=par,
                mortar_ratio=ratio,
                ratio_outer=outer,
                ratio_inner=inner,
                n_min=schur_min_eigenvalue(schur, seed=case.seed),
            )

        print("2. Computing smallest eigenvalues...")
        workers = max(1, min(self.settings.MDFC_THREADS, len(tasks)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate, tasks))

        print("3. Writing results...")
        self.write_table(rows, "stability.csv")
        print(f"Results saved to {self.output_dir}")
        return rows
