"""
Parameter assignment from a case configuration onto a mesh.
"""

import logging
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from models.case import CaseConfig, FractureParams
from models.grid import InterfaceKey, MixedDimMesh
from models.operators import SubdomainParams
from models.system import ProblemParams

logger = logging.getLogger(__name__)


def resolve_fracture(
    case: CaseConfig,
    label: Optional[str],
    table: Optional[Mapping[str, Tuple[float, float]]] = None,
) -> FractureParams:
    """Case-file entry first, then the built-in geometry table, then the default."""
    if label and label in case.fractures:
        return case.fractures[label]
    if table and label in table:
        perp, par = table[label]
        return FractureParams(kappa_perp=perp, kappa_par=par)
    return case.default_fracture


def assign_parameters(
    mesh: MixedDimMesh,
    case: CaseConfig,
    table: Optional[Mapping[str, Tuple[float, float]]] = None,
) -> ProblemParams:
    """
    Build SubdomainParams for every subdomain and kappa_perp for every interface.

    Matrix-fracture interfaces take the fracture's normal permeability;
    fracture-intersection interfaces take ``intersection_kappa_perp`` if set,
    otherwise the branch's own value.

    Args:
        mesh: Mixed-dimensional mesh
        case: Validated case configuration
        table: Per-label (kappa_perp, kappa_par) of a built-in geometry

    Returns:
        ProblemParams
    """
    subdomains: Dict[int, SubdomainParams] = {}
    for grid in mesh.subdomains:
        n = grid.num_cells
        if grid.dim == 2:
            subdomains[grid.id] = SubdomainParams(
                kappa=np.full(n, case.matrix_kappa),
                source=case.matrix_source * grid.cell_volumes,
            )
        elif grid.dim == 1:
            fracture = resolve_fracture(case, grid.label, table)
            subdomains[grid.id] = SubdomainParams(
                kappa=np.full(n, fracture.kappa_par),
                source=case.fracture_source * grid.cell_volumes,
                kappa_perp=fracture.kappa_perp,
                label=grid.label,
            )
        else:
            subdomains[grid.id] = SubdomainParams(
                kappa=np.ones(1),
                source=np.full(1, case.intersection_source),
            )

    kappa_perp: Dict[InterfaceKey, float] = {}
    for key in mesh.interfaces:
        lower = mesh.subdomain(key.lower)
        if lower.dim == 0 and case.intersection_kappa_perp is not None:
            kappa_perp[key] = case.intersection_kappa_perp
        elif lower.dim == 0:
            kappa_perp[key] = subdomains[key.higher].kappa_perp
        else:
            kappa_perp[key] = subdomains[key.lower].kappa_perp
    logger.debug("assigned parameters to %d subdomains and %d interfaces", len(subdomains), len(kappa_perp))
    return ProblemParams(subdomains=subdomains, kappa_perp=kappa_perp)


def with_uniform_fractures(case: CaseConfig, labels, kappa_perp: float, kappa_par: float) -> CaseConfig:
    """Copy of a case with the same permeabilities on every fracture label."""
    uniform = FractureParams(kappa_perp=kappa_perp, kappa_par=kappa_par)
    return case.model_copy(update={
        "fractures": {label: uniform for label in labels},
        "default_fracture": uniform,
        "intersection_kappa_perp": None,
    })
