"""
Case file parsing.

Case files are sectioned ``key = value`` text::

    [case]
    name = column
    geometry = column
    method = tpfa
    resolution = 16

    [matrix]
    kappa = 1

    [fractures]
    kappa_perp = 1

    [fracture.cut]
    kappa_par = 1

    [boundary]
    left = dirichlet 1
    bottom = dirichlet 0 0 1

    [study]
    levels = 3
    ratios = 0.75, 1.0

Unknown sections and keys are errors.
"""

import configparser
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

from pydantic import ValidationError

from exceptions import ConfigError
from models.case import CaseConfig

logger = logging.getLogger(__name__)

CASE_KEYS = {
    "name", "geometry", "mesh_file", "method", "grid", "resolution", "mortar_ratio",
    "solver", "kappa_par_threshold", "tip_flux", "write_vtk", "output_dir", "seed",
}
MATRIX_KEYS = {"kappa": "matrix_kappa", "source": "matrix_source"}
FRACTURES_KEYS = {
    "source": "fracture_source",
    "intersection_kappa_perp": "intersection_kappa_perp",
    "intersection_source": "intersection_source",
}
LIST_KEYS = {"kappa_perp", "kappa_par", "ratios", "methods"}


def _reject_unknown(section: str, keys, allowed) -> None:
    unknown = sorted(set(keys) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {', '.join(unknown)}")


def parse_boundary(text: str) -> Dict[str, Any]:
    """'dirichlet 1 [dx dy]' or 'neumann g [dx dy]' -> BoundaryCondition fields."""
    tokens = text.split()
    if len(tokens) not in (2, 4):
        raise ConfigError(f"boundary entry '{text}' needs: kind value [d/dx d/dy]")
    try:
        values = [float(t) for t in tokens[1:]]
    except ValueError as exc:
        raise ConfigError(f"boundary entry '{text}' has a bad number") from exc
    entry: Dict[str, Any] = {"kind": tokens[0].lower(), "value": values[0]}
    if len(values) == 3:
        entry["slope"] = (values[1], values[2])
    return entry


def _split_list(text: str) -> List[str]:
    return [item.strip() for item in text.replace(";", ",").split(",") if item.strip()]


def parse_case_text(text: str, base_dir: Union[str, Path, None] = None) -> CaseConfig:
    """Parse case file contents into a validated CaseConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed case file ({exc})") from exc

    data: Dict[str, Any] = {}
    fractures: Dict[str, Dict[str, str]] = {}
    for section in parser.sections():
        items = dict(parser.items(section))
        if section == "case":
            _reject_unknown(section, items, CASE_KEYS)
            data.update(items)
        elif section == "matrix":
            _reject_unknown(section, items, MATRIX_KEYS)
            data.update({MATRIX_KEYS[k]: v for k, v in items.items()})
        elif section == "fractures":
            _reject_unknown(section, items, set(FRACTURES_KEYS) | {"kappa_perp", "kappa_par"})
            data.update({FRACTURES_KEYS[k]: v for k, v in items.items() if k in FRACTURES_KEYS})
            default = {k: v for k, v in items.items() if k in ("kappa_perp", "kappa_par")}
            if default:
                data["default_fracture"] = default
        elif section.startswith("fracture."):
            label = section.split(".", 1)[1].strip()
            if not label:
                raise ConfigError("fracture section needs a label: [fracture.<label>]")
            fractures[label] = items
        elif section == "boundary":
            data["boundary"] = {side: parse_boundary(value) for side, value in items.items()}
        elif section == "study":
            data["study"] = {k: _split_list(v) if k in LIST_KEYS else v for k, v in items.items()}
        else:
            raise ConfigError(f"unknown section [{section}]")
    if fractures:
        data["fractures"] = fractures
    if data.get("mesh_file") and base_dir is not None:
        mesh_file = Path(data["mesh_file"])
        data["mesh_file"] = mesh_file if mesh_file.is_absolute() else Path(base_dir) / mesh_file

    try:
        return CaseConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"invalid case configuration: {exc}") from exc


def load_case_config(path: Union[str, Path]) -> CaseConfig:
    """
    Read and validate a case file.

    Args:
        path: Case file path

    Returns:
        CaseConfig

    Raises:
        ConfigError: unreadable file, unknown section or key, invalid value
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read case file {path} ({exc})") from exc
    config = parse_case_text(text, path.parent)
    logger.info("loaded case '%s' from %s", config.name, path)
    return config
