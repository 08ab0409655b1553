"""
Numerical kernel: sparse storage helpers, direct solves with a residual
contract, and the smallest eigenpair of a symmetric matrix.
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from config import get_settings
from exceptions import NoConvergence, SingularMatrix

logger = logging.getLogger(__name__)

Matrix = Union[np.ndarray, sps.spmatrix]


def finalize_csr(matrix: Matrix) -> sps.csr_matrix:
    """Compressed rows with summed duplicates and sorted column indices."""
    csr = sps.csr_matrix(matrix)
    csr.sum_duplicates()
    csr.sort_indices()
    return csr


@dataclass(frozen=True)
class DenseSymMatrix:
    """Dense square matrix flagged symmetric (checked on construction)."""
    values: np.ndarray
    symmetric: bool = True

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {values.shape}")
        if self.symmetric and values.size:
            scale = np.abs(values).max()
            asym = np.abs(values - values.T).max()
            if asym > get_settings().SYMMETRY_TOL * max(scale, 1e-300):
                raise ValueError(f"matrix flagged symmetric has asymmetry {asym:.3e}")
        object.__setattr__(self, "values", values)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _as_array(matrix) -> np.ndarray:
    if isinstance(matrix, DenseSymMatrix):
        return matrix.values
    if sps.issparse(matrix):
        return matrix.toarray()
    return np.asarray(matrix, dtype=float)


def _norm_inf(matrix) -> float:
    if sps.issparse(matrix):
        return float(abs(matrix).sum(axis=1).max()) if matrix.shape[0] else 0.0
    return float(np.abs(matrix).sum(axis=1).max()) if matrix.shape[0] else 0.0


def _zero_pivot(lu: np.ndarray) -> int:
    diagonal = np.abs(np.diag(lu))
    tiny = np.finfo(float).eps * max(diagonal.max(initial=0.0), 1e-300) * len(diagonal)
    hits = np.flatnonzero(diagonal <= tiny)
    return int(hits[0]) if hits.size else -1


class Factorization:
    """LU factorization that can be reused for many right-hand sides."""

    def __init__(self, matrix: Matrix):
        n = matrix.shape[0]
        if matrix.shape != (n, n):
            raise ValueError(f"matrix must be square, got {matrix.shape}")
        self.matrix = matrix
        self.n = n
        self._sparse = None
        self._dense = None
        if n == 0:
            return
        limit = get_settings().DENSE_FALLBACK_MAX
        if sps.issparse(matrix):
            try:
                self._sparse = spla.splu(sps.csc_matrix(matrix))
                return
            except RuntimeError as exc:
                if n > limit:
                    raise SingularMatrix(f"sparse factorization failed ({exc})") from exc
                logger.debug("sparse LU failed (%s); locating the pivot densely", exc)
        dense = _as_array(matrix)
        lu, piv = sla.lu_factor(dense, check_finite=False)
        pivot = _zero_pivot(lu)
        if pivot >= 0:
            raise SingularMatrix(f"zero pivot at index {pivot}", pivot)
        self._dense = (lu, piv)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if self.n == 0:
            return np.zeros_like(rhs)
        if self._sparse is not None:
            return self._sparse.solve(rhs)
        return sla.lu_solve(self._dense, rhs, check_finite=False)


def factorize(matrix: Matrix) -> Factorization:
    return Factorization(matrix)


def residual_ok(matrix: Matrix, x: np.ndarray, rhs: np.ndarray, tol: float = None) -> Tuple[bool, float]:
    """Normwise backward error test ||Ax - b|| <= tol (||A|| ||x|| + ||b||)."""
    tol = get_settings().RESIDUAL_TOL if tol is None else tol
    r = matrix @ x - rhs
    bound = _norm_inf(matrix) * np.abs(x).max(initial=0.0) + np.abs(rhs).max(initial=0.0)
    size = float(np.abs(r).max(initial=0.0))
    return size <= tol * bound or size == 0.0, size


def factor_solve(matrix: Matrix, rhs: np.ndarray, refine: bool = True) -> np.ndarray:
    """
    Solve matrix @ x = rhs with a pivoted direct factorization.

    Args:
        matrix: Square sparse or dense matrix
        rhs: Right-hand side vector
        refine: Apply one step of iterative refinement

    Returns:
        Solution vector meeting the residual contract
    """
    if isinstance(matrix, DenseSymMatrix):
        matrix = matrix.values
    factor = Factorization(matrix)
    x = factor.solve(rhs)
    if refine and factor.n:
        x = x + factor.solve(rhs - matrix @ x)
    ok, size = residual_ok(matrix, x, rhs)
    if not np.all(np.isfinite(x)) or not ok:
        raise SingularMatrix(f"residual {size:.3e} above tolerance; matrix is numerically singular")
    return x


def _gershgorin_lower(values: np.ndarray) -> float:
    radius = np.abs(values).sum(axis=1) - np.abs(np.diag(values))
    return float((np.diag(values) - radius).min())


def min_eigenvalue_sym(matrix, tol: float = 1e-10, seed: int = 0) -> Tuple[float, np.ndarray]:
    """
    Algebraically smallest eigenpair of a symmetric matrix.

    Full symmetric eigendecomposition (lowest index only) up to EIG_DENSE_MAX
    unknowns; shift-invert Lanczos above. The shift is zero for positive
    definite matrices and a Gershgorin lower bound otherwise.

    Args:
        matrix: DenseSymMatrix, dense array or sparse matrix
        tol: Relative accuracy passed to the Lanczos iteration
        seed: Seed of the Lanczos start vector

    Returns:
        Tuple of (eigenvalue, unit eigenvector)
    """
    settings = get_settings()
    values = _as_array(matrix)
    n = values.shape[0]
    if n == 0:
        raise ValueError("empty matrix has no eigenvalues")
    scale = max(_norm_inf(values), 1e-300)
    if n <= max(settings.EIG_DENSE_MAX, 2):
        w, v = sla.eigh(values, subset_by_index=[0, 0])
        return float(w[0]), v[:, 0]

    # Strictly below the spectrum, so the eigenvalue nearest the shift is the smallest.
    try:
        sla.cho_factor(values, check_finite=False)
        shift = 0.0
    except sla.LinAlgError:
        shift = _gershgorin_lower(values) - 1e-3 * scale
    start = np.random.default_rng(seed).standard_normal(n)
    try:
        w, v = spla.eigsh(values, k=1, sigma=shift, which="LM", v0=start, tol=tol,
                          ncv=min(n, 32), maxiter=settings.EIG_MAX_ITER)
    except spla.ArpackNoConvergence as exc:
        raise NoConvergence(f"shift-invert Lanczos did not converge in {settings.EIG_MAX_ITER} restarts",
                            settings.EIG_MAX_ITER) from exc
    x = v[:, 0] / np.linalg.norm(v[:, 0])
    rayleigh = float(x @ values @ x)
    logger.debug("shift-invert Lanczos: eigenvalue %.6e, residual %.2e", rayleigh,
                 np.linalg.norm(values @ x - rayleigh * x))
    return rayleigh, x
