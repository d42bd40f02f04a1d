"""Dense symmetric linear algebra: spectra, (pseudo-)log-determinants,
nullspace bases and Gram-system solves.

Matrices are plain 2-D numpy arrays. Everything here is a pure function;
inputs are never modified in place.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from .exceptions import (
    AssumptionViolation,
    ConditioningError,
    DegenerateSpectrumError,
    DimensionError,
    SymmetryError,
)

SYMMETRY_RTOL = 1e-8
# Gram solves refuse matrices with lambda_min <= GRAM_RCOND * lambda_max.
GRAM_RCOND = 1e-10
MAX_DENSE_DIM = 2000

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SpectrumReport:
    """Eigen-diagnostics of a symmetric matrix.

    ``eigenvalues`` are sorted descending. ``rank`` counts eigenvalues with
    ``|lambda| > cutoff``; ``log_pseudo_det`` sums ``log|lambda|`` over
    those. ``log_det`` is ``None`` unless the matrix has full rank.
    """

    eigenvalues: np.ndarray
    rank: int
    log_det: Optional[float]
    log_pseudo_det: float
    cutoff: float
    n_negative: int = 0

    @property
    def dim(self):
        return len(self.eigenvalues)

    def to_dict(self):
        return {
            "dim": self.dim,
            "rank": self.rank,
            "cutoff": self.cutoff,
            "log_det": self.log_det,
            "log_pseudo_det": self.log_pseudo_det,
            "n_negative": self.n_negative,
            "max_eigenvalue": float(self.eigenvalues[0]) if self.dim else None,
            "min_eigenvalue": float(self.eigenvalues[-1]) if self.dim else None,
        }


def default_cutoff(eigenvalues):
    """Scaled machine-precision rank cutoff: ``dim * eps * max|lambda|``."""
    eigenvalues = np.asarray(eigenvalues)
    if eigenvalues.size == 0:
        return 0.0
    return eigenvalues.size * _EPS * float(np.max(np.abs(eigenvalues)))


def check_symmetric(A, rtol=SYMMETRY_RTOL):
    """Return ``(A + A.T) / 2`` after validating shape and symmetry."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DENSE_DIM:
        raise DimensionError(
            f"dimension {A.shape[0]} exceeds the dense limit {MAX_DENSE_DIM}"
        )
    if not np.all(np.isfinite(A)):
        raise DimensionError("matrix has non-finite entries")
    asym = float(np.max(np.abs(A - A.T))) if A.size else 0.0
    scale = float(np.linalg.norm(A))
    if asym > rtol * scale:
        raise SymmetryError(
            f"max |A_ij - A_ji| = {asym:.3e} exceeds tolerance {rtol * scale:.3e}"
        )
    return 0.5 * (A + A.T)


def _report(w, cutoff):
    keep = np.abs(w) > cutoff
    rank = int(np.count_nonzero(keep))
    log_pdet = float(np.sum(np.log(np.abs(w[keep]))))
    return SpectrumReport(
        eigenvalues=w,
        rank=rank,
        log_det=log_pdet if rank == w.size else None,
        log_pseudo_det=log_pdet,
        cutoff=float(cutoff),
        n_negative=int(np.count_nonzero(w[keep] < 0)),
    )


def sym_eig(A, cutoff=None):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(report, V)`` with ``A = V diag(report.eigenvalues) V.T`` and
    eigenvalues sorted descending.

    >>> report, V = sym_eig(np.diag([1.0, 4.0]))
    >>> report.eigenvalues
    array([4., 1.])
    """
    A = check_symmetric(A)
    w, V = np.linalg.eigh(A)
    w, V = w[::-1].copy(), V[:, ::-1].copy()
    if cutoff is None:
        cutoff = default_cutoff(w)
    return _report(w, cutoff), V


def log_pseudo_det(A, cutoff=None):
    """Log of the product of eigenvalues above ``cutoff`` of a PSD matrix.

    Returns ``(value, rank)``.
    """
    if cutoff is not None and cutoff <= 0:
        raise ValueError("cutoff must be positive")
    report, _ = sym_eig(A, cutoff=cutoff)
    if report.rank == 0:
        raise DegenerateSpectrumError(
            f"all eigenvalues are below the cutoff {report.cutoff:.3e}"
        )
    if report.n_negative:
        raise DegenerateSpectrumError(
            f"matrix is not PSD: {report.n_negative} eigenvalue(s) below -cutoff "
            f"(min {report.eigenvalues[-1]:.3e})"
        )
    return report.log_pseudo_det, report.rank


def nullspace_basis(DF, tol=None):
    """Orthonormal basis of ``ker DF`` for a full-row-rank ``DF`` (k x d, k < d).

    Raises :class:`AssumptionViolation` (B) when the smallest singular value
    is not above ``tol`` (default ``max(k, d) * eps * sigma_max``).
    """
    DF = np.atleast_2d(np.asarray(DF, dtype=float))
    k, d = DF.shape
    if k >= d:
        raise AssumptionViolation(
            "B", f"need more parameters than constraints, got {k} rows and d={d}"
        )
    _, s, Vt = la.svd(DF, full_matrices=True)
    if tol is None:
        tol = max(k, d) * _EPS * s[0]
    if s[-1] <= tol:
        raise AssumptionViolation(
            "B",
            f"Jacobian is rank deficient: sigma_min = {s[-1]:.3e} <= tol {tol:.3e}",
        )
    return Vt[k:].T.copy()


def solve_gram(J, b, rcond=GRAM_RCOND):
    """Solve ``J x = b`` for a symmetric positive definite Gram matrix.

    Refuses indefinite or near-singular ``J`` (``lambda_min <= rcond *
    lambda_max``) with :class:`ConditioningError`.
    """
    J = check_symmetric(J)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != J.shape[0]:
        raise DimensionError(f"rhs has length {b.shape[0]}, matrix is {J.shape}")
    w = np.linalg.eigvalsh(J)
    if w[0] <= rcond * max(w[-1], 0.0) or w[0] <= 0:
        raise ConditioningError(
            f"Gram matrix is not safely positive definite: min eigenvalue "
            f"{w[0]:.3e}, max {w[-1]:.3e}",
            min_eigenvalue=float(w[0]),
        )
    c = la.cho_factor(J)
    x = la.cho_solve(c, b)
    # one step of iterative refinement
    x = x + la.cho_solve(c, b - J @ x)
    return x
