"""Dense linear algebra used by the numeric modules.

Thin contract layer over LAPACK: every routine validates shape/symmetry,
symmetrizes nearly-symmetric input and reports failures explicitly instead of
returning garbage.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

# shared tolerances
SYMMETRY_RTOL = 1e-12
CHOLESKY_RTOL = 1e-10
SOLVE_RTOL = 1e-8
QR_ATOL = 1e-10
EIG_RTOL = 1e-8
ORTHO_ATOL = 1e-10
MAX_CONDITION = 1e14


class ContractError(ValueError):
    """Raised when an input violates a documented precondition."""


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, condition: float):
        super().__init__(f"matrix is singular to working precision (condition estimate {condition:.3e})")
        self.condition = condition


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SymEigResult:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # orthonormal columns


def _as_square(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractError("matrix has non-finite entries")
    return A


def symmetrize(A) -> np.ndarray:
    """Return (A + A^T)/2, refusing inputs that are not symmetric up to round-off."""
    A = _as_square(A)
    scale = max(np.max(np.abs(A)), 1.0) if A.size else 1.0
    if A.size and np.max(np.abs(A - A.T)) > SYMMETRY_RTOL * scale:
        raise ContractError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def cholesky(A) -> Optional[np.ndarray]:
    """Lower Cholesky factor of a symmetric matrix, or ``None`` if it is not positive definite."""
    A = symmetrize(A)
    if A.shape[0] == 0:
        return A.copy()
    L, info = lapack.dpotrf(A, lower=1, clean=1, overwrite_a=0)
    if info != 0:
        return None
    return L


def solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by partial-pivoting LU.

    Raises:
        SingularMatrixError: if the reciprocal condition estimate says ``A`` is
            numerically singular (condition above ``MAX_CONDITION``).
    """
    A = _as_square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise ContractError(f"rhs length {b.shape[0]} does not match matrix order {A.shape[0]}")
    if A.shape[0] == 0:
        return b.copy()
    anorm = np.linalg.norm(A, 1)
    lu, piv, info = lapack.dgetrf(A)
    if info > 0 or anorm == 0.0:
        raise SingularMatrixError(np.inf)
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    if rcond * MAX_CONDITION < 1.0:
        raise SingularMatrixError(np.inf if rcond == 0 else 1.0 / rcond)
    x, _ = lapack.dgetrs(lu, piv, b)
    return x


def qr(M) -> tuple[np.ndarray, np.ndarray]:
    """Complete Householder QR: ``M = Q R`` with ``Q`` square orthogonal."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ContractError(f"expected a matrix, got shape {M.shape}")
    Q, R = np.linalg.qr(M, mode="complete")
    return Q, R


def sym_eigenvalues(A) -> SymEigResult:
    A = symmetrize(A)
    w, V = np.linalg.eigh(A)
    return SymEigResult(w, V)


def condition_number(A) -> float:
    """Spectral condition number of a symmetric positive-definite matrix."""
    A = symmetrize(A)
    if cholesky(A) is None:
        raise NotPositiveDefiniteError("condition_number needs a positive-definite matrix; precondition first")
    w = sla.eigvalsh(A)
    if w[0] <= 0:
        # Cholesky passed but the smallest eigenvalue rounds to <= 0
        return np.inf
    return float(w[-1] / w[0])
