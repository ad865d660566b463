"""Small Cholesky-centric linear algebra helpers shared across the package.

All symmetric positive-definite solves in this package go through these
wrappers so that a failed factorization surfaces as a single, catchable
exception type instead of being silently jittered away.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as la


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a matrix that must be symmetric PD fails its Cholesky."""


def chol_factor(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric PD matrix.

    Raises NotPositiveDefiniteError instead of scipy's LinAlgError; no
    jitter is added.
    """
    try:
        return la.cholesky(A, lower=True, check_finite=False)
    except la.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc


def chol_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A x = B given the lower Cholesky factor L of A."""
    return la.cho_solve((L, True), B, check_finite=False)


def chol_logdet(L: np.ndarray) -> float:
    """log det A from its lower Cholesky factor."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def chol_inverse(L: np.ndarray) -> np.ndarray:
    """Full inverse of A from its lower Cholesky factor (symmetrized)."""
    Ainv = chol_solve(L, np.eye(L.shape[0]))
    return 0.5 * (Ainv + Ainv.T)


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)
