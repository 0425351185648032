"""Dense-matrix helpers with explicit numerical-hygiene policies.

Every covariance that moves through the filters in this package is funneled
through these routines, so symmetry enforcement, semidefinite checks, and
jitter escalation behave identically everywhere. The routines are
dimension-generic even though the shipped model is two-dimensional.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NumericsError",
    "DimensionError",
    "FactorizationError",
    "InversionError",
    "symmetrize",
    "cholesky_psd",
    "sym_inverse",
    "is_psd",
]

SYMMETRY_TOL = 1e-10
JITTER_CAP = 1e-4


class NumericsError(Exception):
    """A matrix operation failed numerically."""


class DimensionError(NumericsError):
    """Input does not have the required shape."""


class FactorizationError(NumericsError):
    """A factorization could not be completed."""


class InversionError(NumericsError):
    """A matrix could not be inverted."""


def _as_square(m, name="matrix"):
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    return a


def _require_symmetric(a, exc, name):
    scale = max(1.0, float(np.abs(a).max())) if a.size else 1.0
    skew = float(np.abs(a - a.T).max()) if a.size else 0.0
    if skew > SYMMETRY_TOL * scale:
        raise exc(f"{name} is not symmetric (max asymmetry {skew:.3e})")


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Average a square matrix with its transpose.

    Idempotent to the last bit: applying it twice returns the same floats.
    """
    a = _as_square(m)
    return 0.5 * (a + a.T)


def _psd_factor_attempt(a):
    """Lower-triangular factor of a PSD matrix, or None on a negative pivot.

    Standard left-looking Cholesky with one twist: pivots within roundoff of
    zero produce an all-zero column instead of failing, so exactly singular
    but semidefinite inputs (including the zero matrix) factor cleanly. The
    caller decides via a reconstruction check whether the zeroed columns
    were legitimate.
    """
    n = a.shape[0]
    lower = np.zeros_like(a)
    pivot_tol = n * np.finfo(float).eps * max(1.0, float(np.abs(np.diag(a)).max()))
    for j in range(n):
        d = a[j, j] - lower[j, :j] @ lower[j, :j]
        if d < -pivot_tol:
            return None
        if d <= pivot_tol:
            continue
        lower[j, j] = np.sqrt(d)
        if j + 1 < n:
            lower[j + 1:, j] = (a[j + 1:, j] - lower[j + 1:, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def _jitter_ladder(jitter):
    yield 0.0
    step = jitter
    while 0.0 < step <= JITTER_CAP:
        yield step
        step *= 10.0


def cholesky_psd(m: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Lower-triangular L with L @ L.T == M + j*I for the smallest workable j.

    j runs over {0, jitter, 10*jitter, ...} capped at 1e-4. Semidefinite
    inputs are accepted: singular directions come back as zero columns. A
    factorization only counts if it reproduces its target to within
    1e-8 * (1 + max|M|).
    """
    a = _as_square(m, "cholesky input")
    _require_symmetric(a, FactorizationError, "cholesky input")
    if jitter < 0.0:
        raise ValueError("jitter must be nonnegative")
    recon_tol = 1e-8 * (1.0 + (float(np.abs(a).max()) if a.size else 0.0))
    eye = np.eye(a.shape[0])
    for j in _jitter_ladder(jitter):
        target = a if j == 0.0 else a + j * eye
        lower = _psd_factor_attempt(target)
        if lower is None:
            continue
        if not a.size or float(np.abs(lower @ lower.T - target).max()) <= recon_tol:
            return lower
    worst = float(np.linalg.eigvalsh(symmetrize(a)).min()) if a.size else 0.0
    raise FactorizationError(
        f"matrix is not positive semidefinite within the jitter cap {JITTER_CAP:g}; "
        f"most negative eigenvalue ~ {worst:.6g}"
    )


def sym_inverse(m: np.ndarray) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix, symmetrized on exit."""
    a = _as_square(m, "inverse input")
    _require_symmetric(a, InversionError, "inverse input")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise InversionError("matrix is singular or not positive definite") from exc
    return symmetrize(np.linalg.inv(a))


def is_psd(m: np.ndarray, tol: float = 1e-8) -> bool:
    """Whether the smallest eigenvalue of (M + M.T)/2 is >= -tol."""
    a = _as_square(m, "psd input")
    if not a.size:
        return True
    return bool(np.linalg.eigvalsh(symmetrize(a)).min() >= -tol)
