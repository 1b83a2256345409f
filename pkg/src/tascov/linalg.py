"""Dense symmetric linear-algebra primitives with log-space safety.

All matrices are plain ``numpy`` arrays of shape ``(p, p)``. Symmetry is
enforced structurally through :func:`symmetrize`, which mirrors the lower
triangle so that ``m[i, j] == m[j, i]`` holds exactly. Determinants are only
ever computed through Cholesky factors, never by explicit expansion, because
the likelihood exponents in this package scale with ``n * p``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    DomainError,
    EmptyInput,
    NotPositiveDefinite,
)

# Numerical tolerances, fixed package-wide.
CHOLESKY_RECONSTRUCTION_TOL = 1e-10  # times p * max|entry|
EIGENVALUE_TRACE_TOL = 1e-8          # times p * max|entry|
POSTERIOR_NORMALIZATION_TOL = 1e-12
ROUTE_EQUIVALENCE_TOL = 1e-10
CENTERING_TOL = 1e-8                 # times n * max|entry|


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with strictly positive diagonal, m = L Lᵀ."""

    dim: int
    lower: np.ndarray


def symmetrize(m):
    """Return a copy of ``m`` with the lower triangle mirrored above the
    diagonal, making symmetry exact."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    out = np.tril(m) + np.tril(m, -1).T
    return out


def cholesky(m):
    """Lower Cholesky factor of a symmetric positive definite matrix.

    Raises
    ------
    NotPositiveDefinite
        If a pivot is non-positive. This is the package-wide PD test: a
        matrix is positive definite iff this function succeeds.
    """
    m = np.asarray(m, dtype=float)
    try:
        lower = scipy.linalg.cholesky(m, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    if np.any(np.diag(lower) <= 0.0):
        raise NotPositiveDefinite("non-positive Cholesky pivot")
    return CholeskyFactor(dim=m.shape[0], lower=lower)


def is_positive_definite(m):
    try:
        cholesky(m)
    except NotPositiveDefinite:
        return False
    return True


def log_det(m):
    """Log determinant of a positive definite matrix via its Cholesky factor."""
    factor = m if isinstance(m, CholeskyFactor) else cholesky(m)
    return 2.0 * float(np.sum(np.log(np.diag(factor.lower))))


def mv_log_gamma(a, p):
    """Log of the multivariate gamma function Γ_p(a).

    log Γ_p(a) = (p(p−1)/4) log π + Σ_{j=1..p} log Γ(a − (j−1)/2)

    Raises ``DomainError`` when ``a <= (p − 1) / 2`` (pole of the gamma
    factors).
    """
    if p < 1:
        raise DomainError(f"p must be a positive integer, got {p}")
    if a <= (p - 1) / 2.0:
        raise DomainError(f"mv_log_gamma requires a > (p-1)/2, got a={a}, p={p}")
    j = np.arange(p)
    return p * (p - 1) / 4.0 * np.log(np.pi) + float(np.sum(gammaln(a - j / 2.0)))


def sym_eigenvalues(m):
    """All eigenvalues of a symmetric matrix, sorted descending."""
    m = np.asarray(m, dtype=float)
    try:
        vals = np.linalg.eigvalsh(m)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return vals[::-1]


def frobenius_dist_sq(a, b):
    """Squared Frobenius distance Σ_ij (a_ij − b_ij)²."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.sum(d * d))


def log_sum_exp(xs):
    """log Σ exp(x_i), stabilised by shifting by max(xs)."""
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise EmptyInput("log_sum_exp of an empty sequence")
    hi = np.max(xs)
    if np.isneginf(hi):
        return float(hi)
    return float(hi + np.log(np.sum(np.exp(xs - hi))))
