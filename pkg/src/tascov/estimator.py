"""Multi-target linear shrinkage estimation of a covariance matrix.

The model places an inverse-Wishart prior on the covariance, parametrised by
a shrinkage intensity ``alpha`` and a target matrix so that the prior mean
equals the target. With discrete uniform hyper-priors over an intensity grid
and a target set, the posterior mean of the covariance is a convex
combination of the targets and the sample covariance, with weights obtained
from closed-form marginal likelihoods. All likelihood arithmetic is in log
space; determinants go through Cholesky factors only.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DomainError, InconsistentTable

DEFAULT_ALPHA_STEP = 0.01


@dataclass(frozen=True)
class AlphaGrid:
    """Strictly increasing shrinkage intensities inside (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size == 0:
            raise DomainError("alpha grid must be non-empty")
        if values[0] <= 0.0 or values[-1] >= 1.0:
            raise DomainError("alpha grid values must lie in the open interval (0, 1)")
        if np.any(np.diff(values) <= 0.0):
            raise DomainError("alpha grid values must be strictly increasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.size

    @classmethod
    def equispaced(cls, step=DEFAULT_ALPHA_STEP):
        """Grid {step, 2*step, ...} strictly inside (0, 1); ``step`` must
        divide 1 into an integer count, giving 1/step − 1 points."""
        count = int(round(1.0 / step))
        if abs(count - 1.0 / step) > 1e-9 * count or count < 2:
            raise DomainError(f"step {step} does not divide 1 into an integer count")
        return cls(step * np.arange(1, count))


@dataclass(frozen=True)
class IwParams:
    """Both parametrisations of the prior, stored coherently.

    (nu, psi) = (alpha*n/(1−alpha) + p + 1, (alpha*n/(1−alpha)) * delta)
    """

    alpha: float
    delta: np.ndarray
    nu: float
    psi: np.ndarray
    n: int


def reparametrise(alpha, delta, n):
    """Map (alpha, delta) to the scale/degrees-of-freedom parametrisation."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    delta = np.asarray(delta, dtype=float)
    p = delta.shape[0]
    rate = alpha * n / (1.0 - alpha)
    return IwParams(alpha=alpha, delta=delta, nu=rate + p + 1, psi=rate * delta, n=n)


def reparametrise_inverse(nu, psi, n):
    """Recover (alpha, delta) from (nu, psi); inverse of :func:`reparametrise`."""
    psi = np.asarray(psi, dtype=float)
    p = psi.shape[0]
    rate = nu - p - 1
    if rate <= 0.0:
        raise DomainError(f"nu must exceed p + 1, got nu={nu}, p={p}")
    alpha = rate / (n + rate)
    return IwParams(alpha=alpha, delta=psi / rate, nu=nu, psi=psi, n=n)


def _target_matrix(delta):
    return delta.matrix if hasattr(delta, "matrix") else np.asarray(delta, dtype=float)


def log_marginal_likelihood(s, n, alpha, delta, _log_det_delta=None):
    """Closed-form log p(X | alpha, delta), depending on X only via (S, n).

    log p = −(np/2) log(nπ)
            + log Γ_p((n/(1−α)+p+1)/2) − log Γ_p((αn/(1−α)+p+1)/2)
            + ((αn/(1−α)+p+1)/2) [p log(α/(1−α)) + log|Δ|]
            − ((n/(1−α)+p+1)/2) log|S + (α/(1−α))Δ|
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    if n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    s = np.asarray(s, dtype=float)
    delta = _target_matrix(delta)
    p = s.shape[0]
    ratio = alpha / (1.0 - alpha)
    half_prior = (alpha * n / (1.0 - alpha) + p + 1) / 2.0
    half_post = (n / (1.0 - alpha) + p + 1) / 2.0
    log_det_delta = (
        linalg.log_det(delta) if _log_det_delta is None else _log_det_delta
    )
    log_det_post = linalg.log_det(s + ratio * delta)
    return (
        -(n * p / 2.0) * np.log(n * np.pi)
        + linalg.mv_log_gamma(half_post, p)
        - linalg.mv_log_gamma(half_prior, p)
        + half_prior * (p * np.log(ratio) + log_det_delta)
        - half_post * log_det_post
    )


@dataclass(frozen=True)
class PosteriorTable:
    """K×L log marginal likelihoods and normalised posterior probabilities."""

    alpha_grid: AlphaGrid
    target_labels: tuple
    log_ml: np.ndarray
    post_prob: np.ndarray

    def __post_init__(self):
        for name in ("log_ml", "post_prob"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        k, ell = self.log_ml.shape
        if (k, ell) != (len(self.alpha_grid), len(self.target_labels)):
            raise InconsistentTable("table shape does not match grid and labels")
        total = float(np.sum(self.post_prob))
        if abs(total - 1.0) > linalg.POSTERIOR_NORMALIZATION_TOL:
            raise InconsistentTable(f"posterior probabilities sum to {total}")


def _validate_prior(weights, size, what):
    if weights is None:
        return np.full(size, 1.0 / size)
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.size != size:
        raise InconsistentTable(f"{what} prior has wrong length")
    if np.any(weights < 0.0) or abs(float(np.sum(weights)) - 1.0) > 1e-12:
        raise DomainError(f"{what} prior must be non-negative and sum to 1")
    return weights


def posterior_grid(s, n, grid, target_set, alpha_prior=None, target_prior=None):
    """Evaluate the K×L marginal-likelihood grid and normalise it.

    Cells are independent; normalisation happens once at the end, so results
    do not depend on evaluation order. Uniform priors cancel; non-uniform
    priors are accepted as weight vectors summing to one.
    """
    s = np.asarray(s, dtype=float)
    alphas = grid.values
    k, ell = len(grid), len(target_set)
    alpha_prior = _validate_prior(alpha_prior, k, "alpha")
    target_prior = _validate_prior(target_prior, ell, "target")
    log_ml = np.empty((k, ell))
    for j, target in enumerate(target_set):
        delta = target.matrix
        log_det_delta = linalg.log_det(delta)
        for i, alpha in enumerate(alphas):
            log_ml[i, j] = log_marginal_likelihood(
                s, n, alpha, delta, _log_det_delta=log_det_delta
            )
    with np.errstate(divide="ignore"):
        log_post = log_ml + np.log(alpha_prior)[:, None] + np.log(target_prior)[None, :]
    log_norm = linalg.log_sum_exp(log_post)
    post_prob = np.exp(log_post - log_norm)
    post_prob /= np.sum(post_prob)  # remove residual rounding in the normaliser
    return PosteriorTable(
        alpha_grid=grid,
        target_labels=tuple(target_set.labels),
        log_ml=log_ml,
        post_prob=post_prob,
    )


@dataclass(frozen=True)
class TasEstimate:
    """Posterior-mean covariance with its convex-combination weights."""

    sigma_hat: np.ndarray
    target_labels: tuple
    target_weights: np.ndarray
    sample_weight: float
    table: PosteriorTable


def tas_estimate(table, s, target_set):
    """Posterior-mean estimate from a posterior table.

    The per-target weight is w_l = Σ_k a_k p(a_k, D_l | X) and the estimate
    is Σ_l w_l D_l + (1 − Σ_l w_l) S.
    """
    s = np.asarray(s, dtype=float)
    if tuple(target_set.labels) != tuple(table.target_labels):
        raise InconsistentTable(
            f"table targets {table.target_labels} do not match set {target_set.labels}"
        )
    if s.shape != (target_set.dim, target_set.dim):
        raise InconsistentTable(
            f"S has shape {s.shape} but targets have dim {target_set.dim}"
        )
    alphas = table.alpha_grid.values
    weights = alphas @ table.post_prob
    sample_weight = 1.0 - float(np.sum(weights))
    sigma_hat = sample_weight * s
    for w, target in zip(weights, target_set):
        sigma_hat = sigma_hat + w * target.matrix
    return TasEstimate(
        sigma_hat=linalg.symmetrize(sigma_hat),
        target_labels=tuple(target_set.labels),
        target_weights=weights,
        sample_weight=sample_weight,
        table=table,
    )


def sts_estimate(s, delta, alpha):
    """Single-target shrinkage: alpha * delta + (1 − alpha) * S."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    s = np.asarray(s, dtype=float)
    return linalg.symmetrize(alpha * _target_matrix(delta) + (1.0 - alpha) * s)


def empirical_bayes_alpha(s, n, delta, grid):
    """Grid argmax of the marginal likelihood for a fixed target.

    Ties are broken toward the smaller alpha.
    """
    delta = _target_matrix(delta)
    log_det_delta = linalg.log_det(delta)
    log_mls = np.array(
        [
            log_marginal_likelihood(s, n, alpha, delta, _log_det_delta=log_det_delta)
            for alpha in grid.values
        ]
    )
    best = int(np.argmax(log_mls))  # argmax takes the first (smallest alpha) on ties
    return float(grid.values[best]), float(log_mls[best])


def bayes_factor_curve(s, n, delta, grid):
    """BF(alpha) = p(X | alpha*, delta) / p(X | alpha, delta) over the grid.

    Equals 1 at the empirical-Bayes alpha* and is >= 1 everywhere.
    """
    delta = _target_matrix(delta)
    log_det_delta = linalg.log_det(delta)
    log_mls = np.array(
        [
            log_marginal_likelihood(s, n, alpha, delta, _log_det_delta=log_det_delta)
            for alpha in grid.values
        ]
    )
    best = float(np.max(log_mls))
    with np.errstate(over="ignore"):  # far-from-optimal intensities overflow to inf
        return [
            (float(a), float(np.exp(best - lm))) for a, lm in zip(grid.values, log_mls)
        ]
