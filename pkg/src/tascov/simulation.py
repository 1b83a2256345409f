"""Ground-truth generators, samplers, PRIAL scoring and evaluation protocols.

Repetition m of any experiment uses an RNG substream derived from the master
seed via ``SeedSequence(seed, spawn_key=(m,))``, so runs are bit-reproducible
and repetitions could be executed in any order (or in parallel) without
changing results.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import estimator, linalg, targets
from .errors import (
    DegenerateDenominator,
    DomainError,
    InsufficientSamples,
    TascovError,
)

SCENARIO_IDS = ("S1", "S2", "S3", "S4")


def substream(seed, m):
    """Deterministic RNG for repetition ``m`` of an experiment seeded with
    ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(m,)))


@dataclass(frozen=True)
class ScenarioSpec:
    """One of the four synthetic covariance structures.

    S1: common variance, zero correlation (scale * I).
    S2: unit variance, constant correlation.
    S3: unequal variances U(var_range), decaying correlations decay^|i−j|.
    S4: unit variance, block-diagonal constant correlation, drawn from an
        inverse-Wishart centred on that block structure.
    """

    id: str
    p: int
    scale: float = 5.0
    corr: float = 0.3
    decay: float = -0.7
    var_range: tuple = (1.0, 5.0)
    block_corr: float = 0.3
    iw_alpha: float = 0.5

    def __post_init__(self):
        if self.id not in SCENARIO_IDS:
            raise DomainError(f"unknown scenario {self.id!r}")
        if self.p < 1:
            raise DomainError("p must be positive")
        if self.id == "S4" and self.p % 2 != 0:
            raise DomainError("scenario S4 needs an even p (two p/2 blocks)")
        if not 0.0 < self.iw_alpha < 1.0:
            raise DomainError("iw_alpha must be in (0, 1)")

    @property
    def is_random(self):
        """True when the ground-truth covariance is redrawn per repetition."""
        return self.id in ("S3", "S4")


def mvn_sample(sigma, n, rng):
    """Draw n columns from N(0, sigma) via the Cholesky factor of sigma."""
    factor = linalg.cholesky(np.asarray(sigma, dtype=float))
    z = rng.standard_normal((factor.dim, n))
    return targets.DataMatrix(factor.lower @ z, centered=False)


def inv_wishart_sample(alpha, delta, n_ref, rng):
    """One draw with prior mean ``delta`` and concentration set by ``alpha``.

    Uses the Bartlett decomposition of the matching Wishart and inverts the
    draw through triangular solves, so the result is PD by construction.
    """
    params = estimator.reparametrise(alpha, delta, n_ref)
    p = params.delta.shape[0]
    if params.nu <= p + 1:
        raise DomainError(f"need nu > p + 1 for a finite mean, got nu={params.nu}")
    psi_factor = linalg.cholesky(params.psi)
    # Bartlett factor: T_ii^2 ~ chi^2(nu - i), strict lower triangle ~ N(0,1).
    t = np.zeros((p, p))
    df = params.nu - np.arange(p)
    t[np.diag_indices(p)] = np.sqrt(rng.chisquare(df))
    t[np.tril_indices(p, k=-1)] = rng.standard_normal(p * (p - 1) // 2)
    # W = (L^-T T)(L^-T T)^T ~ Wishart(nu, Psi^-1), so W^-1 = M^T M with
    # M = T^-1 L^T, computed by a triangular solve.
    m = scipy.linalg.solve_triangular(
        t, psi_factor.lower.T, lower=True, check_finite=False
    )
    return linalg.symmetrize(m.T @ m)


def _block_constant_correlation(p, corr):
    half = p // 2
    block = np.where(np.eye(half, dtype=bool), 1.0, corr)
    return scipy.linalg.block_diag(block, block)


def scenario_sigma(spec, rng, n_ref=None):
    """Ground-truth covariance for one repetition of a scenario.

    S1 and S2 are deterministic; S3 and S4 consume randomness. S4 needs
    ``n_ref`` (the experiment's sample size) to set its concentration.
    """
    p = spec.p
    if spec.id == "S1":
        return spec.scale * np.eye(p)
    if spec.id == "S2":
        return np.where(np.eye(p, dtype=bool), 1.0, spec.corr)
    if spec.id == "S3":
        lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
        c = spec.decay ** lag
        d = rng.uniform(spec.var_range[0], spec.var_range[1], size=p)
        root = np.sqrt(d)
        return linalg.symmetrize(np.outer(root, root) * c)
    if n_ref is None:
        raise DomainError("scenario S4 needs n_ref for its concentration")
    b = _block_constant_correlation(p, spec.block_corr)
    return inv_wishart_sample(spec.iw_alpha, b, n_ref, rng)


def prial_from_losses(loss_sample, loss_estimator):
    """Percentage relative improvement in average squared-Frobenius loss."""
    loss_sample = np.asarray(loss_sample, dtype=float)
    loss_estimator = np.asarray(loss_estimator, dtype=float)
    denom = float(np.sum(loss_sample))
    if denom <= 0.0:
        raise DegenerateDenominator("sample covariance loss is zero in every run")
    return (denom - float(np.sum(loss_estimator))) / denom * 100.0


def prial(sigma_true, runs):
    """PRIAL over runs of (sample covariance, estimate) pairs against one
    fixed ground truth."""
    sigma_true = np.asarray(sigma_true, dtype=float)
    loss_s = [linalg.frobenius_dist_sq(sigma_true, s_m) for s_m, _ in runs]
    loss_hat = [linalg.frobenius_dist_sq(sigma_true, hat_m) for _, hat_m in runs]
    return prial_from_losses(loss_s, loss_hat)


@dataclass(frozen=True)
class TasConfig:
    """Multi-target estimator configuration."""

    label: str = "TAS"
    kinds: tuple = targets.CANONICAL_KINDS
    alpha_step: float = estimator.DEFAULT_ALPHA_STEP


@dataclass(frozen=True)
class StsConfig:
    """Single-target estimator with a fixed intensity or empirical-Bayes
    ("eb") intensity selection on the grid."""

    label: str
    kind: str
    alpha: float | str = "eb"
    alpha_step: float = estimator.DEFAULT_ALPHA_STEP


@dataclass(frozen=True)
class PluginConfig:
    """Externally supplied estimator: ``fn(s, n) -> covariance matrix``."""

    label: str
    fn: object


def default_estimator_configs(include_sts=True):
    """TAS plus, optionally, the nine single-target estimators."""
    configs = [TasConfig()]
    if include_sts:
        configs.extend(
            StsConfig(label=f"ST{kind[1]}", kind=kind)
            for kind in targets.CANONICAL_KINDS
        )
    return configs


@dataclass(frozen=True)
class PrialReport:
    """Self-verifying benchmark result.

    ``losses[label]`` holds the per-repetition pairs
    (‖Σ−S‖²_F, ‖Σ−Σ̂‖²_F), so the reported PRIAL can be recomputed.
    ``weights[label]`` holds, for multi-target estimators, the M×L matrix of
    per-repetition target weights plus the residual sample weight column.
    """

    estimator_labels: tuple
    prial: dict
    losses: dict
    weights: dict
    weight_labels: dict
    reps: int
    rng_seed: int
    config: dict = field(default_factory=dict)

    def verify(self, tol=1e-10):
        """Recompute every PRIAL from the stored losses."""
        for label in self.estimator_labels:
            pairs = np.asarray(self.losses[label], dtype=float)
            recomputed = prial_from_losses(pairs[:, 0], pairs[:, 1])
            if abs(recomputed - self.prial[label]) > tol:
                return False
        return True


def _fit_estimators(s, n, configs):
    """Fit every configured estimator on one (S, n).

    Returns (estimates, weight_rows, weight_labels). A multi-target grid is
    evaluated once and reused for empirical-Bayes single-target estimators
    whose target and step match it.
    """
    estimates = {}
    weight_rows = {}
    weight_labels = {}
    target_cache = {}

    def canonical_set(kinds):
        if kinds not in target_cache:
            target_cache[kinds] = targets.build_default_target_set(s, kinds=kinds)
        return target_cache[kinds]

    tables = {}
    for config in configs:
        if isinstance(config, TasConfig):
            target_set = canonical_set(config.kinds)
            grid = estimator.AlphaGrid.equispaced(config.alpha_step)
            table = estimator.posterior_grid(s, n, grid, target_set)
            fit = estimator.tas_estimate(table, s, target_set)
            estimates[config.label] = fit.sigma_hat
            weight_rows[config.label] = np.append(
                fit.target_weights, fit.sample_weight
            )
            weight_labels[config.label] = list(fit.target_labels) + ["S"]
            tables[config.alpha_step] = table
    for config in configs:
        if isinstance(config, StsConfig):
            target = targets.build_target(config.kind, s)
            if config.alpha == "eb":
                table = tables.get(config.alpha_step)
                if table is not None and config.kind in table.target_labels:
                    column = table.log_ml[:, table.target_labels.index(config.kind)]
                    alpha = float(table.alpha_grid.values[int(np.argmax(column))])
                else:
                    grid = estimator.AlphaGrid.equispaced(config.alpha_step)
                    alpha, _ = estimator.empirical_bayes_alpha(s, n, target, grid)
            else:
                alpha = float(config.alpha)
            estimates[config.label] = estimator.sts_estimate(s, target, alpha)
        elif isinstance(config, PluginConfig):
            estimates[config.label] = np.asarray(config.fn(s, n), dtype=float)
    return estimates, weight_rows, weight_labels


def _accumulate(report_losses, report_weights, sigma, s, estimates, weight_rows):
    for label, sigma_hat in estimates.items():
        report_losses.setdefault(label, []).append(
            (
                linalg.frobenius_dist_sq(sigma, s),
                linalg.frobenius_dist_sq(sigma, sigma_hat),
            )
        )
    for label, row in weight_rows.items():
        report_weights.setdefault(label, []).append(row)


def _build_report(labels, losses, weights, weight_labels, reps, seed, config):
    prials = {
        label: prial_from_losses(
            [pair[0] for pair in losses[label]], [pair[1] for pair in losses[label]]
        )
        for label in labels
    }
    weights = {label: np.asarray(rows) for label, rows in weights.items()}
    return PrialReport(
        estimator_labels=tuple(labels),
        prial=prials,
        losses={label: list(pairs) for label, pairs in losses.items()},
        weights=weights,
        weight_labels=weight_labels,
        reps=reps,
        rng_seed=seed,
        config=config,
    )


def run_model_simulation(spec, n, reps, configs=None, seed=0, fresh_sigma=None):
    """Model-based benchmark: draw data from a scenario, fit estimators,
    score PRIAL, and collect per-repetition multi-target weights.

    ``fresh_sigma`` controls whether the ground truth is redrawn per
    repetition; it defaults to the scenario's natural behaviour (fresh for
    the random scenarios, fixed otherwise).
    """
    configs = default_estimator_configs() if configs is None else configs
    if fresh_sigma is None:
        fresh_sigma = spec.is_random
    fixed_sigma = None
    if not fresh_sigma:
        fixed_sigma = scenario_sigma(spec, substream(seed, 2 ** 31), n_ref=n)
    losses, weights, weight_labels_all = {}, {}, {}
    for m in range(reps):
        rng = substream(seed, m)
        try:
            sigma = (
                scenario_sigma(spec, rng, n_ref=n) if fresh_sigma else fixed_sigma
            )
            x = mvn_sample(sigma, n, rng)
            s = targets.sample_covariance(x, center=False)
            estimates, weight_rows, weight_labels = _fit_estimators(s, n, configs)
        except TascovError as exc:
            raise type(exc)(
                f"repetition {m} (seed {seed}) failed: {exc}"
            ) from exc
        _accumulate(losses, weights, sigma, s, estimates, weight_rows)
        weight_labels_all.update(weight_labels)
    config = {
        "protocol": "model_simulation",
        "scenario": spec.id,
        "p": spec.p,
        "n": n,
        "reps": reps,
        "fresh_sigma": fresh_sigma,
    }
    return _build_report(
        list(losses), losses, weights, weight_labels_all, reps, seed, config
    )


def data_partition_run(full, n_small, reps, configs=None, seed=0, center=True):
    """Partition-based benchmark on real data.

    Each repetition splits the columns of ``full`` into a small fitting part
    and a large held-out part whose sample covariance serves as the proxy
    ground truth.
    """
    configs = default_estimator_configs(include_sts=False) if configs is None else configs
    n_total = full.n
    if not 2 <= n_small < n_total:
        raise InsufficientSamples(
            f"need 2 <= n_small < N, got n_small={n_small}, N={n_total}"
        )
    if n_total - n_small < full.p:
        warnings.warn(
            f"held-out part has {n_total - n_small} samples for p={full.p}; "
            "the proxy truth will be singular",
            UserWarning,
            stacklevel=2,
        )
    losses, weights, weight_labels_all = {}, {}, {}
    for m in range(reps):
        rng = substream(seed, m)
        order = rng.permutation(n_total)
        small = targets.DataMatrix(
            full.entries[:, order[:n_small]], variable_labels=full.variable_labels
        )
        large = targets.DataMatrix(
            full.entries[:, order[n_small:]], variable_labels=full.variable_labels
        )
        proxy = targets.sample_covariance(large, center=center)
        s = targets.sample_covariance(small, center=center)
        estimates, weight_rows, weight_labels = _fit_estimators(s, small.n, configs)
        _accumulate(losses, weights, proxy, s, estimates, weight_rows)
        weight_labels_all.update(weight_labels)
    config = {
        "protocol": "data_partition",
        "p": full.p,
        "N": n_total,
        "n_small": n_small,
        "reps": reps,
        "center": center,
    }
    return _build_report(
        list(losses), losses, weights, weight_labels_all, reps, seed, config
    )


def _resolve_n(rule, p):
    if isinstance(rule, (int, np.integer)):
        return int(rule)
    text = str(rule).replace(" ", "")
    if text == "p":
        return p
    if text.endswith("p") and not text.startswith("p"):
        return int(round(float(text[:-1]) * p))
    if text.startswith("p/"):
        return max(1, int(round(p / float(text[2:]))))
    raise DomainError(f"cannot interpret sample-size rule {rule!r}")


def mle_diagnostics(p_list, n_rules=("10p", "2p", "p", "p/2"), reps=100, seed=0):
    """Error and conditioning of the raw sample covariance when the truth is
    the identity.

    The mean is estimated from the data (as in practice), so S has rank at
    most n − 1 and is singular whenever n <= p. Returns one row per (p, n):
    mean squared-Frobenius error, mean condition number over the nonsingular
    repetitions (None when all are singular), and the fraction of
    repetitions flagged singular. A repetition is singular when the smallest
    eigenvalue is at most p * machine-epsilon * largest eigenvalue.
    """
    rows = []
    eps = np.finfo(float).eps
    stream = 0
    for p in p_list:
        sigma = np.eye(p)
        for rule in n_rules:
            n = _resolve_n(rule, p)
            errors, conds, singular = [], [], 0
            for m in range(reps):
                rng = substream(seed, stream * reps + m)
                x = mvn_sample(sigma, n, rng)
                s = targets.sample_covariance(x, center=True)
                errors.append(linalg.frobenius_dist_sq(sigma, s))
                eigenvalues = linalg.sym_eigenvalues(s)
                lo, hi = eigenvalues[-1], eigenvalues[0]
                if lo <= p * eps * hi:
                    singular += 1
                else:
                    conds.append(hi / lo)
            stream += 1
            rows.append(
                {
                    "p": p,
                    "n": n,
                    "n_rule": str(rule),
                    "mean_frobenius_error_sq": float(np.mean(errors)),
                    "mean_condition_number": float(np.mean(conds)) if conds else None,
                    "singular_fraction": singular / reps,
                }
            )
    return rows


def grid_cardinality_study(
    d_list, reps=100, seed=0, p=100, n=25, scale=4.0, kinds=targets.CANONICAL_KINDS
):
    """Stability of the multi-target estimate across intensity-grid steps.

    Each repetition draws one data set from N(0, scale * I) and re-estimates
    the covariance for every grid step in ``d_list``, so all steps see the
    same data. Returns one row per step with its grid cardinality and PRIAL.
    """
    d_list = list(d_list)
    sigma = scale * np.eye(p)
    grids = {d: estimator.AlphaGrid.equispaced(d) for d in d_list}
    loss_s = []
    loss_hat = {d: [] for d in d_list}
    for m in range(reps):
        rng = substream(seed, m)
        x = mvn_sample(sigma, n, rng)
        s = targets.sample_covariance(x, center=False)
        target_set = targets.build_default_target_set(s, kinds=kinds)
        loss_s.append(linalg.frobenius_dist_sq(sigma, s))
        for d, grid in grids.items():
            table = estimator.posterior_grid(s, n, grid, target_set)
            fit = estimator.tas_estimate(table, s, target_set)
            loss_hat[d].append(linalg.frobenius_dist_sq(sigma, fit.sigma_hat))
    return [
        {
            "d": d,
            "cardinality": len(grids[d]),
            "prial": prial_from_losses(loss_s, loss_hat[d]),
        }
        for d in d_list
    ]
