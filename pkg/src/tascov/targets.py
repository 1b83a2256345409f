"""Shrinkage target construction and validation.

The default target set consists of nine matrices built from the sample
covariance ``S``: every combination of a variance profile (unit, common,
unequal) with a correlation profile (zero, constant ``r̄``, decaying
``r̄^|i−j|``), where ``r̄`` is the average off-diagonal sample correlation.
Targets derived from auxiliary data are regularised through the multi-target
shrinkage estimator before use, so they are always positive definite and
well-conditioned.
"""

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import DegenerateInput, DimensionMismatch, NotPositiveDefinite

CANONICAL_KINDS = ("T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8", "T9")

# Constant-correlation matrices are PD iff r̄ ∈ (−1/(p−1), 1); AR(1) decay
# is PD iff |r̄| < 1. Clamp margins keep repaired targets strictly inside.
_CORR_MARGIN = 1e-6
_ZERO_VARIANCE_FLOOR = 1e-3  # times the mean variance, for zero-variance rows


class DegenerateDataWarning(UserWarning):
    """Data contain zero-variance variables; correlation targets repaired."""


class TargetRepairWarning(UserWarning):
    """A target was repaired or excluded to preserve positive definiteness."""


@dataclass(frozen=True)
class DataMatrix:
    """p variables × n samples of real observations."""

    entries: np.ndarray
    centered: bool = False
    variable_labels: tuple | None = None

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2:
            raise DimensionMismatch(f"expected a 2-d array, got {entries.ndim}-d")
        object.__setattr__(self, "entries", entries)
        if self.p < 1 or self.n < 1:
            raise DegenerateInput(f"need p >= 1 and n >= 1, got p={self.p}, n={self.n}")
        if self.variable_labels is not None and len(self.variable_labels) != self.p:
            raise DimensionMismatch("variable_labels length does not match p")

    @property
    def p(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    def center(self):
        """Return a copy with each variable's sample mean subtracted."""
        centered = self.entries - self.entries.mean(axis=1, keepdims=True)
        return DataMatrix(centered, centered=True, variable_labels=self.variable_labels)


@dataclass(frozen=True)
class ShrinkageTarget:
    """A labeled, PD-validated shrinkage target matrix."""

    label: str
    matrix: np.ndarray
    provenance: str

    def __post_init__(self):
        matrix = linalg.symmetrize(self.matrix)
        linalg.cholesky(matrix)  # PD gate; raises NotPositiveDefinite
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self):
        return self.matrix.shape[0]


@dataclass(frozen=True)
class TargetSet:
    """Ordered collection of shrinkage targets sharing one dimension."""

    targets: tuple = field(default_factory=tuple)

    def __post_init__(self):
        targets = tuple(self.targets)
        if not targets:
            raise DegenerateInput("a target set needs at least one target")
        dims = {t.dim for t in targets}
        if len(dims) != 1:
            raise DimensionMismatch(f"targets have mixed dimensions: {sorted(dims)}")
        labels = [t.label for t in targets]
        if len(set(labels)) != len(labels):
            raise DegenerateInput(f"duplicate target labels: {labels}")
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return len(self.targets)

    def __iter__(self):
        return iter(self.targets)

    @property
    def dim(self):
        return self.targets[0].dim

    @property
    def labels(self):
        return [t.label for t in self.targets]

    def with_target(self, target):
        """Return a new set extended by one target."""
        return TargetSet(self.targets + (target,))


def sample_covariance(x, center=False):
    """Sample covariance S = XXᵀ/n (divisor n), optionally mean-centering.

    A zero-variance variable triggers a ``DegenerateDataWarning``;
    correlation-based targets built from such an S are repaired downstream.
    """
    if x.n < 2:
        raise DegenerateInput(f"sample covariance needs n >= 2, got n={x.n}")
    if center and not x.centered:
        x = x.center()
    s = x.entries @ x.entries.T / x.n
    s = linalg.symmetrize(s)
    if np.any(np.diag(s) <= 0.0):
        warnings.warn(
            "sample covariance has zero-variance variables; "
            "correlation-based targets will be repaired",
            DegenerateDataWarning,
            stacklevel=2,
        )
    return s


def mean_correlation(s):
    """Average of the p(p−1)/2 off-diagonal sample correlations of ``s``.

    Pairs involving a zero-variance variable contribute 0. Returns 0.0 for
    p = 1 (no pairs).
    """
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    if p == 1:
        return 0.0
    d = np.diag(s).copy()
    ok = d > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = np.sqrt(np.outer(d, d))
        r = np.where(np.outer(ok, ok), s / denom, 0.0)
    iu = np.triu_indices(p, k=1)
    return float(np.mean(r[iu]))


def _variance_profile(kind, s):
    p = s.shape[0]
    d = np.diag(s).copy()
    family = int(kind[1]) % 3  # 1 → unit, 2 → common, 0 → unequal
    if family == 1:
        return np.ones(p)
    s_bar = float(np.mean(d))
    if s_bar <= 0.0:
        raise DegenerateInput("all variables have zero variance")
    if family == 2:
        return np.full(p, s_bar)
    if np.any(d <= 0.0):
        warnings.warn(
            f"{kind}: zero-variance diagonal entries replaced by "
            f"{_ZERO_VARIANCE_FLOOR} * mean variance to preserve PD",
            DegenerateDataWarning,
            stacklevel=3,
        )
        d = np.where(d > 0.0, d, s_bar * _ZERO_VARIANCE_FLOOR)
    return d


def _correlation_profile(kind, s):
    p = s.shape[0]
    idx = int(kind[1])
    if idx <= 3:
        return np.eye(p)
    r_bar = mean_correlation(s)
    if idx <= 6:
        # Constant correlation: PD iff r̄ ∈ (−1/(p−1), 1).
        limit = (1.0 - _CORR_MARGIN) / (p - 1) if p > 1 else 1.0 - _CORR_MARGIN
        if p > 1 and not (-1.0 / (p - 1) < r_bar < 1.0):
            repaired = float(np.sign(r_bar) * min(abs(r_bar), limit))
            warnings.warn(
                f"{kind}: mean correlation {r_bar:.6g} outside the PD range; "
                f"repaired to {repaired:.6g}",
                TargetRepairWarning,
                stacklevel=3,
            )
            r_bar = repaired
        return np.where(np.eye(p, dtype=bool), 1.0, r_bar)
    # Decaying correlations r̄^|i−j|: PD iff |r̄| < 1.
    if abs(r_bar) > 1.0 - _CORR_MARGIN:
        repaired = float(np.sign(r_bar) * (1.0 - _CORR_MARGIN))
        warnings.warn(
            f"{kind}: mean correlation {r_bar:.6g} clamped to {repaired:.6g}",
            TargetRepairWarning,
            stacklevel=3,
        )
        r_bar = repaired
    lag = np.abs(np.subtract.outer(np.arange(p), np.arange(p)))
    return r_bar ** lag


def build_target(kind, s):
    """Construct canonical target ``kind`` (one of T1..T9) from S.

    The target is T = V^{1/2} R V^{1/2} and is validated positive definite;
    ``NotPositiveDefinite`` propagates if repair was exhausted.
    """
    if kind not in CANONICAL_KINDS:
        raise DegenerateInput(f"unknown target kind {kind!r}")
    s = np.asarray(s, dtype=float)
    v = _variance_profile(kind, s)
    r = _correlation_profile(kind, s)
    root_v = np.sqrt(v)
    matrix = np.outer(root_v, root_v) * r
    return ShrinkageTarget(label=kind, matrix=matrix, provenance=f"canonical:{kind}")


def build_default_target_set(s, kinds=CANONICAL_KINDS):
    """The canonical targets in order, each PD-validated.

    Targets that cannot be made PD are excluded with a warning; the returned
    set may therefore have fewer members than requested.
    """
    targets = []
    for kind in kinds:
        try:
            targets.append(build_target(kind, s))
        except (NotPositiveDefinite, DegenerateInput) as exc:
            warnings.warn(
                f"target {kind} excluded: {exc}", TargetRepairWarning, stacklevel=2
            )
    return TargetSet(tuple(targets))


def external_target(aux, name, expected_dim=None, alpha_step=0.01):
    """Build a PD, well-conditioned target from auxiliary data.

    The auxiliary covariance is regularised through the multi-target
    shrinkage estimator with the default nine targets and default intensity
    grid; the raw pooled covariance is never used directly.
    """
    from . import estimator  # deferred: estimator depends on this module

    if expected_dim is not None and aux.p != expected_dim:
        raise DimensionMismatch(
            f"auxiliary data has p={aux.p}, expected p={expected_dim}"
        )
    s_aux = sample_covariance(aux, center=not aux.centered)
    grid = estimator.AlphaGrid.equispaced(alpha_step)
    target_set = build_default_target_set(s_aux)
    table = estimator.posterior_grid(s_aux, aux.n, grid, target_set)
    estimate = estimator.tas_estimate(table, s_aux, target_set)
    return ShrinkageTarget(
        label=f"ext:{name}",
        matrix=estimate.sigma_hat,
        provenance=f"external:{name}",
    )


def target_distance_matrix(target_set, extra=None):
    """Pairwise Frobenius distances between targets (and optional extras).

    Parameters
    ----------
    target_set : TargetSet
    extra : list of (label, matrix), optional
        Additional rows/columns, e.g. the sample covariance or a known truth.

    Returns
    -------
    (labels, dist) where ``dist[a, b] = ‖M_a − M_b‖_F``.
    """
    items = [(t.label, t.matrix) for t in target_set]
    if extra:
        items.extend((label, np.asarray(m, dtype=float)) for label, m in extra)
    labels = [label for label, _ in items]
    mats = [m for _, m in items]
    dims = {m.shape for m in mats}
    if len(dims) != 1:
        raise DimensionMismatch(f"mixed matrix shapes: {sorted(dims)}")
    k = len(mats)
    dist = np.zeros((k, k))
    for i in range(k):
        for j in range(i + 1, k):
            d = np.sqrt(linalg.frobenius_dist_sq(mats[i], mats[j]))
            dist[i, j] = dist[j, i] = d
    return labels, dist


def target_to_csv(target, path, variable_labels=None):
    """Write a target as a headered square CSV matrix."""
    labels = list(variable_labels) if variable_labels else [
        f"v{i + 1}" for i in range(target.dim)
    ]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(labels)
        for row in target.matrix:
            writer.writerow([f"{value:.17g}" for value in row])


def target_descriptor(target):
    """JSON-serialisable descriptor of a target."""
    return {"label": target.label, "provenance": target.provenance, "dim": target.dim}


def target_descriptor_json(target, path):
    with open(path, "w") as handle:
        json.dump(target_descriptor(target), handle, indent=2)
        handle.write("\n")
