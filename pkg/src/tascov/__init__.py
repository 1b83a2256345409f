"""Multi-target linear shrinkage covariance estimation and benchmarking."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ConvergenceFailure,
    DegenerateDenominator,
    DegenerateInput,
    DimensionMismatch,
    DomainError,
    EmptyInput,
    InconsistentTable,
    InsufficientSamples,
    NotPositiveDefinite,
    ParseError,
    TascovError,
)
from .estimator import (  # noqa: F401
    AlphaGrid,
    IwParams,
    PosteriorTable,
    TasEstimate,
    bayes_factor_curve,
    empirical_bayes_alpha,
    log_marginal_likelihood,
    posterior_grid,
    reparametrise,
    reparametrise_inverse,
    sts_estimate,
    tas_estimate,
)
from .targets import (  # noqa: F401
    DataMatrix,
    ShrinkageTarget,
    TargetSet,
    build_default_target_set,
    build_target,
    external_target,
    sample_covariance,
    target_distance_matrix,
)
