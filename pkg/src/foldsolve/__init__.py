"""foldsolve: multi-penalty sparse recovery under noise folding.

Recovers an s-sparse signal u and a dense noise component v from
y = A (u + v) + xi by minimizing

    0.5*||A(u+v) - y||^2 + (alpha/q)*||u||_q^q + (beta/2)*||v||^2,

with three interchangeable solvers (alternating minimization, an augmented
single-penalty reduction, and an infimal-convolution reduction), contraction
constants for the two reductions, and benchmark experiment drivers.
"""

__version__ = "0.1.0"

from .augmented import (
    AugmentedOperator,
    CoherenceReport,
    OperatorBounds,
    build_augmented,
    coherence,
    coherence_report,
    operator_bounds,
    v_of_u,
)
from .linalg import (
    ProblemInstance,
    SvdFactors,
    compute_svd,
    min_singular_on_support,
    spectral_norm,
)
from .prox import (
    ThresholdProfile,
    infconv_value_and_argmin,
    lq_power_sum,
    prox_half_closed,
    prox_infconv_g,
    prox_lq,
    prox_lq_scalar,
    prox_moreau,
    threshold_profile,
)
from .rates import (
    AlphaRange,
    RateBound,
    RipEstimate,
    UndefinedRateError,
    alpha_star_augmented,
    alpha_star_infconv,
    empirical_rate,
    rate_augmented,
    rate_infconv,
    rip_bruteforce,
    rip_gaussian_order,
)
from .solvers import (
    SOLVER_CLASSES,
    AlternatingMinimization,
    AugmentedThresholding,
    InfimalConvolution,
    IterationTrace,
    am_prox_step,
    augmented_objective,
    fit_reference,
    infconv_objective,
    kkt_residual_augmented,
    kkt_residual_infconv,
    multipenalty_objective,
)
from .experiments import (
    ExperimentSpec,
    MatrixEnsemble,
    NoiseSpec,
    RunRecord,
    TuningResult,
    gen_matrix,
    gen_sparse_signal,
    make_problem,
    run_experiment,
    tune_alpha_for_support,
)

__all__ = [
    "__version__",
    # linalg
    "SvdFactors", "ProblemInstance", "compute_svd", "spectral_norm",
    "min_singular_on_support",
    # prox
    "ThresholdProfile", "threshold_profile", "prox_lq", "prox_lq_scalar",
    "prox_half_closed", "prox_moreau", "prox_infconv_g",
    "infconv_value_and_argmin", "lq_power_sum",
    # augmented
    "AugmentedOperator", "OperatorBounds", "CoherenceReport",
    "build_augmented", "v_of_u", "operator_bounds", "coherence",
    "coherence_report",
    # solvers
    "AlternatingMinimization", "AugmentedThresholding", "InfimalConvolution",
    "SOLVER_CLASSES", "IterationTrace", "multipenalty_objective",
    "augmented_objective", "infconv_objective", "am_prox_step",
    "kkt_residual_augmented", "kkt_residual_infconv", "fit_reference",
    # rates
    "RateBound", "AlphaRange", "RipEstimate", "UndefinedRateError",
    "rate_augmented", "alpha_star_augmented", "rate_infconv",
    "alpha_star_infconv", "rip_bruteforce", "rip_gaussian_order",
    "empirical_rate",
    # experiments
    "MatrixEnsemble", "NoiseSpec", "TuningResult", "ExperimentSpec",
    "RunRecord", "gen_matrix", "gen_sparse_signal", "make_problem",
    "tune_alpha_for_support", "run_experiment",
]
