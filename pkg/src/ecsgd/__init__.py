"""Error-feedback view of SGD variants: one update skeleton, many algorithms.

Delayed, compressed, mini-batch, and local SGD all maintain a perturbed
iterate x_t and an error vector e_t whose difference, the virtual iterate
x_t - e_t, performs plain SGD steps. This package simulates the variants
through that shared skeleton, audits the per-step inequalities their
convergence analysis rests on, and measures convergence rates at desk scale.
"""

from .errors import (
    ConfigurationError,
    DegenerateDesignError,
    DivergenceError,
    InvalidComparisonError,
    InvalidParameterError,
    RateFitError,
)
from .numerics import RngStream, RunningStats, gaussian_vector, vector
from .objectives import (
    LeastSquares,
    NonconvexRadial,
    Quadratic,
    StarConvex1d,
    make_least_squares,
    make_nonconvex_radial,
    make_quadratic,
    make_star_convex_1d,
)
from .oracles import (
    GradientOracle,
    NoiseAuditReport,
    additive_noise_oracle,
    audit_noise,
    deterministic_oracle,
    finite_sum_oracle,
    sample,
    strong_growth_oracle,
)
from .compressors import (
    Identity,
    RandCoordinate,
    RandDrop,
    TopK,
    compress,
    declared_delta,
    estimate_delta,
)
from .schedules import (
    StepsizeSchedule,
    WeightSchedule,
    WeightedAverage,
    constant_stepsize,
    exponential_weights,
    inverse_time_stepsize,
    is_tau_slow_decreasing,
    is_tau_slow_increasing,
    linear_weights,
    make_preset_schedules,
    theorem_kappa,
    tune_constant_stepsize,
    tune_constant_stepsize_strongly_convex,
    uniform_weights,
    weighted_average,
)
from .engine import (
    AlgorithmSpec,
    RunState,
    direct_minibatch_reference,
    initial_state,
    make_run_rngs,
    run,
    step,
)
from .analysis import (
    EnsembleSummary,
    Trajectory,
    delay_robustness_report,
    fit_loglog_slope,
    fit_rate_slope,
    summarize,
    variance_reduction_report,
)
from .audits import (
    AUDIT_SUITES,
    audit_compressor_contract,
    audit_descent_nonconvex,
    audit_descent_quasiconvex,
    audit_dsgd_error_bound,
    audit_ecsgd_error_bound,
    audit_local_dispersion_bound,
    run_audit_suite,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DegenerateDesignError",
    "DivergenceError",
    "InvalidComparisonError",
    "InvalidParameterError",
    "RateFitError",
    "RngStream",
    "RunningStats",
    "gaussian_vector",
    "vector",
    "LeastSquares",
    "NonconvexRadial",
    "Quadratic",
    "StarConvex1d",
    "make_least_squares",
    "make_nonconvex_radial",
    "make_quadratic",
    "make_star_convex_1d",
    "GradientOracle",
    "NoiseAuditReport",
    "additive_noise_oracle",
    "audit_noise",
    "deterministic_oracle",
    "finite_sum_oracle",
    "sample",
    "strong_growth_oracle",
    "Identity",
    "RandCoordinate",
    "RandDrop",
    "TopK",
    "compress",
    "declared_delta",
    "estimate_delta",
    "StepsizeSchedule",
    "WeightSchedule",
    "WeightedAverage",
    "constant_stepsize",
    "exponential_weights",
    "inverse_time_stepsize",
    "is_tau_slow_decreasing",
    "is_tau_slow_increasing",
    "linear_weights",
    "make_preset_schedules",
    "theorem_kappa",
    "tune_constant_stepsize",
    "tune_constant_stepsize_strongly_convex",
    "uniform_weights",
    "weighted_average",
    "AlgorithmSpec",
    "RunState",
    "direct_minibatch_reference",
    "initial_state",
    "make_run_rngs",
    "run",
    "step",
    "EnsembleSummary",
    "Trajectory",
    "delay_robustness_report",
    "fit_loglog_slope",
    "fit_rate_slope",
    "summarize",
    "variance_reduction_report",
    "AUDIT_SUITES",
    "audit_compressor_contract",
    "audit_descent_nonconvex",
    "audit_descent_quasiconvex",
    "audit_dsgd_error_bound",
    "audit_ecsgd_error_bound",
    "audit_local_dispersion_bound",
    "run_audit_suite",
    "__version__",
]
