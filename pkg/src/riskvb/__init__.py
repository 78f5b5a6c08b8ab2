"""Risk-sensitive variational Bayes for the data-driven newsvendor.

Fits gamma-family posteriors to exponential demand under an inverse-gamma
prior -- plain, loss-calibrated, or tilted by an arbitrary risk transform --
measures them against an exact-posterior quadrature oracle, evaluates
finite-sample optimality-gap bounds, and reproduces the quantile-vs-bound
experiment protocol.
"""

__version__ = "0.1.0"

from .bayes import (
    DemandDataset,
    GammaPrior,
    InverseGammaPrior,
    PosteriorOracle,
    bayes_decision,
    build_posterior_oracle,
    log_joint,
    log_likelihood,
    log_prior,
    logexp_risk,
    posterior_risk,
    sample_demand,
    size_biased_risk,
)
from .bounds import (
    BoundConstants,
    c9,
    combined_gap_bound,
    decision_gap_bound,
    epsilon_sq,
    eta_log_bound,
    kappa_sq,
    value_gap_bound,
)
from .experiments import (
    ComparisonRow,
    ExperimentConfig,
    MethodSpec,
    RunRecord,
    compare_with_bounds,
    default_config,
    emit_csv,
    quantile_gap,
    run_path,
    run_sweep,
)
from .newsvendor import (
    DecisionInterval,
    NewsvendorParams,
    growth_constants,
    loss,
    model_risk,
    risk_transform,
    true_optimal_decision,
)
from .special_math import QuadratureGrid, digamma, integrate, legendre_grid, ln_gamma, trigamma
from .variational import (
    FitResult,
    OptimizerConfig,
    RiskSpec,
    VariationalGamma,
    decide,
    elbo,
    entropy,
    expected_log_model_risk,
    expected_model_risk,
    fit_lcvb,
    fit_nvb,
    fit_q_given_a,
    fit_rsvb,
    gamma_expectations,
    rsvb_objective,
)
