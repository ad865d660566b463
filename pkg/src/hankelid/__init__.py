"""MIMO FIR system identification with stable-Hankel Gaussian priors.

The package estimates matrix impulse responses from input/output data by
combining a smoothness/stability (stable-spline) prior with a prior that
penalizes the energy of the block Hankel matrix outside an estimated
low-dimensional signal subspace.  Hyper-parameters are tuned by marginal
likelihood maximization with a scaled gradient projection optimizer, and a
benchmarking harness compares the method against spline-only and
nuclear-norm baselines on Monte-Carlo scenarios.
"""

from .baselines import CvGrid, cross_validate, nn_admm, nn_estimate, ss_estimate
from .bayes import (
    MarglikProblem,
    NoiseModel,
    estimate_noise_variance,
    marglik_gradient,
    marglik_objective,
    marglik_value_and_gradient,
    neg_log_marglik,
    posterior_mean,
)
from .benchmark import (
    MetricsReport,
    ScenarioSpec,
    StateSpace,
    cod,
    fit_metric,
    gen_random_system,
    gen_scenario_run,
    gen_scenario_s1,
    lowpass_input,
    make_estimators,
    run_monte_carlo,
    s1_system,
    scenario_spec,
    sv_errors,
)
from .identify import (
    IdentConfig,
    IdentResult,
    fit_spline_hyperparams,
    identify,
    svd_split,
)
from .kernels import (
    KernelSystem,
    LambdaVec,
    SplineHyper,
    SubspaceBasis,
    build_kernel_system,
    combined_precision,
    hankel_precisions,
    q_matrix,
    spline_precision,
    tc_kernel,
)
from .linalg import NotPositiveDefiniteError
from .model import (
    Dataset,
    HankelDims,
    ImpulseResponse,
    OutputStack,
    WeightPair,
    build_hankel,
    build_regressor,
    build_weights,
    hankel_dims,
    hankel_permutation,
    read_dataset_csv,
    stack_outputs,
    weighted_hankel,
    write_dataset_csv,
)
from .sgp import (
    SgpParams,
    SgpResult,
    bb_steplength,
    project_positive,
    scaling_matrix,
    sgp_minimize,
)

__version__ = "0.1.0"

__all__ = [
    "CvGrid",
    "Dataset",
    "HankelDims",
    "IdentConfig",
    "IdentResult",
    "ImpulseResponse",
    "KernelSystem",
    "LambdaVec",
    "MarglikProblem",
    "MetricsReport",
    "NoiseModel",
    "NotPositiveDefiniteError",
    "OutputStack",
    "ScenarioSpec",
    "SgpParams",
    "SgpResult",
    "SplineHyper",
    "StateSpace",
    "SubspaceBasis",
    "WeightPair",
    "bb_steplength",
    "build_hankel",
    "build_kernel_system",
    "build_regressor",
    "build_weights",
    "cod",
    "combined_precision",
    "cross_validate",
    "estimate_noise_variance",
    "fit_metric",
    "fit_spline_hyperparams",
    "gen_random_system",
    "gen_scenario_run",
    "gen_scenario_s1",
    "hankel_dims",
    "hankel_permutation",
    "hankel_precisions",
    "identify",
    "lowpass_input",
    "make_estimators",
    "marglik_gradient",
    "marglik_objective",
    "marglik_value_and_gradient",
    "neg_log_marglik",
    "nn_admm",
    "nn_estimate",
    "posterior_mean",
    "project_positive",
    "q_matrix",
    "read_dataset_csv",
    "run_monte_carlo",
    "s1_system",
    "scaling_matrix",
    "scenario_spec",
    "sgp_minimize",
    "spline_precision",
    "ss_estimate",
    "stack_outputs",
    "sv_errors",
    "svd_split",
    "tc_kernel",
    "weighted_hankel",
    "write_dataset_csv",
]
