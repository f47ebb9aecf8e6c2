"""Finite-particle kernel transport: dynamics, discrepancies, experiments."""

from .dynamics import (
    BlowUpError,
    SchedulePlan,
    Trajectory,
    discrete_step,
    drift_norm_bound,
    drift_phi,
    integrate_continuous,
    jacobian_hs_bound,
    lyapunov_f,
    restricted_init,
    run_discrete,
    schedule,
    svgd_map_T,
)
from .harness import (
    EXPERIMENT_KINDS,
    ExperimentResult,
    RateFit,
    derive_seed,
    fit_loglog,
    median_bandwidth,
    run_experiment,
)
from .kernels import BilinearMaternKernel, GaussianKernel, MaternKernel, kernel_from_config
from .potentials import (
    DiagonalGaussian,
    GaussianMixture,
    IsotropicGaussian,
    potential_from_config,
)
from .stein import (
    KSDReport,
    TimeAveragedSample,
    c_star,
    c_star_sup,
    ksd_over_trajectory,
    ksd_squared,
    pair_pool,
    stein_kernel_u,
    time_average,
    w2_rate_exponent,
)
from .transport import CouplingResult, subsample, wasserstein_1d, wasserstein_assign

__version__ = "0.1.0"

__all__ = [
    "BilinearMaternKernel",
    "BlowUpError",
    "CouplingResult",
    "DiagonalGaussian",
    "EXPERIMENT_KINDS",
    "ExperimentResult",
    "GaussianKernel",
    "GaussianMixture",
    "IsotropicGaussian",
    "KSDReport",
    "MaternKernel",
    "RateFit",
    "SchedulePlan",
    "TimeAveragedSample",
    "Trajectory",
    "c_star",
    "c_star_sup",
    "derive_seed",
    "discrete_step",
    "drift_norm_bound",
    "drift_phi",
    "fit_loglog",
    "integrate_continuous",
    "jacobian_hs_bound",
    "kernel_from_config",
    "ksd_over_trajectory",
    "ksd_squared",
    "lyapunov_f",
    "median_bandwidth",
    "pair_pool",
    "potential_from_config",
    "restricted_init",
    "run_discrete",
    "run_experiment",
    "schedule",
    "stein_kernel_u",
    "subsample",
    "svgd_map_T",
    "time_average",
    "w2_rate_exponent",
    "wasserstein_1d",
    "wasserstein_assign",
]
