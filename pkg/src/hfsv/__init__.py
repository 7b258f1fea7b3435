"""Bayesian stochastic volatility for high-frequency prices with microstructure noise.

Simulation, scale-coherent prior elicitation, Gibbs/filter-sampler posterior
inference, integrated-variance estimation with frequentist baselines, and
the desk-scale coverage and level-uncertainty studies.
"""

from .errors import (
    ConfigError,
    DomainError,
    ElicitationError,
    FilterError,
    GridError,
    HfsvError,
    IngestError,
)
from .estimators import (
    IntervalEstimate,
    kernel_realized_variance,
    posterior_iv,
    realized_variance,
    stationary_bootstrap_ci,
)
from .mcmc import ChainOutput, McmcConfig, run_chain
from .model import (
    ContinuousParams,
    DiscreteParams,
    InitialConditions,
    continuize,
    discretize,
    stationary_logvol,
)
from .priors import ContinuousPriorMoments, DiscretePriorSpec, elicit
from .simulate import (
    MicrostructureSpec,
    ObservedSeries,
    PathSample,
    apply_microstructure,
    simulate_path,
    subsample,
    true_integrated_variance,
)
from .ssm import LOG_CHI2_MIXTURE, LinearGaussianSSM, MixtureTable

__version__ = "0.1.0"

__all__ = [
    "HfsvError",
    "ConfigError",
    "DomainError",
    "GridError",
    "ElicitationError",
    "FilterError",
    "IngestError",
    "ContinuousParams",
    "DiscreteParams",
    "InitialConditions",
    "discretize",
    "continuize",
    "stationary_logvol",
    "MicrostructureSpec",
    "PathSample",
    "ObservedSeries",
    "simulate_path",
    "apply_microstructure",
    "subsample",
    "true_integrated_variance",
    "ContinuousPriorMoments",
    "DiscretePriorSpec",
    "elicit",
    "LinearGaussianSSM",
    "MixtureTable",
    "LOG_CHI2_MIXTURE",
    "McmcConfig",
    "ChainOutput",
    "run_chain",
    "IntervalEstimate",
    "posterior_iv",
    "realized_variance",
    "kernel_realized_variance",
    "stationary_bootstrap_ci",
    "__version__",
]
