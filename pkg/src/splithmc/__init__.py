"""Hamiltonian Monte Carlo with pluggable splitting-scheme integrators.

The package bundles four reversible, volume-preserving integration
schemes, plain HMC and a No-U-Turn sampler that work with any of them, an
exact efficiency analysis on the standard Gaussian model problem, target
models for benchmarking (logistic regression, student-t with AR(1)
precision), effective-sample-size diagnostics, and a CLI harness that
writes CSV tables and figures.
"""

from .core import (
    GradientCounter,
    PhasePoint,
    TargetModel,
    accept_probability,
    sample_momentum,
    total_energy,
)
from .diagnostics import EssSummary, UndefinedEssError, autocovariance, ess, summarize
from .gaussian import (
    EfficiencyPoint,
    EnergyErrorMoments,
    IndependencePoint,
    NoIndependencePointError,
    PropagationMatrix,
    asymptotic_acceptance,
    best_efficiency,
    default_dimension_grid,
    efficiency_curves,
    efficiency_point,
    energy_error_moments,
    independence_step_size,
    matrix_power,
    propagation_matrix,
    write_efficiency_curves,
)
from .integrators import Scheme, SchemeCoefficients, coefficients, integrate, step
from .models import (
    Dataset,
    DatasetFormatError,
    LogisticRegressionModel,
    StdGaussianModel,
    StudentTModel,
    ar1_precision,
    load_dataset,
    standardize_design,
)
from .samplers import (
    ChainOutput,
    DualAveraging,
    HmcConfig,
    NutsConfig,
    NutsDraw,
    StepSizeSearchError,
    find_reasonable_epsilon,
    hmc_iteration,
    nuts_draw,
    run_chain,
)

__version__ = "0.1.0"
