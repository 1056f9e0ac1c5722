"""Heteroskedastic probit estimation with plateau diagnostics."""
from .dgp import (
    PRESETS,
    DgpConfig,
    SimulatedDataset,
    SimulationError,
    inverse_transform,
    inverse_transform_point,
    preset,
    simulate,
    simulate_het,
    simulate_probit,
    transform,
    transform_point,
)
from .harness import (
    MultiStartConfig,
    MultiStartReport,
    ProfileGrid,
    compare_transformed,
    plateau_detect,
    profile_grid,
    run_multistart,
    stability_check,
    stability_summary,
    two_stage_fit,
)
from .model import (
    Dataset,
    DimensionError,
    InputError,
    LikelihoodEval,
    ParamVector,
    benchmark_value,
    crossover_fraction,
    gradient,
    log_likelihood,
    plateau_approximation,
)
from .optimize import OptimizerSpec, OptimResult, SannSettings, likelihood_objective, maximize

__version__ = "0.1.0"
