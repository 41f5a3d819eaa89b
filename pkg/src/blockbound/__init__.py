"""Circular block bootstrap confidence bounds on time-series forecasting risk."""

__version__ = "0.1.0"

from .bootstrap import BoundResult, CbbPlan, block_length, cbb_resample, gen_error_bound
from .core import (
    BlockBoundError,
    ChunkMatrix,
    DegenerateDesignError,
    DimensionError,
    InputError,
    RngStream,
    Series,
    SpecError,
    embed,
    empirical_quantile,
)
from .crossval import FoldAssignment, cv_normality_samples, kfold_cv_risk
from .dgp import (
    ArArchSpec,
    ArmaSpec,
    MarkovSwitchSpec,
    Regime,
    simulate,
    simulate_ar_arch,
    simulate_arma,
    simulate_markov_switching,
)
from .harness import (
    CoverageReport,
    coverage_experiment,
    coverage_sweep,
    oracle_risk,
    qq_data,
    sampling_distribution_eta,
)
from .model import ArModel, RiskEstimate, empirical_risk, fit_ar, loss
