"""Adaptive variable selection for sparse additive signals in Gaussian sequence models."""

__version__ = "0.1.0"

from .ellipsoids import (
    ExtremalProfile,
    FunctionSpace,
    SpaceKind,
    bandwidth,
    c_sigma,
    invert_u,
    oracle_extremal,
    semi_axis,
    solve_extremal,
    u_asymptotic,
    u_exact,
)
from .errors import DimensionError, DomainError
from .risk_lab import ExperimentSpec, RiskReport, SelectorKind, bayes_lower_bound, mc_risk, phase_sweep, tail_check
from .selectors import (
    Grid,
    SelectorConfig,
    SelectionResult,
    adaptive_exact_select,
    almost_full_select,
    build_grid,
    default_config,
    default_schedules,
    exact_select,
    lepski_select,
    r_star_almost_full,
    r_star_exact,
    t_statistic,
)
from .signal_model import SignMode, embed_signal, sample_observations, sample_pattern
