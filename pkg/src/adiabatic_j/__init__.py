"""Adiabatic-limit construction of solutions to the J-equation on product tori."""

__version__ = "0.1.0"

from .adiabatic import ExpansionState, base_solve, expand, normalize, realize, residual_order_study
from .config import ExperimentConfig
from .estimator import AdiabaticJSolver
from .exceptions import (
    AdiabaticError,
    ConfigError,
    GridMismatch,
    NoConvergence,
    NonZeroFiberMean,
    NonZeroMean,
    NotNormalized,
    NotPositive,
    NotRelativelyKahler,
    OrderTooHigh,
    PositivityBreakdown,
    SingularLeadingBlock,
)
from .forms import FormField, ddbar, j_constant, trace
from .grid import Grid4
from .jlinear import LinearProblem, apply_F, solve_F
from .jnef import c1_constant, converse_expansion_check, slope_audit
from .newton import estimate_inverse_norm, j_residual, linearize, newton_solve
from .series import EpsSeries, invert_adiabatic_metric, linearized_trace_series, trace_series

__all__ = [
    "AdiabaticError", "AdiabaticJSolver", "ConfigError", "EpsSeries", "ExpansionState",
    "ExperimentConfig", "FormField", "Grid4", "GridMismatch", "LinearProblem", "NoConvergence",
    "NonZeroFiberMean", "NonZeroMean", "NotNormalized", "NotPositive", "NotRelativelyKahler",
    "OrderTooHigh", "PositivityBreakdown", "SingularLeadingBlock", "apply_F", "base_solve",
    "c1_constant", "converse_expansion_check", "ddbar", "estimate_inverse_norm", "expand",
    "invert_adiabatic_metric", "j_constant", "j_residual", "linearize", "linearized_trace_series",
    "newton_solve", "normalize", "realize", "residual_order_study", "slope_audit", "solve_F",
    "trace", "trace_series",
]
