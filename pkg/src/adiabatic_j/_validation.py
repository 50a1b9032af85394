"""Input checks shared by the estimator facade and the CLI."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ConfigError
from .forms import FormField


def check_order(r, max_order=6):
    if not isinstance(r, numbers.Integral) or isinstance(r, bool) or not 0 <= r <= max_order:
        raise ConfigError(f"order must be an integer in 0..{max_order}, got {r!r}")
    return int(r)


def check_k(k):
    """A positive finite scalar ``k`` or a 1-D array of them."""
    arr = np.asarray(k, dtype=float)
    if arr.ndim > 1 or not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ConfigError(f"k must be positive and finite, got {k!r}")
    return arr


def check_tol(tol, name="tol"):
    if not isinstance(tol, numbers.Real) or not tol > 0:
        raise ConfigError(f"{name} must be a positive number, got {tol!r}")
    return float(tol)


def check_form(omega, dim=2, name="form"):
    if not isinstance(omega, FormField):
        raise ConfigError(f"{name} must be a FormField, got {type(omega).__name__}")
    if omega.dim != dim:
        raise ConfigError(f"{name} must have {dim}x{dim} coefficients")
    return omega


def check_base_form(omega_B, base_shape):
    arr = np.asarray(omega_B, dtype=float)
    if arr.shape != tuple(base_shape):
        raise ConfigError(f"omega_B has shape {arr.shape}, expected {tuple(base_shape)}")
    return arr
