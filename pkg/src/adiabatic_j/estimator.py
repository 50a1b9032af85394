"""scikit-learn style facade over the normalize / expand / Newton pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _validation as v
from .adiabatic import expand, normalize, realize, residual_order_study
from .config import ExperimentConfig
from .newton import newton_solve


class AdiabaticJSolver(BaseEstimator):
    """Approximate and exact solutions of the J-equation in the adiabatic limit.

    Parameters
    ----------
    order : int
        Expansion order ``r``.
    tol : float
        Sup-norm residual target for :meth:`solve`.
    max_iter : int
        Newton iteration cap.
    normalize_input : bool
        Run the fiberwise and base normalization in :meth:`fit`.  When false
        the input must already be normalized.

    Examples
    --------
    >>> solver = AdiabaticJSolver(order=2).fit(config)        # doctest: +SKIP
    >>> solver.predict([16, 32])                               # doctest: +SKIP
    """

    def __init__(self, order=2, tol=1e-9, max_iter=12, normalize_input=True):
        self.order = order
        self.tol = tol
        self.max_iter = max_iter
        self.normalize_input = normalize_input

    def fit(self, X, y=None):
        """Normalize and expand.

        ``X`` is an :class:`ExperimentConfig`, a config dict, or a tuple
        ``(chi, omega_X, omega_B)``.  ``y`` is ignored.
        """
        order = v.check_order(self.order)
        v.check_tol(self.tol)
        chi, omega_X, omega_B = self._unpack(X)
        if self.normalize_input:
            omega_X, omega_B, rep = normalize(omega_X, chi, omega_B)
            self.normalize_report_ = rep.as_dict()
        else:
            self.normalize_report_ = None
        self.chi_ = chi
        self.omega_X_ = omega_X
        self.omega_B_ = omega_B
        self.state_ = expand(chi, omega_X, omega_B, order)
        self.constants_ = np.array(self.state_.constants)
        self.k_min_ = self.state_.k_min
        return self

    @staticmethod
    def _unpack(X):
        if isinstance(X, dict):
            X = ExperimentConfig.from_dict(X)
        if isinstance(X, ExperimentConfig):
            return X.chi(), X.omega_X(), X.omega_B()
        try:
            chi, omega_X, omega_B = X
        except (TypeError, ValueError):
            raise TypeError("X must be a config or a (chi, omega_X, omega_B) tuple") from None
        v.check_form(chi, name="chi")
        v.check_form(omega_X, name="omega_X")
        return chi, omega_X, v.check_base_form(omega_B, omega_X.field_shape[2:])

    def predict(self, k):
        """``sum_i c_i k^-i`` for each requested ``k``."""
        check_is_fitted(self, "state_")
        k = v.check_k(k)
        powers = np.power.outer(k, -np.arange(len(self.constants_), dtype=float))
        return powers @ self.constants_

    def realize(self, k):
        """The approximate solution ``omega_{k,r}``."""
        check_is_fitted(self, "state_")
        return realize(self.state_, float(v.check_k(k)))

    def solve(self, k, init_order=None):
        """Newton completion at ``k``; returns ``(omega, SolveReport)``."""
        check_is_fitted(self, "state_")
        state = self.state_ if init_order is None else self.state_.truncate(v.check_order(init_order))
        return newton_solve(realize(state, float(v.check_k(k))), self.chi_, tol=self.tol,
                            maxiter=self.max_iter, k=float(k))

    def residual_study(self, k_list, order=None):
        check_is_fitted(self, "state_")
        state = self.state_ if order is None else self.state_.truncate(v.check_order(order))
        return residual_order_study(state, v.check_k(k_list))
