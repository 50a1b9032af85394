"""Vertical/horizontal splitting and fiber integration on the product model.

The vertical bundle is spanned by ``d/dw``; the horizontal line is the
``omega_X``-orthogonal complement, spanned by ``e_H = d/dz - lam d/dw`` with
``lam = g_{z wbar} / g_{w wbar}``.  Base fields and base (1,1)-forms are plain
arrays of shape ``(n_base, n_base)``; a base form is its single real
coefficient against ``i dz ^ dzbar``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NotRelativelyKahler
from .forms import POSITIVITY_THRESHOLD, FormField

FIBER_AXES = (0, 1)


def _require_relatively_kahler(omega_X):
    g = omega_X.ww
    idx = np.unravel_index(np.argmin(g), g.shape)
    if g[idx] <= POSITIVITY_THRESHOLD:
        raise NotRelativelyKahler(float(g[idx]), idx)


@dataclass(frozen=True)
class Splitting:
    """Horizontal frame coefficient ``lam`` derived from ``omega_X``."""

    lam: np.ndarray
    source: FormField

    @classmethod
    def of(cls, omega_X):
        _require_relatively_kahler(omega_X)
        return cls(omega_X.zw / omega_X.ww, omega_X)

    def frame(self):
        """Rows are the frame vectors ``(d/dw, e_H)`` in coordinates ``(w, z)``."""
        one = np.ones_like(self.lam)
        zero = np.zeros_like(self.lam)
        return np.stack([np.stack([one, zero]), np.stack([-self.lam, one])])

    def orthogonality_defect(self):
        g = self.source
        return float(np.abs(g.zw - self.lam * g.ww).max())


@dataclass(frozen=True)
class SplitForm:
    """Frame components of a (1,1)-form: vertical, mixed and horizontal."""

    chi_V: np.ndarray
    chi_m: np.ndarray
    chi_H: np.ndarray
    splitting: Splitting

    def reassemble(self):
        lam = self.splitting.lam
        # inverse frame change: X = E^-1 X' E^-dagger with E^-1 = [[1, 0], [lam, 1]]
        ww = self.chi_V
        wz = self.chi_m + np.conj(lam) * self.chi_V
        zz = (
            self.chi_H
            + lam * self.chi_m
            + np.conj(lam) * np.conj(self.chi_m)
            + np.abs(lam) ** 2 * self.chi_V
        )
        return FormField.from_components(ww, wz, zz.real)


def split(chi, omega_X):
    """Decompose ``chi`` into vertical, mixed and horizontal frame components."""
    s = Splitting.of(omega_X)
    lam = s.lam
    chi_V = chi.ww
    chi_m = chi.wz - np.conj(lam) * chi.ww
    chi_H = chi.zz - 2.0 * np.real(lam * chi.wz) + np.abs(lam) ** 2 * chi.ww
    return SplitForm(chi_V, chi_m, chi_H, s)


def fiber_volume(omega_X):
    """``V_b`` at every base point."""
    return omega_X.ww.mean(axis=FIBER_AXES)


def fiber_pushforward(f, omega_X):
    """Fiber average of ``f`` against the fiber volume form of ``omega_X``."""
    g = omega_X.ww
    return (np.asarray(f) * g).mean(axis=FIBER_AXES) / g.mean(axis=FIBER_AXES)


def lift(base_field, shape):
    return np.broadcast_to(np.asarray(base_field), shape).copy()


def vertical_decompose(f, omega_X):
    """Split ``f = f_B + f_V`` with ``f_B`` the fiber average; returns ``(f_B, f_V)``."""
    f = np.asarray(f)
    f_B = fiber_pushforward(f, omega_X)
    return f_B, f - lift(f_B, f.shape)


def push_chi_H(chi, omega_X):
    """Base form obtained by averaging the horizontal part of ``chi`` over fibers."""
    return np.real(fiber_pushforward(split(chi, omega_X).chi_H, omega_X))


def fiber_constant_cb(chi, omega_X):
    """Per-fiber J-constant ``c_b = int chi_b / int omega_b``.

    Returns ``(mean over base points, max deviation across base points)``.
    """
    _require_relatively_kahler(omega_X)
    cb = chi.ww.mean(axis=FIBER_AXES) / omega_X.ww.mean(axis=FIBER_AXES)
    mean = float(cb.mean())
    return mean, float(np.abs(cb - mean).max())


def base_positivity_margin(base_form):
    base_form = np.asarray(base_form)
    idx = np.unravel_index(np.argmin(base_form), base_form.shape)
    return float(base_form[idx]), idx


def lambda_V(chi, omega_X):
    """Vertical trace ``chi_V / (omega_X)_V``."""
    return chi.ww / omega_X.ww


def lambda_B(alpha, omega_X, omega_B):
    """Horizontal trace of ``alpha`` against the pulled-back base form ``omega_B``."""
    chi_H = split(alpha, omega_X).chi_H
    return np.real(chi_H) / lift(omega_B, chi_H.shape)
