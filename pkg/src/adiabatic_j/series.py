"""Truncated power series in ``eps = 1/k`` with field coefficients.

The adiabatic metric ``g = omega_X + k omega_B + (potential terms)`` has a
``1/eps`` pole in its ``z zbar`` entry.  Scaling the second column,
``G(eps) = g diag(1, eps)``, gives a series regular at ``eps = 0`` whose leading
matrix ``[[g_{w wbar}, 0], [g_{z wbar}, omega_B]]`` is invertible whenever the
fibers are positive.  Then ``g^-1 = diag(1, eps) G^-1`` and ``G^-1`` follows from
the usual recursion for the inverse of a power series (a truncated Neumann
series around the leading matrix).
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from .exceptions import GridMismatch, NotPositive, SingularLeadingBlock
from .fibration import lift
from .forms import ddbar, herm_inv, herm_mul, herm_trace, _real_if_close
from .grid import ddbar_coefficient


class EpsSeries:
    """Truncated series ``sum_i eps^i coeffs[i]`` up to and including ``order``.

    Coefficients are scalar fields (``kind='scalar'``) or fields of 2x2
    matrices with the matrix indices first (``kind='matrix'``).  Missing
    coefficients below ``order`` are zero.
    """

    def __init__(self, coeffs, order=None, kind=None):
        coeffs = [np.asarray(c) for c in coeffs]
        if not coeffs:
            raise ValueError("at least one coefficient is required")
        self.order = len(coeffs) - 1 if order is None else int(order)
        self.kind = kind or ("scalar" if coeffs[0].ndim in (2, 4) else "matrix")
        shape = self._field_shape(coeffs[0])
        for c in coeffs:
            if self._field_shape(c) != shape:
                raise GridMismatch("series coefficients live on different grids")
        self.field_shape = shape
        zero = np.zeros_like(coeffs[0])
        self.coeffs = (coeffs + [zero] * (self.order + 1 - len(coeffs)))[: self.order + 1]

    def _field_shape(self, c):
        return c.shape if self.kind == "scalar" else c.shape[2:]

    def __getitem__(self, i):
        if i > self.order:
            raise IndexError(f"coefficient {i} beyond truncation order {self.order}")
        return self.coeffs[i]

    def __len__(self):
        return self.order + 1

    def __repr__(self):
        return f"EpsSeries(kind={self.kind!r}, order={self.order}, shape={self.field_shape})"

    def _coerce(self, other):
        if isinstance(other, EpsSeries):
            if other.field_shape != self.field_shape:
                raise GridMismatch(f"{self.field_shape} vs {other.field_shape}")
            return other
        return EpsSeries([np.broadcast_to(np.asarray(other), self.coeffs[0].shape).copy()],
                         order=self.order, kind=self.kind)

    def __add__(self, other):
        other = self._coerce(other)
        R = min(self.order, other.order)
        return EpsSeries([self[i] + other[i] for i in range(R + 1)], R, self.kind)

    __radd__ = __add__

    def __neg__(self):
        return EpsSeries([-c for c in self.coeffs], self.order, self.kind)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __mul__(self, other):
        if not isinstance(other, EpsSeries):
            if np.isscalar(other):
                return EpsSeries([c * other for c in self.coeffs], self.order, self.kind)
            other = self._coerce(other)
        if other.field_shape != self.field_shape:
            raise GridMismatch(f"{self.field_shape} vs {other.field_shape}")
        R = min(self.order, other.order)
        kind = "matrix" if "matrix" in (self.kind, other.kind) else "scalar"
        out = []
        for n in range(R + 1):
            acc = 0
            for i in range(n + 1):
                acc = acc + _prod(self[i], self.kind, other[n - i], other.kind)
            out.append(np.asarray(acc))
        return EpsSeries(out, R, kind)

    __rmul__ = __mul__

    def evaluate(self, eps):
        """Horner evaluation at a numeric ``eps``."""
        acc = self.coeffs[-1]
        for c in reversed(self.coeffs[:-1]):
            acc = c + eps * acc
        return acc

    def sup_norms(self):
        return [float(np.abs(c).max()) for c in self.coeffs]


def _prod(a, ka, b, kb):
    if ka == "matrix" and kb == "matrix":
        return herm_mul(a, b)
    if ka == "matrix":
        return a * b[None, None]
    if kb == "matrix":
        return a[None, None] * b
    return a * b


def series_arith(a, b, op):
    """``a + b`` or ``a * b`` truncated at the common order."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def identity_series(shape, order):
    eye = np.zeros((2, 2) + tuple(shape), dtype=complex)
    eye[0, 0] = eye[1, 1] = 1.0
    return EpsSeries([eye], order=order, kind="matrix")


def _zz_only(base_pot, shape):
    m = np.zeros((2, 2) + tuple(shape), dtype=complex)
    m[1, 1] = lift(ddbar_coefficient(base_pot, "z", "z").real, shape)
    return m


def metric_coefficients(omega_X, base_potentials, vertical_potentials, order):
    """Coefficients ``G_j`` of ``eps^j`` (``j >= 0``) in the adiabatic metric.

    The ``1/eps`` coefficient (``omega_B`` in the ``z zbar`` slot) is handled by
    the caller.  Base potential ``i`` enters at ``eps^(i-2)``, vertical
    potential ``i`` at ``eps^i``.
    """
    shape = omega_X.field_shape
    G = [np.zeros((2, 2) + shape, dtype=complex) for _ in range(order + 1)]
    G[0] = G[0] + omega_X.matrix
    for i, psi in base_potentials.items():
        if i < 2:
            if np.any(psi):
                raise ValueError("base potentials of index 0 and 1 must vanish")
            continue
        if i - 2 <= order:
            G[i - 2] = G[i - 2] + _zz_only(psi, shape)
    for i, phi in vertical_potentials.items():
        if i < 1:
            if np.any(phi):
                raise ValueError("the vertical potential of index 0 must vanish")
            continue
        if i <= order:
            G[i] = G[i] + ddbar(phi).matrix
    return G


def regularized_metric_series(omega_X, omega_B, base_potentials=None, vertical_potentials=None, order=2):
    """Series of ``G(eps) = g diag(1, eps)``, regular at ``eps = 0``."""
    base_potentials = dict(base_potentials or {})
    vertical_potentials = dict(vertical_potentials or {})
    shape = omega_X.field_shape
    G = metric_coefficients(omega_X, base_potentials, vertical_potentials, order)
    pole = np.zeros((2, 2) + shape, dtype=complex)
    pole[1, 1] = lift(omega_B, shape)
    Ghat = []
    for j in range(order + 1):
        m = np.empty_like(G[j])
        m[:, 0] = G[j][:, 0]
        m[:, 1] = (G[j - 1] if j > 0 else pole)[:, 1]
        Ghat.append(m)
    return EpsSeries(Ghat, order, kind="matrix")


def invert_adiabatic_metric(omega_X, omega_B, base_potentials=None, vertical_potentials=None, order=2):
    """Series of the inverse metric ``g_k^-1`` in powers of ``eps = 1/k``.

    Parameters
    ----------
    omega_X : FormField
        Relatively Kahler form.
    omega_B : ndarray, shape (n_base, n_base)
        Positive base form coefficient.
    base_potentials : mapping int -> base array
        ``phi_{i,B}`` for ``i >= 2``, multiplying ``k^(2-i)``.
    vertical_potentials : mapping int -> field
        ``phi_{i,V}`` for ``i >= 1``, multiplying ``k^-i``.
    order : int
        Truncation order ``R``.
    """
    Gs = regularized_metric_series(omega_X, omega_B, base_potentials, vertical_potentials, order)
    G0 = Gs[0]
    gv = G0[0, 0].real
    b = G0[1, 1].real
    for val, what in ((gv, "vertical block"), (b, "omega_B")):
        idx = np.unravel_index(np.argmin(val), val.shape)
        if val[idx] <= 0:
            raise NotPositive(float(val[idx]), idx, what=what)
    if np.any(gv * b == 0):
        raise SingularLeadingBlock("leading block of the regularized metric is singular")
    H0 = herm_inv(G0)
    H = [H0]
    for n in range(1, order + 1):
        acc = 0
        for j in range(1, n + 1):
            acc = acc + herm_mul(Gs[j], H[n - j])
        H.append(-herm_mul(H0, acc))
    out = []
    for n in range(order + 1):
        m = np.zeros_like(H[n])
        m[0] = H[n][0]
        if n > 0:
            m[1] = H[n - 1][1]
        out.append(m)
    return EpsSeries(out, order, kind="matrix")


def regularized_inverse_series(ginv):
    """Recover ``G(eps)^-1`` from the series of ``g^-1`` (undo the row scaling)."""
    R = ginv.order
    out = []
    for n in range(R):
        m = np.empty_like(ginv[n])
        m[0] = ginv[n][0]
        m[1] = ginv[n + 1][1]
        out.append(m)
    return EpsSeries(out, R - 1, kind="matrix")


def trace_series(ginv, chi, order=None):
    """Series of ``Lambda chi = tr(g^-1 X)``."""
    R = ginv.order if order is None else min(order, ginv.order)
    coeffs = [_real_if_close(herm_trace(herm_mul(ginv[n], chi.matrix)), tol=1e-9) for n in range(R + 1)]
    return EpsSeries(coeffs, R, kind="scalar")


def linearized_trace_series(ginv, chi, phi, order=None):
    """Series of ``-tr(g^-1 Phi g^-1 X)`` with ``Phi = d dbar phi``.

    ``phi`` may be a base array, in which case it is pulled back first.
    """
    shape = chi.field_shape
    phi = np.asarray(phi)
    if phi.shape != shape:
        phi = lift(phi, shape)
    Phi = ddbar(phi).matrix
    R = ginv.order if order is None else min(order, ginv.order)
    left = [herm_mul(ginv[a], Phi) for a in range(R + 1)]
    right = [herm_mul(ginv[b], chi.matrix) for b in range(R + 1)]
    coeffs = []
    for n in range(R + 1):
        acc = 0
        for a in range(n + 1):
            acc = acc + herm_trace(herm_mul(left[a], right[n - a]))
        coeffs.append(_real_if_close(-np.asarray(acc), tol=1e-9))
    return EpsSeries(coeffs, R, kind="scalar")


def realize_metric(omega_X, omega_B, k, base_potentials=None, vertical_potentials=None):
    """The form ``omega_X + k omega_B + i d dbar(sum psi_i k^(2-i) + sum phi_i k^-i)``."""
    shape = omega_X.field_shape
    m = omega_X.matrix.copy()
    m[1, 1] = m[1, 1] + k * lift(omega_B, shape)
    for i, psi in (base_potentials or {}).items():
        m = m + _zz_only(psi, shape) * float(k) ** (2 - i)
    pot = np.zeros(shape)
    for i, phi in (vertical_potentials or {}).items():
        pot = pot + phi * float(k) ** (-i)
    m = m + ddbar(pot).matrix
    from .forms import FormField

    return FormField(m, closed=omega_X.closed)


def as_mapping(pots):
    if pots is None:
        return {}
    if isinstance(pots, Mapping):
        return dict(pots)
    return dict(enumerate(pots))
