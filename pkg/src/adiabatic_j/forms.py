"""Real (1,1)-forms stored as Hermitian coefficient fields.

A form ``omega = i g_{p qbar} dz^p ^ dzbar^q`` is stored as an array ``matrix``
of shape ``(d, d, *grid)`` with ``matrix[p, q] = g_{p qbar}``.  On the total
space ``d = 2`` with coordinate order ``(w, z)``; one-dimensional restrictions
(fibers, base) use ``d = 1``.  Top-degree wedge products of two (1,1)-forms on
the surface reduce to the mixed determinant of their coefficient matrices,
normalized so that ``wedge_top_integral(omega, omega) = 2 * int det g``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import GridMismatch, NotPositive
from .grid import Grid4, ddbar_coefficient, integrate

POSITIVITY_THRESHOLD = 1e-9
_LETTERS = ("w", "z")


# -- pointwise Hermitian algebra -------------------------------------------

def herm_mul(a, b):
    return np.einsum("ij...,jk...->ik...", a, b)


def herm_det(m):
    d = m.shape[0]
    if d == 1:
        return m[0, 0]
    if d == 2:
        return m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    raise ValueError("only 1x1 and 2x2 coefficient matrices are supported")


def herm_inv(m):
    """Inverse via the adjugate formula."""
    d = m.shape[0]
    det = herm_det(m)
    if d == 1:
        return (1.0 / det)[None, None]
    adj = np.empty_like(m)
    adj[0, 0] = m[1, 1]
    adj[1, 1] = m[0, 0]
    adj[0, 1] = -m[0, 1]
    adj[1, 0] = -m[1, 0]
    return adj / det


def herm_trace(m):
    return np.einsum("ii...->...", m)


def herm_min_eig(m):
    d = m.shape[0]
    if d == 1:
        return m[0, 0].real
    a = m[0, 0].real
    c = m[1, 1].real
    b = np.abs(m[0, 1])
    return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b**2)


def _real_if_close(x, tol=1e-10):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        scale = max(1.0, float(np.abs(x.real).max(initial=0.0)))
        if np.abs(x.imag).max(initial=0.0) <= tol * scale:
            return x.real.copy()
    return x


@dataclass(frozen=True)
class FormField:
    """Hermitian coefficient field of a real (1,1)-form."""

    matrix: np.ndarray
    closed: bool = False

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim < 3 or m.shape[0] != m.shape[1]:
            raise ValueError(f"bad coefficient array shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    # construction
    @classmethod
    def constant(cls, grid, c):
        c = np.asarray(c, dtype=complex)
        m = np.broadcast_to(c.reshape(c.shape + (1,) * 4), c.shape + grid.shape).copy()
        return cls(m, closed=True)

    @classmethod
    def from_components(cls, ww, wz, zz, closed=False):
        ww, wz, zz = np.broadcast_arrays(*(np.asarray(a, dtype=complex) for a in (ww, wz, zz)))
        m = np.stack([np.stack([ww, wz]), np.stack([np.conj(wz), zz])])
        return cls(m, closed=closed)

    # access
    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def field_shape(self):
        return self.matrix.shape[2:]

    @property
    def grid(self):
        return Grid4.from_shape(self.field_shape)

    @property
    def ww(self):
        return self.matrix[0, 0].real

    @property
    def wz(self):
        return self.matrix[0, 1]

    @property
    def zw(self):
        return self.matrix[1, 0]

    @property
    def zz(self):
        return self.matrix[1, 1].real

    # arithmetic
    def _check(self, other):
        if self.matrix.shape != other.matrix.shape:
            raise GridMismatch(f"{self.matrix.shape} vs {other.matrix.shape}")

    def __add__(self, other):
        self._check(other)
        return FormField(self.matrix + other.matrix, self.closed and other.closed)

    def __sub__(self, other):
        self._check(other)
        return FormField(self.matrix - other.matrix, self.closed and other.closed)

    def __mul__(self, s):
        return FormField(self.matrix * s, self.closed)

    __rmul__ = __mul__

    # diagnostics
    def hermitian_defect(self):
        return float(np.abs(self.matrix - np.conj(np.swapaxes(self.matrix, 0, 1))).max())

    def positivity_margin(self):
        """Minimum over grid points of the smallest eigenvalue, and its location."""
        eig = herm_min_eig(self.matrix)
        idx = np.unravel_index(np.argmin(eig), eig.shape)
        return float(eig[idx]), idx

    def require_positive(self, threshold=POSITIVITY_THRESHOLD, what="form"):
        margin, idx = self.positivity_margin()
        if margin <= threshold:
            raise NotPositive(margin, idx, what=what)
        return margin

    def restrict_fiber(self):
        """The 1x1 vertical block ``g_{w wbar}`` as a 1-dimensional form field."""
        return FormField(self.matrix[:1, :1], self.closed)

    def max_abs_diff(self, other):
        self._check(other)
        return float(np.abs(self.matrix - other.matrix).max())


def ddbar(phi, letters=None):
    """Coefficients ``d_p d_qbar phi`` of ``i d dbar phi`` (exactly closed)."""
    phi = np.asarray(phi)
    if letters is None:
        letters = _LETTERS if phi.ndim == 4 else ("z",)
    d = len(letters)
    m = np.empty((d, d) + phi.shape, dtype=complex)
    for i, p in enumerate(letters):
        for j, q in enumerate(letters):
            if j < i:
                continue
            m[i, j] = ddbar_coefficient(phi, p, q)
    for i in range(d):
        m[i, i] = m[i, i].real
        for j in range(i):
            m[i, j] = np.conj(m[j, i])
    return FormField(m, closed=True)


def trace(omega, chi, check=True):
    """Pointwise ``tr(g^{-1} X)``, i.e. the trace of ``chi`` with respect to ``omega``."""
    omega._check(chi)
    if check:
        omega.require_positive(what="omega")
    t = herm_trace(herm_mul(herm_inv(omega.matrix), chi.matrix))
    return _real_if_close(t)


def pairing(omega, chi, alpha):
    """Pointwise inner product ``(chi, alpha)_omega = tr(g^-1 X g^-1 A)``."""
    ginv = herm_inv(omega.matrix)
    t = herm_trace(herm_mul(herm_mul(ginv, chi.matrix), herm_mul(ginv, alpha.matrix)))
    return _real_if_close(t)


def mixed_det(alpha, beta):
    """Polarized determinant: ``mixed_det(a, a) = 2 det a`` for 2x2 fields."""
    a, b = alpha.matrix, beta.matrix
    if alpha.dim != 2:
        raise ValueError("mixed determinant is defined for 2x2 coefficient fields")
    val = a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - a[0, 1] * b[1, 0] - a[1, 0] * b[0, 1]
    return _real_if_close(val)


def volume_density(omega):
    """``det g``; the top power ``omega^2`` equals ``2 det g`` times Lebesgue measure."""
    return _real_if_close(herm_det(omega.matrix))


def wedge_top_integral(alpha, beta):
    """Integral of ``alpha ^ beta`` over the total space."""
    alpha._check(beta)
    return float(np.real(integrate(mixed_det(alpha, beta))))


def j_constant(chi, omega):
    """Cohomological constant ``c = 2 int chi^omega / int omega^2``."""
    omega.require_positive(what="omega")
    return 2.0 * wedge_top_integral(chi, omega) / wedge_top_integral(omega, omega)


@dataclass(frozen=True)
class KahlerData:
    """A Kahler form given as a constant Hermitian matrix plus ``i d dbar`` of a potential."""

    base_constant_matrix: np.ndarray
    potential: np.ndarray

    def realize(self, grid=None):
        pot = np.asarray(self.potential, dtype=float)
        grid = grid or Grid4.from_shape(pot.shape)
        return FormField.constant(grid, self.base_constant_matrix) + ddbar(pot)
