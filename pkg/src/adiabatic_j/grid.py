"""Periodic product grids, spectral differentiation and quadrature.

Scalar fields are plain numpy arrays.  A field on the total space has shape
``(n_fiber, n_fiber, n_base, n_base)`` with axes ``(x1, x2, y1, y2)``, where
``w = x1 + i x2`` is the fiber coordinate and ``z = y1 + i y2`` the base
coordinate, both on the unit square torus.  A field on the base alone has
shape ``(n_base, n_base)``.

Complex derivatives follow ``d/dw = (d/dx1 - i d/dx2) / 2``.  First-derivative
symbols vanish at the Nyquist frequency; the diagonal second derivatives
``d^2/dw dwbar`` use the exact symbol ``-pi^2 |m|^2`` so that
:func:`fourier_solve_laplace` inverts them exactly on the grid.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .exceptions import GridMismatch, NonZeroMean

COORDS = ("w", "wbar", "z", "zbar")


@dataclass(frozen=True)
class Grid4:
    """Uniform grid on the product of two unit square tori.

    Parameters
    ----------
    n_fiber : int
        Samples per fiber axis (power of two, at least 8).
    n_base : int
        Samples per base axis (power of two, at least 8).
    """

    n_fiber: int
    n_base: int

    def __post_init__(self):
        for name in ("n_fiber", "n_base"):
            n = getattr(self, name)
            if n < 8 or n & (n - 1):
                raise ValueError(f"{name} must be a power of two >= 8, got {n}")

    @classmethod
    def from_shape(cls, shape):
        if len(shape) != 4 or shape[0] != shape[1] or shape[2] != shape[3]:
            raise GridMismatch(f"not a product-grid field shape: {shape}")
        return cls(shape[0], shape[2])

    @property
    def shape(self):
        return (self.n_fiber, self.n_fiber, self.n_base, self.n_base)

    @property
    def base_shape(self):
        return (self.n_base, self.n_base)

    @property
    def size(self):
        return self.n_fiber**2 * self.n_base**2

    @property
    def cell_volume(self):
        return 1.0 / self.size

    def coords(self):
        """Broadcastable coordinate arrays ``(x1, x2, y1, y2)``."""
        xf = np.arange(self.n_fiber) / self.n_fiber
        xb = np.arange(self.n_base) / self.n_base
        return (
            xf[:, None, None, None],
            xf[None, :, None, None],
            xb[None, None, :, None],
            xb[None, None, None, :],
        )

    def base_coords(self):
        xb = np.arange(self.n_base) / self.n_base
        return xb[:, None], xb[None, :]

    def zeros(self, dtype=float):
        return np.zeros(self.shape, dtype=dtype)

    def lift(self, base_field):
        """Pull a base field back to the total space (constant along fibers)."""
        base_field = np.asarray(base_field)
        if base_field.shape != self.base_shape:
            raise GridMismatch(f"base field shape {base_field.shape} != {self.base_shape}")
        return np.broadcast_to(base_field, self.shape).copy()

    def check(self, f):
        if np.shape(f) != self.shape:
            raise GridMismatch(f"field shape {np.shape(f)} != grid shape {self.shape}")
        return f


def _freqs(n):
    return np.fft.fftfreq(n, 1.0 / n)


def _axis_symbols(n):
    m = _freqs(n)
    d1 = 2j * np.pi * m
    d1[n // 2] = 0.0  # Nyquist mode has no real derivative
    d2 = -((2 * np.pi * m) ** 2)
    return d1, d2


def _shape_layout(shape):
    """Map coordinate letters to array axes for a total-space or base field."""
    if len(shape) == 4:
        return {"w": (0, 1), "z": (2, 3)}
    if len(shape) == 2:
        return {"z": (0, 1)}
    raise GridMismatch(f"unsupported field shape {shape}")


@functools.lru_cache(maxsize=32)
def _symbols(shape):
    """First and diagonal-second derivative symbols, broadcastable to ``shape``."""
    layout = _shape_layout(shape)
    ndim = len(shape)
    first = {}
    second = {}
    for letter, (a1, a2) in layout.items():
        d1a, d2a = _axis_symbols(shape[a1])
        d1b, d2b = _axis_symbols(shape[a2])
        sa = [1] * ndim
        sb = [1] * ndim
        sa[a1] = shape[a1]
        sb[a2] = shape[a2]
        da, db = d1a.reshape(sa), d1b.reshape(sb)
        first[letter] = 0.5 * (da - 1j * db)
        first[letter + "bar"] = 0.5 * (da + 1j * db)
        second[letter] = 0.25 * (d2a.reshape(sa) + d2b.reshape(sb))
    return first, second


def fft(f):
    return sfft.fftn(f)


def ifft(F, real=False):
    out = sfft.ifftn(F)
    return out.real if real else out


def _maybe_real(out, like):
    return out.real.copy() if np.isrealobj(like) else out


def complex_derivative(f, coord):
    """Spectral derivative of ``f`` with respect to ``w``, ``wbar``, ``z`` or ``zbar``.

    Returns a complex array; derivatives of real fields are complex in general.
    """
    f = np.asarray(f)
    first, _ = _symbols(f.shape)
    if coord not in first:
        raise ValueError(f"coordinate {coord!r} not available for shape {f.shape}")
    return ifft(fft(f) * first[coord])


def ddbar_coefficient(f, p, q):
    """``d_p d_qbar f`` for coordinate letters ``p, q`` in ``{'w', 'z'}``."""
    f = np.asarray(f)
    first, second = _symbols(f.shape)
    if p == q:
        sym = second[p]
    else:
        sym = first[p] * first[q + "bar"]
    return ifft(fft(f) * sym)


def laplace_symbol(shape, axes):
    """Fourier symbol of the d-dbar Laplacian restricted to ``axes``."""
    _, second = _symbols(tuple(shape))
    layout = _shape_layout(tuple(shape))
    if axes == "all":
        letters = list(layout)
    elif axes == "fiber":
        letters = ["w"]
    elif axes == "base":
        letters = ["z"]
    else:
        raise ValueError(f"axes must be 'fiber', 'base' or 'all', got {axes!r}")
    if not set(letters) <= set(layout):
        raise ValueError(f"axes {axes!r} not available for shape {tuple(shape)}")
    sym = sum(np.broadcast_to(second[c], shape) for c in letters)
    return np.asarray(sym)


def _mean_axes(shape, axes):
    layout = _shape_layout(tuple(shape))
    if axes == "all":
        return tuple(range(len(shape)))
    return layout["w" if axes == "fiber" else "z"]


def fourier_solve_laplace(rho, axes="all", tol=1e-11):
    """Solve the d-dbar Laplace equation along ``axes`` for a mean-zero source.

    Returns the solution with zero mean along the selected axes.

    Raises
    ------
    NonZeroMean
        If ``rho`` does not average to zero along the selected axes.
    """
    rho = np.asarray(rho)
    mean = np.abs(rho.mean(axis=_mean_axes(rho.shape, axes))).max()
    scale = max(1.0, float(np.abs(rho).max()))
    if mean > tol * scale:
        raise NonZeroMean(float(mean), tol)
    sym = laplace_symbol(rho.shape, axes)
    inv = np.zeros_like(sym)
    nz = sym != 0
    inv[nz] = 1.0 / sym[nz]
    return _maybe_real(ifft(fft(rho) * inv), rho)


def integrate(f):
    """Integral over the unit-volume torus (mean of samples, pairwise summation)."""
    return np.asarray(f).mean()


def fourier_field(grid, terms, base=False):
    """Real field ``sum amp * cos(2 pi freq . x + phase)`` on ``grid``.

    ``terms`` is an iterable of ``(freq, amp)`` or ``(freq, amp, phase)``; for
    total-space fields ``freq`` is a 4-vector ``(x1, x2, y1, y2)``, for base
    fields (``base=True``) either a 2-vector or a 4-vector whose fiber part is
    zero.
    """
    coords = grid.base_coords() if base else grid.coords()
    out = np.zeros(grid.base_shape if base else grid.shape)
    for term in terms:
        freq, amp = term[0], term[1]
        phase = term[2] if len(term) > 2 else 0.0
        freq = list(freq)
        if base and len(freq) == 4:
            if freq[0] or freq[1]:
                raise ValueError("base potential terms cannot depend on fiber coordinates")
            freq = freq[2:]
        if len(freq) != len(coords):
            raise ValueError(f"frequency {freq} has wrong length")
        arg = sum(2 * np.pi * k * x for k, x in zip(freq, coords))
        out = out + amp * np.cos(arg + phase)
    return out


def band_limit(f, tol=1e-12):
    """Largest absolute integer frequency with a non-negligible Fourier coefficient."""
    f = np.asarray(f)
    F = np.abs(fft(f)) / f.size
    mask = F > tol * max(1.0, F.max())
    best = 0
    for ax, n in enumerate(f.shape):
        m = np.abs(_freqs(n))
        shape = [1] * f.ndim
        shape[ax] = n
        vals = np.broadcast_to(m.reshape(shape), f.shape)[mask]
        if vals.size:
            best = max(best, int(vals.max()))
    return best


def random_band_limited(grid, rng, band=None, base=False, mean_zero=True, amplitude=1.0):
    """Random real field whose Fourier support is within ``band`` per axis."""
    shape = grid.base_shape if base else grid.shape
    band = band if band is not None else min(shape) // 4
    F = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    for ax, n in enumerate(shape):
        m = np.abs(_freqs(n))
        s = [1] * len(shape)
        s[ax] = n
        F = F * (m <= band).reshape(s)
    f = ifft(F).real
    if mean_zero:
        f = f - f.mean()
    return amplitude * f / max(np.abs(f).max(), 1e-300)


def save_field(path, f, **meta):
    """Write ``f`` as a raw little-endian float64 block plus a JSON header.

    Complex fields are stored as interleaved (real, imag) pairs.
    """
    path = Path(path)
    f = np.ascontiguousarray(f)
    is_complex = np.iscomplexobj(f)
    data = f.astype("<c16" if is_complex else "<f8")
    path.with_suffix(".bin").write_bytes(data.tobytes(order="C"))
    header = {"shape": list(f.shape), "dtype": "float64", "complex": bool(is_complex)}
    header.update(meta)
    path.with_suffix(".json").write_text(json.dumps(header, sort_keys=True, indent=2) + "\n")
    return path.with_suffix(".bin")


def load_field(path):
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    dtype = "<c16" if header["complex"] else "<f8"
    raw = np.frombuffer(path.with_suffix(".bin").read_bytes(), dtype=dtype)
    return raw.reshape(header["shape"]).astype(complex if header["complex"] else float)
