"""The self-adjoint elliptic operator ``F_{omega,chi}`` and its mean-zero solves.

``F(phi) = -(chi, i d dbar phi)_omega - (d Lambda_omega chi, dbar phi)_omega``.

Index convention: with ``H = g^{-1}`` and ``M = H X H`` (``X`` the coefficient
matrix of ``chi``),

    F(phi) = -sum_{p,q} M[q,p] d_p d_qbar phi - sum_{p,q} H[q,p] d_p Lambda d_qbar phi,

which makes ``F`` Hermitian for the ``omega``-volume inner product:

    int phi F(psi) det g = int sum_{a,b} d_a phi M[b,a] d_bbar psi det g.

Away from solutions of the J-equation the gradient term is complex, so ``F``
maps real functions to complex ones; solves run in complex arithmetic.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .exceptions import NoConvergence, NonZeroFiberMean, NonZeroMean, NotPositive
from .fibration import lift
from .forms import FormField, _real_if_close, ddbar, herm_det, herm_inv, herm_mul, herm_trace
from .grid import _symbols, complex_derivative, ddbar_coefficient, fourier_solve_laplace

DOMAINS = ("total", "fiberwise", "base")
DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class LinearProblem:
    """Coefficients of ``F_{omega,chi}`` on one of the three domains.

    ``total`` works on 2x2 forms over 4-D fields; ``fiberwise`` on the 1x1
    vertical blocks over 4-D fields, one independent problem per base point;
    ``base`` on 1x1 forms over base arrays.
    """

    omega: FormField
    chi: FormField
    domain: str = "total"

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise ValueError(f"domain must be one of {DOMAINS}")
        want = 2 if self.domain == "total" else 1
        if self.omega.dim != want or self.chi.dim != want:
            raise ValueError(f"{self.domain} problems need {want}x{want} forms")
        self.omega.require_positive(what="omega")
        self.chi.require_positive(what="chi")

    @classmethod
    def fiberwise(cls, omega_X, chi):
        return cls(omega_X.restrict_fiber(), chi.restrict_fiber(), "fiberwise")

    @classmethod
    def base(cls, omega_B, chi_B):
        wrap = lambda a: FormField(np.asarray(a, dtype=complex)[None, None])  # noqa: E731
        return cls(wrap(omega_B), wrap(chi_B), "base")

    # geometry of the domain
    @property
    def letters(self):
        return {"total": ("w", "z"), "fiberwise": ("w",), "base": ("z",)}[self.domain]

    @property
    def field_shape(self):
        return self.omega.field_shape

    @property
    def axes(self):
        """Array axes integrated over; the remaining axes index independent problems."""
        if self.domain == "fiberwise":
            return (0, 1)
        return tuple(range(len(self.field_shape)))

    @property
    def side(self):
        return max(self.field_shape)

    # cached coefficient fields
    @functools.cached_property
    def ginv(self):
        return herm_inv(self.omega.matrix)

    @functools.cached_property
    def weight(self):
        return np.real(herm_det(self.omega.matrix))

    @functools.cached_property
    def M(self):
        return herm_mul(herm_mul(self.ginv, self.chi.matrix), self.ginv)

    @functools.cached_property
    def trace(self):
        return _real_if_close(herm_trace(herm_mul(self.ginv, self.chi.matrix)))

    @functools.cached_property
    def dtrace(self):
        return [complex_derivative(self.trace, p) for p in self.letters]

    # reductions over the domain
    def integral(self, f):
        return np.sum(f, axis=self.axes, keepdims=True)

    def weighted_mean(self, f):
        return self.integral(f * self.weight) / self.integral(self.weight)

    def project(self, f):
        """Remove the volume-weighted mean (per fiber for fiberwise problems)."""
        return f - self.weighted_mean(f)

    @functools.cached_property
    def _flat_symbol(self):
        mbar = np.mean(self.M, axis=tuple(2 + a for a in self.axes), keepdims=True)
        first, second = _symbols(self.field_shape)
        sym = 0
        for i, p in enumerate(self.letters):
            for j, q in enumerate(self.letters):
                s = second[p] if p == q else first[p] * first[q + "bar"]
                sym = sym - mbar[j, i] * s
        sym = np.real(np.broadcast_to(sym, self.field_shape))
        inv = np.zeros_like(sym)
        nz = np.abs(sym) > 1e-14 * np.abs(sym).max()
        inv[nz] = 1.0 / sym[nz]
        dbar = np.mean(self.weight, axis=self.axes, keepdims=True)
        return inv / dbar

    def precondition(self, r):
        """Exact inverse of the weighted flat constant-coefficient operator."""
        return sfft.ifftn(sfft.fftn(r, axes=self.axes) * self._flat_symbol, axes=self.axes)


def _principal(problem, phi):
    out = 0
    for i, p in enumerate(problem.letters):
        for j, q in enumerate(problem.letters):
            out = out - problem.M[j, i] * ddbar_coefficient(phi, p, q)
    return out


def _gradient_term(problem, phi):
    out = 0
    for i, p in enumerate(problem.letters):
        for j, q in enumerate(problem.letters):
            out = out - problem.ginv[j, i] * problem.dtrace[i] * complex_derivative(phi, q + "bar")
    return out


def apply_F(problem, phi):
    """``F_{omega,chi}(phi)``; complex-valued unless ``Lambda_omega chi`` is constant."""
    phi = np.asarray(phi)
    if phi.shape != problem.field_shape:
        raise ValueError(f"field shape {phi.shape} != problem shape {problem.field_shape}")
    return _principal(problem, phi) + _gradient_term(problem, phi)


def apply_linearization(problem, phi):
    """First term of ``F`` only: the derivative of the trace operator (real)."""
    return _real_if_close(_principal(problem, np.asarray(phi)))


def gradient_pairing(problem, phi, psi):
    """``int sum d_a phi M[b,a] d_bbar psi det g`` over the domain."""
    dphi = [complex_derivative(phi, p) for p in problem.letters]
    dpsi = [complex_derivative(psi, q + "bar") for q in problem.letters]
    dens = 0
    for a in range(len(dphi)):
        for b in range(len(dpsi)):
            dens = dens + dphi[a] * problem.M[b, a] * dpsi[b]
    return problem.integral(dens * problem.weight)


def _inner(problem, u, v):
    return problem.integral(np.conj(u) * v)


def _check_mean(problem, rho, tol):
    mean = np.abs(problem.weighted_mean(rho)).max()
    scale = max(1.0, float(np.abs(rho).max()))
    if mean > tol * scale:
        if problem.domain == "fiberwise":
            raise NonZeroFiberMean(float(mean), tol)
        raise NonZeroMean(float(mean), tol)


@dataclass
class CGInfo:
    iterations: int
    residual: float


def solve_F(problem, rho, tol=DEFAULT_TOL, maxiter=None, x0=None, return_info=False):
    """Solve ``F(phi) = rho`` for ``phi`` with zero weighted mean.

    Preconditioned conjugate gradient on ``det g * F``, which is Hermitian and
    positive semidefinite with the constants as kernel.  Fiberwise problems
    are solved as a batch, one scalar step length per fiber.

    Raises
    ------
    NonZeroMean, NonZeroFiberMean
        If ``rho`` does not have zero weighted mean.
    NoConvergence
        If the sup-norm residual is above ``tol`` after ``maxiter`` steps.
    """
    rho = np.asarray(rho)
    _check_mean(problem, rho, tol)
    maxiter = maxiter or 10 * problem.side
    real_input = np.isrealobj(rho)
    D = problem.weight
    b = D * rho
    x = np.zeros(problem.field_shape, dtype=complex) if x0 is None else problem.project(np.asarray(x0, dtype=complex))
    r = b - D * apply_F(problem, x) if x0 is not None else b.astype(complex)
    res = float(np.abs(r / D).max())
    it = 0
    if res > tol:
        z = problem.precondition(r)
        p = z
        rz = _inner(problem, r, z)
        while it < maxiter:
            it += 1
            Ap = D * apply_F(problem, p)
            pAp = _inner(problem, p, Ap)
            alpha = np.divide(rz, pAp, out=np.zeros_like(rz), where=np.abs(pAp) > 0)
            x = problem.project(x + alpha * p)
            r = r - alpha * Ap
            res = float(np.abs(r / D).max())
            if res <= tol:
                break
            z = problem.precondition(r)
            rz_new = _inner(problem, r, z)
            beta = np.divide(rz_new, rz, out=np.zeros_like(rz), where=np.abs(rz) > 0)
            rz = rz_new
            p = z + beta * p
        else:
            # recompute the true residual before giving up
            res = float(np.abs(rho - apply_F(problem, x)).max())
            if res > tol:
                raise NoConvergence(
                    f"CG did not converge in {maxiter} iterations (residual {res:.3e})", residual=res
                )
    x = problem.project(x)
    if real_input:
        x = _real_if_close(x, tol=1e-9)
    info = CGInfo(it, res)
    return (x, info) if return_info else x


def fiberwise_solve_F(omega_X, chi, rho_V, tol=DEFAULT_TOL, return_info=False):
    """Solve the fiber problems ``F_{omega_b, chi_b}(phi_b) = rho_V|_b`` for every base point.

    The result has zero mean on every fiber with respect to ``omega_b``.
    """
    problem = LinearProblem.fiberwise(omega_X, chi)
    return solve_F(problem, rho_V, tol=tol, return_info=return_info)


def fiber_constants(omega_X, chi):
    """Per-base-point fiber constants ``c_b``, shape ``(n_base, n_base)``."""
    return chi.ww.mean(axis=(0, 1)) / omega_X.ww.mean(axis=(0, 1))


def fiberwise_normalize(omega_X, chi, return_potential=False):
    """Make every fiber restriction of ``omega_X`` solve its (linear) fiber J-equation.

    Returns ``omega_X + i d dbar v`` with ``g_{w wbar} = chi_{w wbar} / c_b`` and
    ``v`` of zero mean on every fiber.
    """
    cww = chi.ww
    idx = np.unravel_index(np.argmin(cww), cww.shape)
    if cww[idx] <= 0:
        raise NotPositive(float(cww[idx]), idx, what="vertical block of chi")
    cb = lift(fiber_constants(omega_X, chi), cww.shape)
    v = fourier_solve_laplace(cww / cb - omega_X.ww, axes="fiber")
    out = omega_X + ddbar(v)
    out = FormField(out.matrix, closed=omega_X.closed)
    return (out, v) if return_potential else out


def rayleigh_quotient(problem, phi):
    num = _inner(problem, phi, problem.weight * apply_F(problem, phi))
    den = _inner(problem, phi, problem.weight * phi)
    return np.real(num / den)


def smallest_eigenvalue(problem, rng=None, iters=50, tol=1e-8):
    """Smallest nonzero eigenvalue of ``F`` by inverse iteration on mean-zero functions.

    Returns a scalar for total/base problems and an array over base points for
    fiberwise problems.
    """
    rng = rng or np.random.default_rng(0)
    x = problem.project(rng.standard_normal(problem.field_shape))
    lam = None
    for _ in range(iters):
        x = x / np.sqrt(np.real(_inner(problem, x, problem.weight * x)))
        new = rayleigh_quotient(problem, x)
        if lam is not None and np.all(np.abs(new - lam) <= tol * np.abs(new)):
            lam = new
            break
        lam = new
        x = solve_F(problem, problem.project(x), tol=1e-11)
    lam = np.squeeze(lam)
    return float(lam) if lam.ndim == 0 else lam
