"""Damped Newton-Krylov completion of approximate solutions at fixed ``k``."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .exceptions import NoConvergence, PositivityBreakdown
from .forms import FormField, ddbar, j_constant, trace, volume_density
from .grid import ddbar_coefficient
from .jlinear import LinearProblem, apply_linearization, smallest_eigenvalue

MAX_HALVINGS = 12


def j_residual(omega, chi):
    """``(Lambda_omega chi - c, sup norm)`` with ``c`` the cohomological constant."""
    omega.require_positive(what="omega")
    c = j_constant(chi, omega)
    res = trace(omega, chi, check=False) - c
    return res, float(np.abs(res).max())


def _weighted_integral(omega, f):
    return float(np.mean(f * np.real(volume_density(omega))))


def linearize(omega, chi, phi):
    """Derivative of ``phi -> Lambda_{omega + i d dbar phi} chi`` at zero."""
    return apply_linearization(LinearProblem(omega, chi), phi)


def _quad_mean(f):
    return float(np.sqrt(np.mean(np.abs(f) ** 2)))


@dataclass
class SolveReport:
    """History of a Newton run."""

    k: float | None = None
    iterations: int = 0
    converged: bool = False
    residual_sup: list = field(default_factory=list)
    residual_l2: list = field(default_factory=list)
    positivity_margin: float | None = None
    inverse_norm: float | None = None
    krylov_iterations: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    update_means: list = field(default_factory=list)
    wall_time: float = 0.0
    message: str = ""

    def tail_ratios(self, n=3):
        """Ratios ``r_{i+1}/r_i`` over the last ``n`` iterations."""
        h = self.residual_sup
        return [h[i + 1] / h[i] for i in range(max(0, len(h) - 1 - n), len(h) - 1) if h[i] > 0]

    def as_dict(self, include_time=True):
        d = asdict(self)
        if not include_time:
            d.pop("wall_time")
        return d

    def to_json(self, include_time=True):
        return json.dumps(self.as_dict(include_time), indent=2, sort_keys=True) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "residual_sup", "residual_l2"])
        for i, (s, q) in enumerate(zip(self.residual_sup, self.residual_l2)):
            w.writerow([i, repr(s), repr(q)])
        return buf.getvalue()


def _newton_step(omega, chi, res, rtol):
    """Solve ``p L(delta) = -res`` on weighted-mean-zero functions by GMRES."""
    prob = LinearProblem(omega, chi)
    shape = prob.field_shape
    n = int(np.prod(shape))

    def proj(f):
        return np.real(prob.project(f))

    def matvec(x):
        return proj(apply_linearization(prob, proj(x.reshape(shape)))).ravel()

    def prec(x):
        return np.real(prob.precondition(x.reshape(shape))).ravel() * scale

    scale = float(prob.weight.mean())
    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    M = LinearOperator((n, n), matvec=prec, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    rhs = -proj(res).ravel()
    x, info = gmres(A, rhs, rtol=rtol, atol=0.0, restart=60, maxiter=20, M=M, callback=cb, callback_type="pr_norm")
    if info < 0:
        raise NoConvergence("GMRES breakdown in Newton step")
    return proj(x.reshape(shape)), count[0]


def newton_solve(init, chi, tol=1e-9, maxiter=12, k=None):
    """Damped Newton iteration for ``Lambda_omega chi = c`` starting at ``init``.

    Each step solves the projected linearized equation with GMRES
    (preconditioned by the flat constant-coefficient operator) and is damped
    by halving until the metric stays positive and the sup residual drops.

    Returns
    -------
    omega : FormField
    report : SolveReport

    Raises
    ------
    PositivityBreakdown
        If no damped step keeps the metric positive.
    NoConvergence
        If ``tol`` is not met within ``maxiter`` iterations or the residual
        stops decreasing.  The report is attached to the exception.
    """
    t0 = time.perf_counter()
    report = SolveReport(k=k)
    omega = init
    res, sup = j_residual(omega, chi)
    report.residual_sup.append(sup)
    report.residual_l2.append(_quad_mean(res))
    while sup > tol:
        if report.iterations >= maxiter:
            report.message = f"no convergence in {maxiter} iterations"
            report.wall_time = time.perf_counter() - t0
            raise NoConvergence(report.message, residual=sup, report=report)
        rtol = max(1e-13, min(1e-2, 0.1 * sup))
        delta, kits = _newton_step(omega, chi, res, rtol)
        report.krylov_iterations.append(kits)
        report.update_means.append(_weighted_integral(omega, delta))
        step = ddbar(delta)
        t = 1.0
        accepted = False
        positive_seen = False
        for _ in range(MAX_HALVINGS):
            trial = FormField(omega.matrix + t * step.matrix, closed=omega.closed)
            margin, _ = trial.positivity_margin()
            if margin > 0:
                positive_seen = True
                new_res, new_sup = j_residual(trial, chi)
                if new_sup < sup:
                    report.steps.append({"iteration": report.iterations + 1, "t": t, "accepted": True,
                                         "residual": new_sup})
                    omega, res, sup = trial, new_res, new_sup
                    accepted = True
                    break
            report.steps.append({"iteration": report.iterations + 1, "t": t, "accepted": False,
                                 "margin": margin})
            t *= 0.5
        report.iterations += 1
        if not accepted:
            report.wall_time = time.perf_counter() - t0
            if not positive_seen:
                report.message = "damping could not keep the metric positive"
                raise PositivityBreakdown(report.message, residual=sup, report=report)
            report.message = "line search failed to reduce the residual"
            raise NoConvergence(report.message, residual=sup, report=report)
        report.residual_sup.append(sup)
        report.residual_l2.append(_quad_mean(res))
    report.converged = True
    report.positivity_margin = omega.positivity_margin()[0]
    report.wall_time = time.perf_counter() - t0
    report.message = "converged"
    return omega, report


def _adjoint_linearization(prob, u):
    """Plain L2 adjoint of the linearization: ``-sum d_q d_pbar (M[p,q] u)``."""
    out = 0
    for i, p in enumerate(prob.letters):
        for j, q in enumerate(prob.letters):
            out = out - ddbar_coefficient(prob.M[i, j] * u, q, p)
    return np.real(out)


def _solve_projected(apply, prob, rhs, rtol):
    shape = prob.field_shape
    n = rhs.size

    def proj(f):
        return f - f.mean()

    A = LinearOperator((n, n), matvec=lambda x: proj(apply(proj(x.reshape(shape)))).ravel(), dtype=float)
    M = LinearOperator((n, n), matvec=lambda x: np.real(prob.precondition(x.reshape(shape))).ravel() * prob.weight.mean(),
                       dtype=float)
    x, info = gmres(A, proj(rhs).ravel(), rtol=rtol, atol=0.0, restart=60, maxiter=50, M=M)
    if info != 0:
        raise NoConvergence("GMRES did not converge while estimating the inverse norm")
    return proj(x.reshape(shape))


def estimate_inverse_norm(omega, chi, iters=30, rtol=1e-3, rng=None, return_eigenvalue=False):
    """Quadratic-mean norm of the inverse linearization on mean-zero functions.

    Inverse power iteration on ``A^T A`` where ``A`` is the linearization
    compressed to mean-zero functions.  Optionally also returns the smallest
    nonzero eigenvalue of ``F`` (Rayleigh quotient).
    """
    prob = LinearProblem(omega, chi)
    rng = rng or np.random.default_rng(0)
    v = rng.standard_normal(prob.field_shape)
    v = v - v.mean()
    v /= _quad_mean(v)
    est = None
    for _ in range(iters):
        w = _solve_projected(lambda u: _adjoint_linearization(prob, u), prob, v, 1e-8)
        w = _solve_projected(lambda u: apply_linearization(prob, u), prob, w, 1e-8)
        new = np.sqrt(_quad_mean(w))
        v = w / _quad_mean(w)
        if est is not None and abs(new - est) <= rtol * new:
            est = new
            break
        est = new
    if est is None:
        raise NoConvergence("power iteration did not run")
    if return_eigenvalue:
        return float(est), smallest_eigenvalue(prob)
    return float(est)


def ift_radii(omega, chi, inverse_norm=None, samples=4, scale=1e-3, rng=None):
    """Heuristic radii of the quantitative inverse function theorem.

    The nonlinear part ``N(phi) = Lambda(omega + i d dbar phi) - Lambda(omega) - L(phi)``
    is quadratic to leading order; sampling gives ``|N(phi)| <= K |phi|^2`` and so
    a Lipschitz constant ``2 K rho`` on the ball of radius ``rho``.  Requiring it to
    be at most ``1/(2|P|)`` gives ``delta' = 1/(4 K |P|)`` and ``delta = delta'/(2|P|)``.
    """
    rng = rng or np.random.default_rng(1)
    P = inverse_norm if inverse_norm is not None else estimate_inverse_norm(omega, chi)
    base = trace(omega, chi, check=False)
    prob = LinearProblem(omega, chi)
    K = 0.0
    from .grid import random_band_limited

    for _ in range(samples):
        phi = random_band_limited(omega.grid, rng, band=2, amplitude=scale)
        trial = omega + ddbar(phi)
        N = trace(trial, chi, check=False) - base - apply_linearization(prob, phi)
        K = max(K, _quad_mean(N) / _quad_mean(phi) ** 2)
    delta_p = 1.0 / (4.0 * K * P) if K > 0 else float("inf")
    return {"inverse_norm": P, "quadratic_constant": K, "delta_prime": delta_p, "delta": delta_p / (2.0 * P)}
