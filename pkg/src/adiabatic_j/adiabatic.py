"""Order-by-order approximate solutions of the J-equation in the adiabatic limit.

Given a relatively Kahler ``omega_X`` whose fibers already solve their own
J-equation and a base form ``omega_B`` solving the base equation, the order-r
metric is

    omega_{k,r} = omega_X + k omega_B
                  + i d dbar( sum_{i=2..r} k^(2-i) phi_{i,B} + sum_{i=1..r} k^-i phi_{i,V} )

with ``Lambda_{omega_{k,r}} chi = sum_{i<=r} c_i k^-i + O(k^-(r+1))``.  Each order
is obtained by recomputing the trace series from scratch (see
:mod:`adiabatic_j.series`), so the structural facts about the linearization are
checked rather than assumed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import NotNormalized, NotPositive, OrderTooHigh
from .fibration import fiber_constant_cb, fiber_pushforward, lift, push_chi_H
from .forms import FormField, trace
from .grid import fourier_solve_laplace, load_field, save_field
from .jlinear import LinearProblem, fiberwise_normalize, fiberwise_solve_F, solve_F
from .series import invert_adiabatic_metric, realize_metric, trace_series

MAX_ORDER = 6
NORMALIZE_TOL = 1e-10
CONSTANT_TOL = 1e-9
K_SCAN = tuple(2.0**i for i in range(0, 21))  # 1 .. ~1e6


def base_solve(chi, omega_X, omega_B):
    """Base metric in the class of ``omega_B`` solving the (linear) base equation.

    With one-dimensional base the equation ``Lambda_{omega_B'} beta = const``
    for ``beta = pi_B(chi_H)`` forces ``omega_B' = beta * int omega_B / int beta``.

    Returns
    -------
    omega_B_new : ndarray
    potential : ndarray
        Base-mean-zero ``psi`` with ``omega_B_new = omega_B + d dbar psi``.
    """
    omega_B = np.asarray(omega_B, dtype=float)
    beta = push_chi_H(chi, omega_X)
    if beta.min() <= 0:
        idx = np.unravel_index(np.argmin(beta), beta.shape)
        raise NotPositive(float(beta.min()), idx, what="pushed-forward horizontal chi")
    new = beta * omega_B.mean() / beta.mean()
    psi = fourier_solve_laplace(new - omega_B)
    return new, psi


@dataclass
class NormalizeReport:
    fiber_residual: float
    fiber_constant: float
    fiber_constant_spread: float
    base_residual: float
    base_constant: float

    def as_dict(self):
        return dict(self.__dict__)


def normalize(omega_X, chi, omega_B):
    """Fiberwise normalization of ``omega_X`` followed by the base solve."""
    om = fiberwise_normalize(omega_X, chi)
    cb, spread = fiber_constant_cb(chi, om)
    fiber_res = float(np.abs(chi.ww / om.ww - cb).max())
    ob, _ = base_solve(chi, om, omega_B)
    lam_B = push_chi_H(chi, om) / ob
    report = NormalizeReport(fiber_res, cb, spread, float(np.abs(lam_B - lam_B.mean()).max()), float(lam_B.mean()))
    return om, ob, report


def _check_normalized(chi, omega_X, omega_B, tol):
    cb, _ = fiber_constant_cb(chi, omega_X)
    dev = float(np.abs(chi.ww / omega_X.ww - cb).max())
    if dev > tol:
        raise NotNormalized("fiberwise J-equation", dev, tol)
    lam = push_chi_H(chi, omega_X) / np.asarray(omega_B)
    dev = float(np.abs(lam - lam.mean()).max())
    if dev > tol:
        raise NotNormalized("base J-equation", dev, tol)


@dataclass
class ExpansionState:
    """Output of :func:`expand`: potentials, constants and the positivity threshold."""

    r: int
    chi: FormField
    omega_X: FormField
    omega_B: np.ndarray
    base_pots: dict = field(default_factory=dict)
    vert_pots: dict = field(default_factory=dict)
    constants: list = field(default_factory=list)
    k_min: float = 1.0
    margins: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def constant_sum(self, k):
        return float(sum(c * float(k) ** (-i) for i, c in enumerate(self.constants)))

    def truncate(self, r):
        """The order-``r`` state contained in this one (``r <= self.r``)."""
        if r > self.r:
            raise ValueError(f"cannot raise the order from {self.r} to {r}")
        st = ExpansionState(
            r,
            self.chi,
            self.omega_X,
            self.omega_B,
            {i: p for i, p in self.base_pots.items() if i <= r},
            {i: p for i, p in self.vert_pots.items() if i <= r},
            list(self.constants[: r + 1]),
        )
        st.k_min, st.margins = positivity_threshold(st)
        return st

    # persistence: JSON manifest plus one raw block per field
    def save(self, directory):
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        fields = {"chi": self.chi.matrix, "omega_X": self.omega_X.matrix, "omega_B": self.omega_B}
        fields.update({f"base_{i}": p for i, p in self.base_pots.items()})
        fields.update({f"vert_{i}": p for i, p in self.vert_pots.items()})
        for name, arr in fields.items():
            save_field(d / name, arr)
        manifest = {
            "r": self.r,
            "constants": [float(c) for c in self.constants],
            "k_min": self.k_min,
            "margins": self.margins,
            "base_pots": sorted(self.base_pots),
            "vert_pots": sorted(self.vert_pots),
            "diagnostics": self.diagnostics,
        }
        (d / "state.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return d

    @classmethod
    def load(cls, directory):
        d = Path(directory)
        m = json.loads((d / "state.json").read_text())
        return cls(
            m["r"],
            FormField(load_field(d / "chi")),
            FormField(load_field(d / "omega_X")),
            load_field(d / "omega_B"),
            {i: load_field(d / f"base_{i}") for i in m["base_pots"]},
            {i: load_field(d / f"vert_{i}") for i in m["vert_pots"]},
            m["constants"],
            m["k_min"],
            m["margins"],
            m["diagnostics"],
        )


def _trace_coeffs(state, order):
    ginv = invert_adiabatic_metric(state.omega_X, state.omega_B, state.base_pots, state.vert_pots, order)
    return trace_series(ginv, state.chi)


def expand(chi, omega_X, omega_B, r, tol=1e-11, check_tol=NORMALIZE_TOL):
    """Construct the order-``r`` approximate solution.

    ``omega_X`` must already be fiberwise normalized and ``omega_B`` solve the
    base equation (see :func:`normalize`).

    Raises
    ------
    NotNormalized
        If either normalization check fails.
    OrderTooHigh
        If the resulting metric is not positive for any ``k <= 1e6``.
    """
    if not 0 <= r <= MAX_ORDER:
        raise ValueError(f"order must be in 0..{MAX_ORDER}")
    omega_B = np.asarray(omega_B, dtype=float)
    _check_normalized(chi, omega_X, omega_B, check_tol)
    state = ExpansionState(r, chi, omega_X, omega_B)
    beta = push_chi_H(chi, omega_X)
    base_problem = LinearProblem.base(omega_B, beta)
    b_total = omega_B.sum()

    f0 = _trace_coeffs(state, 0)[0]
    state.constants.append(float(np.mean(f0)))
    devs = {"0": float(np.abs(f0 - f0.mean()).max())}
    for j in range(1, r + 1):
        f_j = _trace_coeffs(state, j)[j]
        f_B = np.real(fiber_pushforward(f_j, omega_X))
        c_j = float((f_B * omega_B).sum() / b_total)
        if j >= 2:
            psi = solve_F(base_problem, c_j - f_B, tol=tol)
            psi = psi - psi.mean()
            state.base_pots[j] = np.real(psi)
            f_j = _trace_coeffs(state, j)[j]
            f_B = np.real(fiber_pushforward(f_j, omega_X))
        devs[str(j)] = float(np.abs(f_B - c_j).max())
        if devs[str(j)] > CONSTANT_TOL:
            raise NotNormalized(f"order {j} base part", devs[str(j)], CONSTANT_TOL)
        f_V = f_j - lift(f_B, f_j.shape)
        phi = fiberwise_solve_F(omega_X, chi, -f_V, tol=tol)
        state.vert_pots[j] = np.real(phi)
        state.constants.append(c_j)
    state.diagnostics["constant_deviation"] = devs
    state.diagnostics["vertical_fiber_means"] = {
        str(i): float(np.abs(fiber_pushforward(p, omega_X)).max()) for i, p in state.vert_pots.items()
    }
    state.k_min, state.margins = positivity_threshold(state)
    return state


def positivity_threshold(state, k_values=K_SCAN):
    """Smallest scanned ``k`` above which every realized metric is positive.

    Returns ``(k_min, [(k, margin), ...])``; raises :class:`OrderTooHigh` if the
    largest scanned ``k`` already fails.
    """
    margins = []
    for k in k_values:
        m, _ = _realize(state, k).positivity_margin()
        margins.append((float(k), m))
    k_min = None
    for k, m in reversed(margins):
        if m <= 0:
            break
        k_min = k
    if k_min is None:
        raise OrderTooHigh(f"order {state.r} metric not positive for any k <= {k_values[-1]:.0f}", margins)
    return k_min, [[k, m] for k, m in margins]


def _realize(state, k):
    return realize_metric(state.omega_X, state.omega_B, k, state.base_pots, state.vert_pots)


def realize(state, k):
    """``omega_{k,r}`` at a concrete ``k``.

    Raises
    ------
    NotPositive
        If the realized form is not positive (typically for ``k < state.k_min``).
    """
    om = _realize(state, k)
    om.require_positive(what=f"omega_(k={k}, r={state.r})")
    return om


@dataclass
class OrderStudy:
    r: int
    k: list
    residual_sup: list
    residual_l2: list
    slope: float
    intercept: float

    def rows(self):
        return [
            {"k": k, "r": self.r, "residual_sup": s, "residual_l2": q, "slope_fit": self.slope}
            for k, s, q in zip(self.k, self.residual_sup, self.residual_l2)
        ]

    def as_dict(self):
        return dict(self.__dict__)


def fit_loglog(x, y):
    """Least-squares slope and intercept of ``log y`` against ``log x``.

    Returns NaNs when some ``y`` vanishes (exact data has no rate).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(np.log(np.asarray(x, dtype=float)), np.log(y), 1)
    return float(slope), float(intercept)


def order_residual(state, k):
    """``Lambda_{omega_{k,r}} chi - sum c_i k^-i`` and its two norms."""
    om = realize(state, k)
    res = trace(om, state.chi, check=False) - state.constant_sum(k)
    vol = np.real(om.matrix[0, 0] * om.matrix[1, 1] - om.matrix[0, 1] * om.matrix[1, 0])
    centred = res - (res * vol).sum() / vol.sum()
    return res, float(np.abs(res).max()), float(np.sqrt(np.mean(centred**2)))


def residual_order_study(state, k_list):
    """Residual norms over ``k_list`` and their fitted log-log slope."""
    k_list = [float(k) for k in k_list]
    if len(k_list) < 3:
        raise ValueError("need at least three k values")
    sups, l2s = [], []
    for k in k_list:
        _, s, q = order_residual(state, k)
        sups.append(s)
        l2s.append(q)
    slope, intercept = fit_loglog(k_list, sups)
    return OrderStudy(state.r, k_list, sups, l2s, slope, intercept)
