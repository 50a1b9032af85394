"""Acceptance gate: one PASS/FAIL line per criterion, thresholds as stated below."""

import time

import numpy as np
import pytest
from conftest import CONFIGS, mild_pair

from adiabatic_j import expand, normalize, realize
from adiabatic_j.adiabatic import residual_order_study
from adiabatic_j.cli import main
from adiabatic_j.fibration import fiber_pushforward, push_chi_H
from adiabatic_j.forms import ddbar, trace
from adiabatic_j.grid import Grid4, random_band_limited
from adiabatic_j.jlinear import LinearProblem, apply_F, gradient_pairing, solve_F
from adiabatic_j.jnef import c1_constant, converse_expansion_check, slope_audit
from adiabatic_j.newton import linearize, newton_solve
from adiabatic_j.series import invert_adiabatic_metric, linearized_trace_series


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def standard():
    from adiabatic_j import ExperimentConfig

    cfg = ExperimentConfig.load(CONFIGS / "perturbed.json")
    chi = cfg.chi()
    om, ob, _ = normalize(cfg.omega_X(), chi, cfg.omega_B())
    return chi, om, ob


@pytest.fixture(scope="module")
def solutions(standard):
    chi, om, ob = standard
    st2 = expand(chi, om, ob, 2)
    out = {}
    for r in (0, 2):
        out[r] = newton_solve(realize(st2.truncate(r), 32.0), chi, tol=1e-9, maxiter=12, k=32.0)
    return out


def test_criterion_1_operator_identity(verdict):
    g = Grid4(16, 16)
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_id = worst_sym = 0.0
    for _ in range(20):
        om, ch = mild_pair(g, rng)
        p = LinearProblem(om, ch)
        phi = random_band_limited(g, rng, band=4)
        psi = random_band_limited(g, rng, band=4)
        lhs = np.sum(phi * apply_F(p, psi) * p.weight)
        rhs = gradient_pairing(p, phi, psi).item()
        swap = np.sum(psi * apply_F(p, phi) * p.weight)
        worst_id = max(worst_id, abs(lhs - rhs) / abs(rhs))
        worst_sym = max(worst_sym, abs(lhs - np.conj(swap)) / abs(lhs))
    dt = time.perf_counter() - t0
    ok = worst_id <= 1e-10 and worst_sym <= 1e-10 and dt < 10
    verdict("1 operator identity", ok, f"identity {worst_id:.2e}, symmetry {worst_sym:.2e}, {dt:.2f}s")


def test_criterion_2_kernel_and_invertibility(verdict):
    g = Grid4(16, 16)
    rng = np.random.default_rng(202)
    k_err = rt_err = 0.0
    for _ in range(5):
        om, ch = mild_pair(g, rng)
        p = LinearProblem(om, ch)
        k_err = max(k_err, float(np.abs(apply_F(p, np.full(g.shape, 1.3))).max()))
        phi = random_band_limited(g, rng, band=4)
        phi = phi - phi.mean()
        rt = solve_F(p, apply_F(p, phi))
        rt_err = max(rt_err, float(np.abs(rt - rt.mean() - phi).max()))
    ok = k_err <= 1e-12 and rt_err <= 1e-8
    verdict("2 kernel and invertibility", ok, f"|F(const)| {k_err:.2e}, round trip {rt_err:.2e}")


def test_criterion_3_linearization(verdict):
    g = Grid4(16, 16)
    rng = np.random.default_rng(303)
    om, ch = mild_pair(g, rng)
    phi = random_band_limited(g, rng, band=2, amplitude=1.0)
    lin = linearize(om, ch, phi)
    step = ddbar(phi)

    def err(t):
        fd = (trace(om + step * t, ch) - trace(om - step * t, ch)) / (2 * t)
        return float(np.abs(fd - lin).max())

    ratio = err(1e-3) / err(5e-4)
    verdict("3 linearization", abs(ratio - 4.0) <= 0.2, f"Richardson ratio {ratio:.4f}")


def test_criterion_4_adiabatic_order(verdict, standard):
    t0 = time.perf_counter()
    st = expand(*standard, 2)
    ks = [16, 32, 64, 128]
    slopes = [residual_order_study(st.truncate(r), ks).slope for r in (0, 1, 2)]
    dt = time.perf_counter() - t0
    bounds = (-0.9, -1.9, -2.85)
    ok = all(s <= b for s, b in zip(slopes, bounds)) and dt < 300
    verdict("4 adiabatic order", ok, "slopes " + ", ".join(f"{s:.3f}" for s in slopes) + f", {dt:.1f}s")


def test_criterion_5_D1_D2(verdict, standard):
    chi, om, ob = standard
    rng = np.random.default_rng(505)
    gi = invert_adiabatic_metric(om, ob, order=2)
    base = LinearProblem.base(ob, push_chi_H(chi, om))
    d1 = d2 = 0.0
    for _ in range(10):
        phi = random_band_limited(om.grid, rng, band=3, base=True)
        L = linearized_trace_series(gi, chi, phi)
        d1 = max(d1, float(np.abs(L[1]).max()))
        d2 = max(d2, float(np.abs(fiber_pushforward(L[2], om) - apply_F(base, phi)).max()))
    verdict("5 D1/D2 structure", d1 <= 1e-10 and d2 <= 1e-8, f"D1 sup {d1:.2e}, D2 mismatch {d2:.2e}")


def test_criterion_6_newton(verdict, solutions):
    omega, rep = solutions[2]
    tail = rep.tail_ratios(3)
    ok = (rep.converged and rep.iterations <= 12 and rep.residual_sup[-1] <= 1e-9
          and rep.positivity_margin > 0 and all(t < 0.5 for t in tail))
    verdict("6 Newton completion", ok,
            f"{rep.iterations} iterations, residual {rep.residual_sup[-1]:.2e}, "
            f"margin {rep.positivity_margin:.4f}, tail ratios {[f'{t:.1e}' for t in tail]}")


def test_criterion_7_uniqueness(verdict, solutions):
    a, b = solutions[0][0], solutions[2][0]
    dist = a.max_abs_diff(b)
    verdict("7 uniqueness", dist <= 1e-7, f"sup distance {dist:.2e}")


def test_criterion_8_converse_audit(verdict, standard, solutions):
    chi, om, ob = standard
    margins = []
    for omega, _ in solutions.values():
        L = slope_audit(chi, omega)
        margins += [L.min_margin("fiber"), L.min_margin("section")]
    c1 = abs(c1_constant(chi, om, ob))
    rep = converse_expansion_check(chi, om, ob)
    a1_err = abs(rep.coefficients[1] - rep.base_slope)
    ok = min(margins) >= -1e-10 and c1 <= 1e-10 and a1_err <= 1e-6 and rep.remainder_slope <= -1.9
    verdict("8 converse audit", ok,
            f"min margin {min(margins):.4f}, |C1| {c1:.1e}, a1 error {a1_err:.1e}, "
            f"remainder slope {rep.remainder_slope:.3f}")


def test_criterion_9_determinism(verdict, tmp_path):
    cfg = str(CONFIGS / "perturbed.json")
    blobs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["study", cfg, "--out", str(out)]) == 0
        blobs.append((out / "PLOT_DATA.csv").read_bytes())
    verdict("9 determinism", blobs[0] == blobs[1], f"{len(blobs[0])} bytes, identical={blobs[0] == blobs[1]}")
