import numpy as np
import pytest
from conftest import DELTA, mild_pair

from adiabatic_j.exceptions import GridMismatch, NotPositive
from adiabatic_j.forms import (
    FormField, KahlerData, ddbar, j_constant, mixed_det, pairing, trace, volume_density, wedge_top_integral,
)
from adiabatic_j.grid import Grid4, integrate, random_band_limited


def const(grid, *diag):
    return FormField.constant(grid, np.diag(diag))


def test_ddbar_zero_and_one_mode(grid):
    assert np.abs(ddbar(np.zeros(grid.shape)).matrix).max() == 0
    x1, *_ = grid.coords()
    f = np.cos(2 * np.pi * x1) + np.zeros(grid.shape)
    d = ddbar(f)
    # d_w d_wbar cos(2 pi x1) = (1/4) d_x1^2 cos = -pi^2 cos
    assert np.abs(d.ww + np.pi**2 * f).max() < 1e-12
    assert np.abs(d.wz).max() < 1e-12 and np.abs(d.zz).max() < 1e-12
    assert d.closed and d.hermitian_defect() == 0


def test_ddbar_mixed_matches_finite_differences(grid):
    """d_w d_zbar of cos(2 pi x1) cos(2 pi y1) against centred differences, ratio ~4."""
    x1, x2, y1, y2 = grid.coords()
    f = np.cos(2 * np.pi * x1) * np.cos(2 * np.pi * y1) + np.zeros(grid.shape)
    spectral = ddbar(f).wz[3, 5, 2, 7]
    p = np.array([3, 5, 2, 7]) / 16.0

    def fn(x):
        return np.cos(2 * np.pi * x[0]) * np.cos(2 * np.pi * x[2])

    def fd(h):
        e = np.eye(4) * h

        def d2(a, b):
            return (fn(p + e[a] + e[b]) - fn(p + e[a] - e[b]) - fn(p - e[a] + e[b]) + fn(p - e[a] - e[b])) / (4 * h * h)

        # d_w d_zbar = (1/4)(d_x1 - i d_x2)(d_y1 + i d_y2)
        return 0.25 * (d2(0, 2) + 1j * d2(0, 3) - 1j * d2(1, 2) + d2(1, 3))

    e1 = abs(fd(1e-2) - spectral)
    e2 = abs(fd(5e-3) - spectral)
    assert e1 / e2 == pytest.approx(4.0, rel=0.05)
    assert abs(spectral - np.pi**2 * np.sin(2 * np.pi * p[0]) * np.sin(2 * np.pi * p[2])) < 1e-12


def test_trace_examples(grid):
    assert np.allclose(trace(const(grid, 1, 1), const(grid, 2, 3)), 5)
    om, _ = mild_pair(grid, np.random.default_rng(0))
    assert np.abs(trace(om, om) - 2).max() < 1e-13
    assert np.abs(trace(const(grid, 1, 10), const(grid, 2, 3)) - 2.3).max() < 1e-14


def test_trace_not_positive(grid):
    bad = const(grid, 1, -1)
    with pytest.raises(NotPositive) as exc:
        trace(bad, const(grid, 1, 1))
    assert exc.value.margin == pytest.approx(-1)
    assert exc.value.location is not None


def test_j_constant_examples(grid, rng):
    assert j_constant(const(grid, 2, 3), const(grid, 1, 1)) == pytest.approx(5)
    om, ch = mild_pair(grid, rng)
    assert j_constant(om, om) == pytest.approx(2, abs=1e-13)
    u = random_band_limited(grid, rng, band=2, amplitude=DELTA)
    assert abs(j_constant(const(grid, 2, 3) + ddbar(u), const(grid, 1, 1)) - 5) < 1e-12


def test_class_invariance(grid, rng):
    om, ch = mild_pair(grid, rng)
    c = j_constant(ch, om)
    u = random_band_limited(grid, rng, band=2, amplitude=DELTA)
    v = random_band_limited(grid, rng, band=2, amplitude=DELTA)
    assert abs(j_constant(ch + ddbar(u), om + ddbar(v)) - c) < 1e-11


def test_wedge_examples(grid, rng):
    one = const(grid, 1, 1)
    assert wedge_top_integral(one, one) == pytest.approx(2.0)
    om, ch = mild_pair(grid, rng)
    u = random_band_limited(grid, rng, band=3)
    assert abs(wedge_top_integral(ddbar(u), om)) < 1e-12
    assert wedge_top_integral(om, om) == pytest.approx(2 * integrate(volume_density(om)), rel=1e-14)


def test_trace_identities(grid, rng):
    """int Lambda chi det g = int chi ^ omega and the second polarized identity."""
    om, ch = mild_pair(grid, rng)
    _, al = mild_pair(grid, rng)
    det = volume_density(om)
    lhs = integrate(trace(om, ch) * det)
    assert lhs == pytest.approx(wedge_top_integral(ch, om), rel=1e-10)
    second = integrate((trace(om, ch) * trace(om, al) - pairing(om, ch, al)) * 2 * det)
    assert second == pytest.approx(2 * wedge_top_integral(ch, al), rel=1e-10)


def test_positivity_breakdown_bisection(grid):
    x1, *_ = grid.coords()
    phi = np.cos(2 * np.pi * x1) + np.zeros(grid.shape)
    base = const(grid, 1, 1)
    margin = lambda t: (base + ddbar(phi) * t).positivity_margin()[0]  # noqa: E731
    lo, hi = 0.0, 1.0
    while hi - lo > 1e-7:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if margin(mid) > 0 else (lo, mid)
    assert lo == pytest.approx(1 / np.pi**2, abs=1e-6)
    assert margin(lo - 1e-6) > 0 > margin(hi + 1e-6)


def test_form_arithmetic_and_errors(grid):
    a = const(grid, 1, 2)
    assert (a + a).max_abs_diff(2 * a) == 0
    assert (a - a).positivity_margin()[0] == 0
    with pytest.raises(GridMismatch):
        a + const(Grid4(8, 8), 1, 1)
    with pytest.raises(ValueError):
        mixed_det(a.restrict_fiber(), a.restrict_fiber())


def test_kahler_data(grid, rng):
    pot = random_band_limited(grid, rng, band=1, amplitude=DELTA)
    kd = KahlerData(np.diag([1.0, 2.0]), pot)
    om = kd.realize()
    assert om.max_abs_diff(FormField.constant(grid, np.diag([1.0, 2.0])) + ddbar(pot)) == 0
    assert om.positivity_margin()[0] > 0
