from pathlib import Path

import numpy as np
import pytest

from adiabatic_j import ExperimentConfig, FormField, Grid4, ddbar, expand, normalize, realize
from adiabatic_j.grid import random_band_limited

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
DELTA = 0.05 / np.pi**2


@pytest.fixture(scope="session")
def grid():
    return Grid4(16, 16)


@pytest.fixture(scope="session")
def grid8():
    return Grid4(8, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mild_pair(grid, rng, mixed=0.1):
    """Positive (omega, chi) with band-1 perturbations of coefficient size ~0.05."""
    om = FormField.constant(grid, np.array([[1.0, mixed], [mixed, 1.5]])) + ddbar(
        random_band_limited(grid, rng, band=1, amplitude=DELTA))
    ch = FormField.constant(grid, np.diag([2.0, 3.0])) + ddbar(random_band_limited(grid, rng, band=1, amplitude=DELTA))
    return om, ch


@pytest.fixture(scope="session")
def perturbed_config():
    return ExperimentConfig.load(CONFIGS / "perturbed.json")


@pytest.fixture(scope="session")
def flat_config():
    return ExperimentConfig.load(CONFIGS / "flat.json")


@pytest.fixture(scope="session")
def perturbed(perturbed_config):
    cfg = perturbed_config
    return cfg.chi(), cfg.omega_X(), cfg.omega_B()


@pytest.fixture(scope="session")
def normalized(perturbed):
    chi, om, ob = perturbed
    om_n, ob_n, _ = normalize(om, chi, ob)
    return chi, om_n, ob_n


@pytest.fixture(scope="session")
def state2(normalized):
    chi, om, ob = normalized
    return expand(chi, om, ob, 2)


@pytest.fixture(scope="session")
def solved32(state2):
    from adiabatic_j import newton_solve

    return newton_solve(realize(state2, 32), state2.chi, tol=1e-9, k=32)
