import warnings

import numpy as np
import pytest

from kuramoto_landau.spectral_core import FieldGrid
from kuramoto_landau.stationary import VelocityDistribution, stationary_state
from kuramoto_landau.transport import AlphaFunctional
from kuramoto_landau.volterra import analyze_spectrum

DT = 1 / 160
T_SPECTRUM = 200.0

ACCEPTANCE_LINES: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def gauss():
    return VelocityDistribution("gaussian", 0.5)


@pytest.fixture(scope="session")
def grid():
    return FieldGrid(16, 16.0, 0.1)


@pytest.fixture(scope="session")
def small_grid():
    return FieldGrid(6, 8.0, 0.1)


@pytest.fixture(scope="session")
def state(gauss, grid):
    return stationary_state(2.0, gauss, grid)


@pytest.fixture(scope="session")
def small_state(gauss, small_grid):
    return stationary_state(2.0, gauss, small_grid)


@pytest.fixture(scope="session")
def spectrum(state):
    return analyze_spectrum(state, T_SPECTRUM, DT)


@pytest.fixture(scope="session")
def ac(spectrum):
    return spectrum.split.alpha_coefficients(T_alpha=20.0, dt_alpha=DT)


@pytest.fixture(scope="session")
def alpha_fn(state, ac):
    return AlphaFunctional.for_state(state, ac)


@pytest.fixture(scope="session")
def full_state(state, alpha_fn):
    return state.with_r_theta(alpha_fn(state.rot_mode.values))


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def smooth_field(rng, grid, decay=1.0, scale=1.0):
    """Random smooth field: complex amplitudes times Gaussian bumps in xi."""
    xi = grid.xi[None, :]
    amp = rng.normal(size=(grid.ell_max, 1)) + 1j * rng.normal(size=(grid.ell_max, 1))
    centre = rng.uniform(0.5, 3.0, size=(grid.ell_max, 1))
    width = rng.uniform(0.5, 1.5, size=(grid.ell_max, 1))
    damp = np.arange(1, grid.ell_max + 1)[:, None] ** -decay
    return scale * amp * damp * np.exp(-((xi - centre) / width) ** 2)


@pytest.fixture(autouse=True)
def _quiet_truncation():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*lorentzian.*")
        yield
