import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kuramoto_landau.errors import (ConfigurationError, Diverged, PolarCoordinatesBreakdown,
                                    ProjectionFailed)
from kuramoto_landau.nonlinear_sim import (PerturbationRecipe, SimulationConfig, SimulationTrace,
                                           apply_Q, compute_bootstrap, decay_fit_from_series,
                                           fit_decay, initial_theta, project_alpha, rotate, run,
                                           theta_dot)
from kuramoto_landau.spectral_core import SpectralField
from kuramoto_landau.transport import AlphaCoefficients, AlphaFunctional, seminorm_beta_d
from kuramoto_landau.volterra import MatrixKernelTrace, linearized_boundary

from conftest import DT, smooth_field


def bare_trace(t, eta, theta_dot=None):
    n = len(t)
    td = np.zeros(n) if theta_dot is None else theta_dot
    nan = np.full(n, np.nan)
    return SimulationTrace(np.asarray(t, float), np.asarray(eta, complex), np.zeros(n), td,
                           nan, nan.copy(), nan.copy())


class TestRecipes:
    def test_rotation_recipe(self, state):
        f = PerturbationRecipe("rotation", 0.1).build(state)
        assert np.allclose(f.values, np.exp(0.1j * state.grid.ells) * state.fstat_hat.values)

    def test_power_law_modes(self, state):
        f = PerturbationRecipe("power_law", 1e-3).build(state)
        diff = f.values - state.fstat_hat.values
        assert np.all(diff[2:] == 0)
        assert diff[0, 0] == pytest.approx(1e-3)

    def test_unknown_kind(self):
        with pytest.raises(ConfigurationError):
            PerturbationRecipe("kick", 1.0)


class TestInitialTheta:
    def test_stationary(self, full_state, ac, alpha_fn):
        th, u0 = initial_theta(full_state.fstat_hat, full_state, ac, alpha_fn)
        assert th == 0.0 and np.all(u0.values == 0)

    def test_pure_rotation(self, full_state, ac, alpha_fn):
        # a rotation is far from f_stat in norm, so the size warning fires
        with pytest.warns(UserWarning, match="not small"):
            th, u0 = initial_theta(rotate(full_state.fstat_hat, 0.05), full_state, ac, alpha_fn)
        assert abs(th - 0.05) < 1e-6
        assert np.abs(u0.values).max() <= 1e-6

    def test_generic_perturbation(self, full_state, ac, alpha_fn, rng):
        f = full_state.fstat_hat + SpectralField(full_state.grid, 1e-3 * smooth_field(rng, full_state.grid))
        th, u0 = initial_theta(f, full_state, ac, alpha_fn)
        nrm = np.linalg.norm(u0.values)
        assert abs(alpha_fn(u0.values)) <= 1e-8 * nrm
        # independent evaluation on twice the horizon
        long = AlphaFunctional.for_state(full_state, AlphaCoefficients(ac.c_r, ac.c_i, 2 * ac.T_alpha,
                                                                       ac.dt_alpha, ac.K_norm))
        assert abs(long(u0.values)) <= 1e-8 * nrm

    def test_large_rotation_fails(self, full_state, ac, alpha_fn):
        with pytest.raises(ProjectionFailed), pytest.warns(UserWarning):
            initial_theta(rotate(full_state.fstat_hat, 1.2), full_state, ac, alpha_fn)


class TestThetaDot:
    def test_zero(self, full_state, ac, alpha_fn):
        assert theta_dot(SpectralField.zeros(full_state.grid), full_state, ac, alpha_fn) == 0.0

    def test_no_order_parameter(self, full_state, ac, alpha_fn, rng):
        v = smooth_field(rng, full_state.grid)
        v[0, 0] = 0
        assert theta_dot(SpectralField(full_state.grid, v), full_state, ac, alpha_fn) == 0.0

    def test_breakdown(self, full_state, ac, alpha_fn):
        with pytest.raises(PolarCoordinatesBreakdown):
            theta_dot(-0.6 * full_state.fstat_hat, full_state, ac, alpha_fn)

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_bound(self, full_state, ac, alpha_fn, seed):
        u = SpectralField(full_state.grid, 1e-3 * smooth_field(np.random.default_rng(seed), full_state.grid))
        td = theta_dot(u, full_state, ac, alpha_fn)
        alpha_rot = alpha_fn(full_state.rot_mode.values)
        eta = abs(u.values[0, 0])
        bound = full_state.K * eta * seminorm_beta_d(u, ac, full_state) / (0.5 * abs(alpha_rot))
        assert abs(td) <= bound

    def test_apply_Q_example(self, small_grid):
        v = np.zeros(small_grid.shape, complex)
        v[0, 0] = 2.0
        v[1] = 1.0
        q = apply_Q(SpectralField(small_grid, v), 1.0).values
        # l = 1: -(1/2) conj(2) u_2; l = 3: (3/2) * 2 * u_2
        assert np.allclose(q[0], -1.0)
        assert np.allclose(q[2], 3.0)


class TestRun:
    def test_zero_data(self, full_state, ac, alpha_fn):
        cfg = SimulationConfig(full_state, ac, 1.0, DT, u_init=SpectralField.zeros(full_state.grid))
        tr = run(cfg, alpha_fn)
        assert np.all(tr.eta == 0) and np.all(tr.theta_dot == 0) and np.all(tr.theta == 0)
        assert np.all(tr.R_d == 0)

    def test_rotation_data_is_flat(self, full_state, ac, alpha_fn):
        cfg = SimulationConfig(full_state, ac, 1.0, DT, f_init=PerturbationRecipe("rotation", 0.05),
                               perturbation_warn=1.0)
        tr = run(cfg, alpha_fn)
        assert abs(tr.meta["theta0"] - 0.05) < 1e-6
        assert np.abs(tr.eta).max() < 1e-6
        assert np.ptp(tr.theta) < 1e-9

    def test_small_perturbation_invariants(self, full_state, ac, alpha_fn):
        cfg = SimulationConfig(full_state, ac, 5.0, DT, f_init=PerturbationRecipe("power_law", 1e-3))
        tr = run(cfg, alpha_fn)
        assert tr.meta["alpha_preserved"]
        assert np.all(np.diff(tr.R_d) >= 0)
        step = np.abs(np.diff(tr.theta))
        bound = 0.5 * DT * (np.abs(tr.theta_dot[1:]) + np.abs(tr.theta_dot[:-1]))
        assert np.all(step <= bound * (1 + 1e-3) + 1e-18)
        assert abs(tr.eta[-1]) < abs(tr.eta).max()

    def test_linear_run_matches_volterra(self, full_state, ac, alpha_fn, spectrum, rng):
        u0 = SpectralField(full_state.grid, 1e-4 * smooth_field(rng, full_state.grid))
        T = 10.0
        cfg = SimulationConfig(full_state, ac, T, DT, u_init=u0, nonlinear=False)
        tr = run(cfg, alpha_fn)
        n = int(round(T / DT)) + 1
        k = MatrixKernelTrace(DT, spectrum.kernel.samples[:n])
        x = linearized_boundary(full_state, u0.values, k, spectrum.resolvent)
        sim = np.column_stack([tr.eta.real, -tr.eta.imag])
        assert np.abs(sim - x).max() <= 1e-4 * np.abs(x).max()

    def test_divergence_guard(self, full_state, ac, alpha_fn, rng):
        u0 = SpectralField(full_state.grid, 1e-3 * smooth_field(rng, full_state.grid))
        cfg = SimulationConfig(full_state, ac, 1.0, DT, u_init=u0, max_growth=1e-3)
        with pytest.raises(Diverged):
            run(cfg, alpha_fn)

    def test_config_validation(self, full_state, state, ac):
        z = SpectralField.zeros(full_state.grid)
        with pytest.raises(ConfigurationError):
            SimulationConfig(full_state, ac, 1.0, DT)
        with pytest.raises(ConfigurationError):
            SimulationConfig(state, ac, 1.0, DT, u_init=z)
        with pytest.warns(UserWarning, match="3/2"):
            SimulationConfig(full_state, ac, 1.0, DT, u_init=z, b=1.0)

    def test_csv(self, tmp_path, full_state, ac, alpha_fn):
        cfg = SimulationConfig(full_state, ac, 0.5, DT, f_init=PerturbationRecipe("power_law", 1e-3))
        tr = run(cfg, alpha_fn)
        tr.to_csv(tmp_path / "trace.csv")
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0] == "t,re_eta,im_eta,abs_eta,theta,theta_dot,norm_pb,beta_d,M_d,R_d"
        assert len(lines) == tr.t.size + 1


def test_projection_zeroes_alpha(full_state, alpha_fn, rng):
    w = SpectralField(full_state.grid, smooth_field(rng, full_state.grid))
    assert abs(alpha_fn(project_alpha(w, full_state, alpha_fn).values)) < 1e-12


class TestFit:
    def test_exact_power_law(self):
        t = np.linspace(0, 100, 2001)
        fit = fit_decay(bare_trace(t, (1 + t) ** -1.5), b=2.0)
        assert abs(fit.exponent + 1.5) < 1e-6
        assert fit.t_lo >= 0.1 * t[-1]
        assert fit.predicted == -1.5

    @settings(max_examples=10, deadline=None)
    @given(seed=st.integers(0, 10 ** 6), p=st.floats(0.5, 3.0))
    def test_noisy_power_law(self, seed, p):
        rng = np.random.default_rng(seed)
        t = np.linspace(0, 100, 2001)
        y = (1 + t) ** -p * (1 + 0.01 * rng.normal(size=t.size))
        fit = decay_fit_from_series(t, y, 2.0, (20.0, 90.0))
        assert abs(fit.exponent + p) < 0.05

    def test_zero_trace_degenerate(self):
        t = np.linspace(0, 10, 11)
        fit = fit_decay(bare_trace(t, np.zeros(11)), b=2.0)
        assert fit.degenerate and fit.exponent is None

    def test_underflow_window(self):
        t = np.linspace(0, 100, 1001)
        y = (1 + t) ** -2.0
        y[t > 60] = 0.0
        fit = fit_decay(bare_trace(t, y), b=2.0)
        assert abs(fit.exponent + 2.0) < 1e-6
        assert fit.t_hi <= 60

    def test_theta_dot_exponent(self):
        t = np.linspace(0, 100, 1001)
        fit = fit_decay(bare_trace(t, (1 + t) ** -1.5, (1 + t) ** -2.0), b=2.0)
        assert abs(fit.theta_dot_exponent + 2.0) < 1e-6


class TestBootstrap:
    def test_zero(self):
        tr = compute_bootstrap(bare_trace(np.linspace(0, 1, 5), np.zeros(5)), 2.0, 1.5)
        assert np.all(tr.R_d == 0)

    def test_decaying_with_zero_exponent(self):
        t = np.linspace(0, 5, 51)
        tr = compute_bootstrap(bare_trace(t, np.exp(-t)), 2.0, 0.0)
        assert np.all(tr.R_d == tr.M_d[0])

    def test_exact_cancellation(self):
        t = np.linspace(0, 5, 51)
        tr = compute_bootstrap(bare_trace(t, 0.5 * (1 + t) ** -1.5), 2.0, 1.5)
        assert np.allclose(tr.R_d, 1.0, rtol=1e-14)
