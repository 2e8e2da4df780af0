import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kuramoto_landau.errors import ConfigurationError
from kuramoto_landau.spectral_core import FieldGrid, NormSpec, SpectralField, Weight, sobolev_norm
from kuramoto_landau.transport import (AlphaCoefficients, BoundaryTrace, EvolutionCoefficients,
                                       OperatorKind, Propagator, alpha, apply_L2, beta_d_fields,
                                       boundary_integral, evolve, lagrange_shift_weights,
                                       seminorm_alpha, seminorm_beta_d, shift_matrix, step)

from conftest import DT, smooth_field

NORM = NormSpec(Weight(1, 2))


def wiggle(T, dt, amp=0.02):
    t = dt * np.arange(int(round(T / dt)) + 1)
    return EvolutionCoefficients(amp * np.exp(1j * t) / (1 + t), amp * np.sin(2 * t) / (1 + t) ** 2, dt)


class TestShift:
    @pytest.mark.parametrize("frac", [0.0, 0.25, 0.5, 0.9])
    def test_weights_reproduce_cubics(self, frac):
        nodes = np.arange(-1, 3.0)
        w = lagrange_shift_weights(frac)
        for p in range(4):
            assert abs(w @ nodes ** p - frac ** p) < 1e-13

    def test_integer_shift_is_exact(self):
        S = shift_matrix(10, 3.0).toarray()
        x = np.arange(10.0)
        assert np.array_equal(S @ x, np.where(x + 3 < 10, x + 3, 0.0))

    def test_negative_shift_rejected(self):
        with pytest.raises(ConfigurationError):
            shift_matrix(10, -0.5)


class TestStep:
    @pytest.mark.parametrize("kind", list(OperatorKind))
    def test_zero_field(self, full_state, alpha_fn, kind):
        f = SpectralField.zeros(full_state.grid)
        out = step(kind, f, wiggle(1.0, DT), 0.0, DT, full_state, alpha_fn)
        assert np.all(out.values == 0)

    def test_cfl_violation(self, state):
        with pytest.raises(ConfigurationError):
            Propagator.for_state(state, 0.1)

    def test_b1_with_zero_coefficients_is_l1(self, state, rng):
        f = SpectralField(state.grid, smooth_field(rng, state.grid))
        zero = EvolutionCoefficients.zeros(DT, 5)
        a = step("L1", f, None, 0.0, DT, state)
        b = step("B1", f, zero, 0.0, DT, state)
        assert np.array_equal(a.values, b.values)

    def test_b_with_zero_coefficients_is_l1(self, full_state, alpha_fn, rng):
        f = SpectralField(full_state.grid, smooth_field(rng, full_state.grid))
        zero = EvolutionCoefficients.zeros(DT, 5)
        a, _ = evolve("L1", f, None, 0.0, 0.5, DT, full_state)
        b, _ = evolve("B", f, zero, 0.0, 0.5, DT, full_state, alpha_fn)
        assert np.array_equal(a.values, b.values)

    def test_b_requires_r_theta(self, state, rng):
        f = SpectralField(state.grid, smooth_field(rng, state.grid))
        with pytest.raises(ConfigurationError):
            step("B", f, wiggle(1.0, DT), 0.0, DT, state)


class TestPureTransport:
    def test_integer_shifts(self):
        grid = FieldGrid(2, 8.0, 0.1)
        prop = Propagator(grid, 0.2, 0.0, 1.0, max_cfl=4)
        f0 = lambda x: np.exp(-(x - 3) ** 2)
        u0 = np.stack([f0(grid.xi), f0(grid.xi)])
        u, trace = prop.evolve_values(u0, prop.stepper("L1"), 0.0, 2.0)
        t = 0.2 * np.arange(11)
        assert np.allclose(trace, f0(t), atol=1e-15, rtol=0)
        expected = np.where(grid.xi + 4 <= 8.0 + 1e-12, f0(grid.xi + 4), 0.0)
        assert np.allclose(u[1], expected, atol=1e-15, rtol=0)

    def test_fractional_shift_accuracy(self):
        grid = FieldGrid(2, 8.0, 0.005)
        prop = Propagator(grid, 0.0025, 0.0, 1.0)
        f0 = lambda x: np.exp(-(x - 2) ** 2)
        u0 = np.stack([f0(grid.xi), 0 * grid.xi])
        _, trace = prop.evolve_values(u0, prop.stepper("L1"), 0.0, 0.3)
        t = 0.0025 * np.arange(trace.size)
        assert np.max(np.abs(trace - f0(t))) <= 1e-6


class TestEvolve:
    def test_identity(self, state, rng):
        f = SpectralField(state.grid, smooth_field(rng, state.grid))
        g, tr = evolve("L1", f, None, 1.0, 1.0, DT, state)
        assert np.array_equal(g.values, f.values)
        assert tr.values.shape == (1,)

    def test_backwards_rejected(self, state):
        with pytest.raises(ConfigurationError):
            evolve("L1", SpectralField.zeros(state.grid), None, 1.0, 0.5, DT, state)

    @pytest.mark.parametrize("kind", ["L1", "B1"])
    def test_norm_monotone(self, state, rng, kind):
        f = SpectralField(state.grid, 1e-2 * smooth_field(rng, state.grid))
        coeffs = wiggle(5.0, DT) if kind == "B1" else None
        g, _ = evolve(kind, f, coeffs, 0.0, 5.0, DT, state)
        assert sobolev_norm(g, NORM) <= sobolev_norm(f, NORM) * (1 + 1e-6)

    @pytest.mark.parametrize("kind", ["L1", "B1"])
    def test_damping_inequality(self, state, rng, kind):
        T = 5.0
        v = SpectralField(state.grid, smooth_field(rng, state.grid))
        prop = Propagator.for_state(state, DT)
        coeffs = wiggle(T, DT) if kind == "B1" else None
        u, trace = prop.evolve_values(v.values, prop.stepper(kind, coeffs), 0.0, T)
        t = DT * np.arange(trace.size)
        w = np.full(t.size, DT)
        w[[0, -1]] = DT / 2
        bound = sobolev_norm(v, NORM) ** 2 + np.sum(w * np.abs(trace) ** 2 * (1 + t) ** 4)
        lhs = sobolev_norm(SpectralField(state.grid, u), NormSpec(Weight(1 + T, 2))) ** 2
        assert lhs <= bound * (1 + 1e-4)

    def test_alpha_identity_under_B(self, full_state, alpha_fn, ac, rng):
        u0 = SpectralField(full_state.grid, 1e-2 * smooth_field(rng, full_state.grid))
        T = 2.0
        u, tr = evolve("B", u0, wiggle(T, DT, amp=0.05), 0.0, T, DT, full_state, alpha_fn)
        y = tr.values
        w = np.full(y.size, DT)
        w[[0, -1]] = DT / 2
        acc = np.sum(w * (ac.c_r * y.real + ac.c_i * y.imag))
        lhs = alpha_fn(u.values) + acc
        rhs = alpha_fn(u0.values)
        assert abs(lhs - rhs) <= 1e-3 * max(abs(rhs), np.abs(acc))


class TestL2:
    def test_examples(self, state):
        assert np.all(apply_L2(0, state).values == 0)
        assert np.array_equal(apply_L2(0.3, state).values, (state.r_r * 0.3).values)
        assert np.allclose(apply_L2(1j, state).values, -state.r_i.values, atol=0)


class TestAlpha:
    def test_zero(self, state, ac):
        assert alpha(SpectralField.zeros(state.grid), ac, state) == 0.0
        assert seminorm_alpha(SpectralField.zeros(state.grid), ac, state) == 0.0
        assert seminorm_beta_d(SpectralField.zeros(state.grid), ac, state) == 0.0

    @settings(max_examples=5, deadline=None)
    @given(a=st.floats(-3, 3), seed=st.integers(0, 1000))
    def test_real_linearity(self, state, alpha_fn, a, seed):
        rng = np.random.default_rng(seed)
        u = smooth_field(rng, state.grid)
        v = smooth_field(rng, state.grid)
        lhs = alpha_fn(a * u + v)
        rhs = a * alpha_fn(u) + alpha_fn(v)
        assert abs(lhs - rhs) <= 1e-8 * max(1.0, abs(a * alpha_fn(u)), abs(alpha_fn(v)))

    def test_representer_matches_forward(self, state, ac, alpha_fn, rng):
        f = SpectralField(state.grid, smooth_field(rng, state.grid))
        direct = alpha(f, ac, state)
        assert abs(direct - alpha_fn(f.values)) <= 1e-10 * max(1.0, abs(direct))

    def test_r_theta_normalized(self, full_state, alpha_fn):
        assert abs(alpha_fn(full_state.r_Theta.values) - 1) < 1e-6

    def test_tail_reported(self, state, ac, rng):
        f = SpectralField(state.grid, smooth_field(rng, state.grid))
        val = alpha(f, ac, state)
        assert val.tail >= 0

    def test_short_horizon_rejected(self):
        with pytest.raises(ConfigurationError):
            AlphaCoefficients(1.0, 0.0, T_alpha=5.0)


class TestSeminorms:
    def test_beta_alpha_bounds_alpha(self, state, ac, rng):
        f = SpectralField(state.grid, smooth_field(rng, state.grid))
        a = abs(alpha(f, ac, state))
        b = seminorm_alpha(f, ac, state)
        assert a <= b * np.hypot(ac.c_r, ac.c_i) / ac.K_norm * (1 + 1e-12)

    def test_homogeneity(self, state, ac, rng):
        f = SpectralField(state.grid, smooth_field(rng, state.grid))
        assert seminorm_alpha(-2 * f, ac, state) == pytest.approx(2 * seminorm_alpha(f, ac, state), rel=1e-12)
        assert seminorm_beta_d(0.5 * f, ac, state) == pytest.approx(0.5 * seminorm_beta_d(f, ac, state),
                                                                    rel=1e-12)

    def test_beta_d_fields_single_mode(self, state, ac):
        v = np.zeros(state.grid.shape, complex)
        v[1] = np.exp(-state.grid.xi)
        down, diag, up = beta_d_fields(v)
        assert np.flatnonzero(np.abs(down).sum(1)).tolist() == [2]
        assert np.flatnonzero(np.abs(diag).sum(1)).tolist() == [1]
        assert np.flatnonzero(np.abs(up).sum(1)).tolist() == [0]
        f = SpectralField(state.grid, v)
        bd = seminorm_beta_d(f, ac, state)
        assert bd >= seminorm_alpha(SpectralField(state.grid, diag), ac, state) * (1 - 1e-12)


def test_boundary_trace_csv(tmp_path):
    tr = BoundaryTrace(np.linspace(0, 1, 5), np.exp(1j * np.arange(5.0)))
    tr.to_csv(tmp_path / "b.csv")
    back = BoundaryTrace.from_csv(tmp_path / "b.csv")
    assert np.allclose(back.values, tr.values, rtol=1e-15)
    assert (tmp_path / "b.csv").read_text().splitlines()[0] == "t,re_u1_0,im_u1_0"


def test_coefficients_interpolate():
    c = EvolutionCoefficients(np.array([0, 2j]), np.array([0.0, 4.0]), 0.5)
    assert c.at(0.25) == (1j, 2.0)
    assert c.at(9.0) == (2j, 4.0)
    with pytest.raises(ConfigurationError):
        EvolutionCoefficients(np.array([np.nan]), np.array([0.0]), 1.0)
