import numpy as np
import pytest
from scipy.integrate import solve_ivp

from kuramoto_landau.particle import (ParticleEnsemble, ParticleTrace, mean_field_order_parameter,
                                      order_parameter, particle_eta, sample_from_stationary,
                                      simulate, step_rk4)
from kuramoto_landau.stationary import VelocityDistribution, stationary_state
from kuramoto_landau.spectral_core import FieldGrid


@pytest.fixture(scope="module")
def coarse_state():
    return stationary_state(2.0, VelocityDistribution("gaussian", 0.5), FieldGrid(4, 4.0, 0.25))


class TestEnsemble:
    def test_wrapping_and_frozen_frequencies(self):
        e = ParticleEnsemble(np.array([-0.5, 7.0]), np.array([1.0, 2.0]), 1.0)
        assert np.all((e.thetas >= 0) & (e.thetas < 2 * np.pi))
        with pytest.raises(ValueError):
            e.omegas[0] = 3.0

    def test_snapshot_roundtrip(self, tmp_path, rng):
        e = ParticleEnsemble(rng.uniform(0, 6, 50), rng.normal(size=50), 1.7)
        e.save(tmp_path / "ens.bin")
        back = ParticleEnsemble.load(tmp_path / "ens.bin")
        assert np.array_equal(back.thetas, e.thetas) and np.array_equal(back.omegas, e.omegas)
        assert back.K == e.K and back.N == 50


class TestOrderParameter:
    def test_aligned(self):
        assert order_parameter(ParticleEnsemble(np.zeros(7), np.zeros(7), 1.0)) == 1

    def test_roots_of_unity(self):
        e = ParticleEnsemble(np.arange(4) * np.pi / 2, np.zeros(4), 1.0)
        assert abs(order_parameter(e)) < 1e-15

    @pytest.mark.parametrize("seed", range(10))
    def test_incoherent_scale(self, seed):
        rng = np.random.default_rng(seed)
        e = ParticleEnsemble(rng.uniform(0, 2 * np.pi, 10 ** 6), np.zeros(10 ** 6), 1.0)
        assert abs(order_parameter(e)) < 5e-3


class TestStep:
    def test_single_oscillator_drifts(self):
        e = ParticleEnsemble(np.array([0.3]), np.array([0.7]), 5.0)
        out, _ = simulate(e, 10.0, 0.01)
        assert abs(out.thetas[0] - np.mod(0.3 + 7.0, 2 * np.pi)) < 1e-9

    def test_synchronized_manifold(self):
        e = ParticleEnsemble(np.full(5, 1.1), np.full(5, 0.4), 2.0)
        out, tr = simulate(e, 5.0, 0.05)
        assert np.ptp(out.thetas) == 0
        assert np.allclose(np.abs(tr.r), 1.0, atol=1e-15)

    def test_two_oscillators_against_reference(self):
        delta, K = 0.3, 2.0
        th0 = np.array([0.1, 2.0])
        om = np.array([delta, -delta])

        def f(t, y):
            return om + 0.5 * K * np.array([np.sin(y[1] - y[0]), np.sin(y[0] - y[1])])

        ref = solve_ivp(f, (0, 5), th0, method="DOP853", rtol=1e-13, atol=1e-13).y[:, -1]
        e = ParticleEnsemble(th0, om, K)
        for _ in range(1000):
            e = step_rk4(e, 0.005)
        diff = np.angle(np.exp(1j * (e.thetas - ref)))
        assert np.max(np.abs(diff)) < 1e-8

    def test_trace_csv(self, tmp_path):
        tr = ParticleTrace(np.linspace(0, 1, 4), np.exp(1j * np.arange(4.0)) * 0.5)
        tr.to_csv(tmp_path / "r.csv")
        back = ParticleTrace.from_csv(tmp_path / "r.csv")
        assert np.allclose(back.r, tr.r, rtol=1e-15)
        assert (tmp_path / "r.csv").read_text().splitlines()[0] == "t,re_r,im_r,abs_r"


class TestSampling:
    def test_order_parameter_matches(self, coarse_state):
        N = 10 ** 6
        e = sample_from_stationary(coarse_state, N, seed=3)
        assert abs(order_parameter(e) - coarse_state.r_stat) < 3 / np.sqrt(N)

    def test_locked_range(self, coarse_state):
        e = sample_from_stationary(coarse_state, 10 ** 4, seed=1)
        a = coarse_state.K * coarse_state.r_stat
        locked = np.abs(e.omegas) <= a
        th = np.angle(np.exp(1j * e.thetas[locked]))
        assert locked.any() and np.all(np.abs(th) < np.pi / 2)

    def test_seed_determinism(self, coarse_state):
        a = sample_from_stationary(coarse_state, 1000, seed=11)
        b = sample_from_stationary(coarse_state, 1000, seed=11)
        c = sample_from_stationary(coarse_state, 1000, seed=12)
        assert np.array_equal(a.thetas, b.thetas) and np.array_equal(a.omegas, b.omegas)
        assert not np.array_equal(a.thetas, c.thetas)

    def test_drifting_density(self, coarse_state):
        # drifting oscillators at fixed omega have density proportional to 1/|omega - a sin theta|
        e = sample_from_stationary(coarse_state, 2 * 10 ** 5, seed=4)
        a = coarse_state.K * coarse_state.r_stat
        drift = np.abs(e.omegas) > a
        om, th = e.omegas[drift], e.thetas[drift]
        # E[cos theta] vanishes and E[sin theta] = (omega - sqrt(omega^2 - a^2)) / a per omega
        expect = (om - np.sign(om) * np.sqrt(om ** 2 - a * a)) / a
        assert abs(np.mean(np.cos(th))) < 5 / np.sqrt(om.size)
        assert abs(np.mean(np.sin(th) - expect)) < 5 / np.sqrt(om.size)

    def test_antithetic_pairs(self, coarse_state):
        e = sample_from_stationary(coarse_state, 1000, seed=2, antithetic=True)
        assert abs(e.omegas.mean()) < 1e-15

    def test_phase_shift(self, coarse_state):
        base = sample_from_stationary(coarse_state, 1000, seed=5)
        moved = sample_from_stationary(coarse_state, 1000, seed=5, phase=lambda om: 0.2 + 0 * om)
        assert np.allclose(np.exp(1j * moved.thetas), np.exp(1j * (base.thetas + 0.2)))


def test_eta_conversions_roundtrip(rng):
    eta = 1e-2 * (rng.normal(size=5) + 1j * rng.normal(size=5))
    theta = rng.normal(size=5)
    r = mean_field_order_parameter(eta, theta, 0.9)
    assert np.allclose(particle_eta(r, theta, 0.9), eta, atol=1e-15)
    assert np.allclose(mean_field_order_parameter(np.zeros(1), np.zeros(1), 0.9), 0.9)
