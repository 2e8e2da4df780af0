"""Finite-N Kuramoto oscillators for cross-checking the mean-field solver.

The force is evaluated through the order parameter,
``d theta_i / dt = omega_i + K Im(r e^{-i theta_i})``, so each stage costs O(N).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError
from .stationary import StationaryState

TWO_PI = 2 * np.pi
_SNAP = struct.Struct("<4sqd")


@dataclass(frozen=True, eq=False)
class ParticleEnsemble:
    thetas: np.ndarray
    omegas: np.ndarray
    K: float

    def __post_init__(self):
        th = np.mod(np.asarray(self.thetas, dtype=float), TWO_PI)
        om = np.array(self.omegas, dtype=float)
        if th.ndim != 1 or th.shape != om.shape or th.size < 1:
            raise ConfigurationError("thetas and omegas must be matching 1-d arrays with N >= 1")
        om.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "omegas", om)

    @property
    def N(self) -> int:
        return self.thetas.size

    def to_bytes(self) -> bytes:
        head = _SNAP.pack(b"ENS1", self.N, self.K)
        return head + self.thetas.astype("<f8").tobytes() + self.omegas.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ParticleEnsemble":
        magic, n, K = _SNAP.unpack_from(blob)
        if magic != b"ENS1":
            raise ConfigurationError("not an ensemble snapshot")
        data = np.frombuffer(blob, dtype="<f8", offset=_SNAP.size)
        return cls(data[:n].copy(), data[n:2 * n].copy(), K)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ParticleEnsemble":
        return cls.from_bytes(Path(path).read_bytes())


def order_parameter(e: ParticleEnsemble) -> complex:
    """``r = (1/N) sum_j exp(i theta_j)``."""
    return complex(np.mean(np.exp(1j * e.thetas)))


def _velocity(theta, omega, K):
    z = np.exp(1j * theta)
    r = z.mean()
    return omega + K * (r * np.conj(z)).imag


def _rk4_raw(theta, omega, K, dt):
    k1 = _velocity(theta, omega, K)
    k2 = _velocity(theta + 0.5 * dt * k1, omega, K)
    k3 = _velocity(theta + 0.5 * dt * k2, omega, K)
    k4 = _velocity(theta + dt * k3, omega, K)
    return theta + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def step_rk4(e: ParticleEnsemble, dt: float) -> ParticleEnsemble:
    """One classical RK4 step; angles are wrapped afterwards."""
    return ParticleEnsemble(_rk4_raw(e.thetas, e.omegas, e.K, dt), e.omegas, e.K)


@dataclass(frozen=True, eq=False)
class ParticleTrace:
    t: np.ndarray
    r: np.ndarray

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.t, self.r.real, self.r.imag, np.abs(self.r)]),
                   delimiter=",", header="t,re_r,im_r,abs_r", comments="")

    @classmethod
    def from_csv(cls, path) -> "ParticleTrace":
        d = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(d[:, 0], d[:, 1] + 1j * d[:, 2])


def simulate(e: ParticleEnsemble, T: float, dt: float, record_every: int = 1):
    """Integrate to ``T``; returns the final ensemble and the order-parameter trace."""
    n = int(round(T / dt))
    if n < 0 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ConfigurationError(f"T={T} is not a multiple of dt={dt}")
    theta = e.thetas.copy()
    ts, rs = [0.0], [np.mean(np.exp(1j * theta))]
    for k in range(1, n + 1):
        theta = _rk4_raw(theta, e.omegas, e.K, dt)
        if k % record_every == 0 or k == n:
            ts.append(k * dt)
            rs.append(np.mean(np.exp(1j * theta)))
    return ParticleEnsemble(theta, e.omegas, e.K), ParticleTrace(np.array(ts), np.array(rs))


def sample_from_stationary(state: StationaryState, N: int, seed: int,
                           phase: Optional[Callable] = None,
                           antithetic: bool = False) -> ParticleEnsemble:
    """Draw ``N`` oscillators from the stationary density.

    Locked oscillators (``|omega| <= K r``) sit at ``arcsin(omega / (K r))``.
    Drifting ones are drawn by inverting the angular CDF in closed form:
    with ``psi`` uniform, ``exp(i theta) = exp(i c) (e^{i psi} + q) / (1 + q e^{i psi})``
    where ``c = sign(omega) pi / 2`` and ``q = 1 / (x + sqrt(x^2 - 1))``,
    ``x = |omega| / (K r)``.  ``phase(omega)`` shifts each angle afterwards.

    With ``antithetic`` (symmetric ``g`` only) the second half of the draw
    mirrors the first, ``(theta, omega) -> (-theta, -omega)``, before the
    phase shift.  This removes the O(N^-1/2) mean frequency that otherwise
    makes the whole ensemble rotate.
    """
    if N < 1:
        raise ConfigurationError("N must be >= 1")
    if antithetic and not state.g.symmetric:
        raise ConfigurationError("antithetic sampling needs a symmetric frequency density")
    rng = np.random.default_rng(seed)
    M = (N + 1) // 2 if antithetic else N
    omega = state.g.sample(rng, M)
    psi = rng.uniform(0.0, TWO_PI, M)
    a = state.K * state.r_stat
    theta = np.empty(M)
    locked = np.abs(omega) <= a
    theta[locked] = np.arcsin(omega[locked] / a) if a > 0 else 0.0
    d = ~locked
    if np.any(d):
        if a == 0:
            theta[d] = psi[d]
        else:
            x = np.abs(omega[d]) / a
            q = 1.0 / (x + np.sqrt(x * x - 1.0))
            z = np.exp(1j * psi[d])
            theta[d] = np.sign(omega[d]) * np.pi / 2 + np.angle((z + q) / (1 + q * z))
    if antithetic:
        theta = np.concatenate([theta, -theta])[:N]
        omega = np.concatenate([omega, -omega])[:N]
    if phase is not None:
        theta = theta + phase(omega)
    return ParticleEnsemble(theta, omega, state.K)


def mean_field_order_parameter(eta: np.ndarray, theta: np.ndarray, r_stat: float) -> np.ndarray:
    """``r(t) = e^{-i Theta} (r_stat + eta)`` from a polar-coordinate trace (``eta = conj u_1(0)``)."""
    return np.exp(-1j * np.asarray(theta)) * (r_stat + np.asarray(eta))


def particle_eta(r: np.ndarray, theta: np.ndarray, r_stat: float) -> np.ndarray:
    """Particle analogue of ``eta``, rotated by the mean-field phase ``Theta``."""
    return np.exp(1j * np.asarray(theta)) * np.asarray(r) - r_stat


__all__ = [
    "ParticleEnsemble", "ParticleTrace", "order_parameter", "step_rk4", "simulate",
    "sample_from_stationary", "mean_field_order_parameter", "particle_eta",
]
