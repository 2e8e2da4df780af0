"""Evolution under L1, B1 = L1 + B1n and B = B1 + B2 on a truncated grid.

One step is Strang split: an exact transport half-step
``u_l(xi) <- u_l(xi + l dt / 2)`` by cubic interpolation (zero inflow at
``xi_max``, outflow at ``xi = 0`` discarded), a classical RK4 step of the
mode-coupling terms, and a second transport half-step.

Field values are handled as arrays of shape ``(..., ell_max, n_xi)``;
leading axes are a batch evolved with the same operator.
"""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, TruncationWarning
from .spectral_core import FieldGrid, SpectralField
from .stationary import StationaryState


class OperatorKind(enum.Enum):
    L1 = "L1"
    B1 = "B1"
    B = "B"


@dataclass(frozen=True, eq=False)
class EvolutionCoefficients:
    """Samples of ``eta`` and ``theta_dot`` at ``t0 + n dt``; linear in between.

    Outside the sampled range the end values are held.
    """

    eta: np.ndarray
    theta_dot: np.ndarray
    dt: float
    t0: float = 0.0

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=complex))
        td = np.atleast_1d(np.asarray(self.theta_dot, dtype=float))
        if eta.shape != td.shape or eta.ndim != 1:
            raise ConfigurationError("eta and theta_dot must share one time grid")
        if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(td))):
            raise ConfigurationError("coefficients must be finite")
        if not self.dt > 0:
            raise ConfigurationError("coefficient spacing dt must be positive")
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "theta_dot", td)

    @classmethod
    def zeros(cls, dt: float = 1.0, n: int = 1) -> "EvolutionCoefficients":
        return cls(np.zeros(n, dtype=complex), np.zeros(n), dt)

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.eta) or np.any(self.theta_dot))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.eta.size)

    def at(self, t: float) -> tuple[complex, float]:
        x = (t - self.t0) / self.dt
        if x <= 0 or self.eta.size == 1:
            return complex(self.eta[0]), float(self.theta_dot[0])
        n = self.eta.size - 1
        if x >= n:
            return complex(self.eta[-1]), float(self.theta_dot[-1])
        i = int(np.floor(x))
        w = x - i
        return (complex((1 - w) * self.eta[i] + w * self.eta[i + 1]),
                float((1 - w) * self.theta_dot[i] + w * self.theta_dot[i + 1]))


@dataclass(frozen=True)
class AlphaCoefficients:
    """Row ``(c_r, c_i)`` of K_Theta, the truncation horizon and its step.

    ``K_norm`` is the operator norm of the 2x2 matrix K_Theta, used by the
    seminorms.
    """

    c_r: float
    c_i: float
    T_alpha: float = 20.0
    dt_alpha: float = 0.01
    K_norm: float = 1.0

    def __post_init__(self):
        if not self.T_alpha >= 10:
            raise ConfigurationError(f"T_alpha must be >= 10, got {self.T_alpha}")
        if not self.dt_alpha > 0:
            raise ConfigurationError("dt_alpha must be positive")
        if not (np.isfinite(self.c_r) and np.isfinite(self.c_i)):
            raise ConfigurationError("alpha coefficients must be finite")
        if self.K_norm < 0:
            raise ConfigurationError("K_norm must be nonnegative")

    @property
    def c(self) -> complex:
        return complex(self.c_r, self.c_i)

    def to_dict(self) -> dict:
        return {"c_r": self.c_r, "c_i": self.c_i, "T_alpha": self.T_alpha,
                "dt_alpha": self.dt_alpha, "K_norm": self.K_norm}


class AlphaValue(float):
    """A truncated time integral carrying its tail estimate."""

    tail: float
    truncated: bool

    def __new__(cls, value, tail=0.0):
        obj = super().__new__(cls, value)
        obj.tail = float(tail)
        obj.truncated = obj.tail > 0.01 * abs(float(value))
        return obj


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """Samples of ``u_1(t, 0)``; a batch trace has shape ``(n_t, *batch)``."""

    t: np.ndarray
    values: np.ndarray

    def to_csv(self, path) -> None:
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise ConfigurationError("only single traces serialize to CSV")
        data = np.column_stack([self.t, v.real, v.imag])
        np.savetxt(path, data, delimiter=",", header="t,re_u1_0,im_u1_0", comments="")

    @classmethod
    def from_csv(cls, path) -> "BoundaryTrace":
        d = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(d[:, 0], d[:, 1] + 1j * d[:, 2])


def lagrange_shift_weights(frac: float) -> np.ndarray:
    """Cubic weights on nodes ``-1, 0, 1, 2`` for the point ``frac`` in [0, 1)."""
    a = frac
    return np.array([-a * (a - 1) * (a - 2) / 6, (a + 1) * (a - 1) * (a - 2) / 2,
                     -(a + 1) * a * (a - 2) / 2, (a + 1) * a * (a - 1) / 6])


def _one_sided_weights(x: float) -> np.ndarray:
    nodes = np.arange(4.0)
    return np.array([np.prod([(x - q) / (p - q) for q in nodes if q != p]) for p in nodes])


def shift_matrix(n: int, shift: float) -> sp.csr_matrix:
    """Sparse ``(S u)_j = u(x_j + shift)`` in grid units, zero beyond the last node."""
    if shift < 0:
        raise ConfigurationError("transport shifts are nonnegative")
    m = int(np.floor(shift))
    frac = shift - m
    j = np.arange(n)
    cols = j[:, None] + m + np.arange(-1, 3)[None, :]
    vals = np.broadcast_to(lagrange_shift_weights(frac), cols.shape).copy()
    if m == 0:
        # node -1 does not exist; one-sided stencil on nodes 0..3 at the first row
        cols[0] = np.arange(4)
        vals[0] = _one_sided_weights(frac)
    keep = (cols < n) & (vals != 0)
    rows = np.broadcast_to(j[:, None], cols.shape)
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n))


def transport_matrix(grid: FieldGrid, tau: float) -> sp.csr_matrix:
    """Block-diagonal transport by ``l * tau`` for every mode ``l``."""
    blocks = [shift_matrix(grid.n_xi, ell * tau / grid.d_xi) for ell in range(1, grid.ell_max + 1)]
    return sp.block_diag(blocks, format="csr")


def _neighbors(w):
    """Neighbours ``w_{l-1}`` and ``w_{l+1}`` along the mode axis 0 (zero closure)."""
    lo = np.empty_like(w)
    hi = np.empty_like(w)
    lo[0] = 0
    lo[1:] = w[:-1]
    hi[-1] = 0
    hi[:-1] = w[1:]
    return lo, hi


def flush_subnormal(w: np.ndarray, floor: float = 1e-250) -> None:
    """Zero entries below ``floor`` in place; subnormal arithmetic is very slow."""
    v = w.view(float) if np.iscomplexobj(w) else w
    v[np.abs(v) < floor] = 0.0


def to_internal(u) -> tuple[np.ndarray, tuple]:
    """``(..., L, n)`` values to the mode-major layout ``(L, n, B)`` used by :class:`Propagator`."""
    u = np.asarray(u)
    batch = u.shape[:-2]
    w = np.moveaxis(u.reshape((-1,) + u.shape[-2:]), 0, -1)
    return np.ascontiguousarray(w, dtype=complex if np.iscomplexobj(u) else float), batch


def from_internal(w: np.ndarray, batch: tuple) -> np.ndarray:
    return np.moveaxis(w, -1, 0).reshape(batch + w.shape[:2])


class Propagator:
    """Split-step solver on a fixed grid and step size.

    ``K`` and ``r_stat`` fix the L1 coupling; ``max_cfl`` bounds
    ``dt * ell_max / d_xi``.  Internally fields are mode-major arrays of
    shape ``(ell_max, n_xi, batch)``; the public methods accept the usual
    ``(..., ell_max, n_xi)`` layout.
    """

    def __init__(self, grid: FieldGrid, dt: float, K: float, r_stat: float,
                 max_cfl: float = 1.0):
        if not dt > 0:
            raise ConfigurationError("dt must be positive")
        if dt * grid.ell_max > grid.d_xi * max_cfl * (1 + 1e-12):
            raise ConfigurationError(
                f"dt={dt} violates dt*ell_max <= d_xi*max_cfl ({grid.d_xi * max_cfl / grid.ell_max:.3e})")
        self.grid = grid
        self.dt = float(dt)
        self.K = float(K)
        self.r_stat = float(r_stat)
        self.max_cfl = max_cfl
        self._T = transport_matrix(grid, 0.5 * dt)
        self._Tt = self._T.T.tocsr()
        ell = np.arange(1, grid.ell_max + 1, dtype=float)[:, None, None]
        self._ell = ell
        self._half_K_ell = 0.5 * self.K * ell
        self._P = self.coupling_polynomial()

    @classmethod
    def for_state(cls, state: StationaryState, dt: float, max_cfl: float = 1.0) -> "Propagator":
        return cls(state.grid, dt, state.K, state.r_stat, max_cfl)

    # building blocks on internal arrays

    def transport(self, w: np.ndarray, adjoint: bool = False) -> np.ndarray:
        M = self._Tt if adjoint else self._T
        L, n, B = w.shape
        if np.iscomplexobj(w):
            return (M @ w.reshape(L * n, B).view(float)).view(complex).reshape(w.shape)
        return (M @ w.reshape(L * n, B)).reshape(w.shape)

    def coupling_L1(self, w: np.ndarray) -> np.ndarray:
        lo, hi = _neighbors(w)
        return (self._half_K_ell * self.r_stat) * (lo - hi)

    def coupling_B1n(self, w: np.ndarray, eta: complex, theta_dot: float) -> np.ndarray:
        lo, hi = _neighbors(w)
        return self._half_K_ell * (np.conj(eta) * lo - eta * hi) - (1j * theta_dot) * self._ell * w

    def coupling_polynomial(self) -> np.ndarray:
        """Matrix of one RK4 step of the L1 coupling, acting on the mode axis."""
        L = self.grid.ell_max
        c = 0.5 * self.K * self.r_stat * np.arange(1, L + 1)
        C = np.zeros((L, L))
        C[np.arange(1, L), np.arange(L - 1)] = c[1:]
        C[np.arange(L - 1), np.arange(1, L)] = -c[:-1]
        hC = self.dt * C
        P = np.eye(L)
        term = np.eye(L)
        for k in range(1, 5):
            term = term @ hC / k
            P = P + term
        return P

    def _apply_P(self, w: np.ndarray, transpose: bool = False) -> np.ndarray:
        P = self._P.T if transpose else self._P
        L = w.shape[0]
        if np.iscomplexobj(w):
            return (P @ w.reshape(L, -1).view(float)).view(complex).reshape(w.shape)
        return (P @ w.reshape(L, -1)).reshape(w.shape)

    def rk4(self, w: np.ndarray, rhs: Callable, t: float) -> np.ndarray:
        dt = self.dt
        k1 = rhs(t, w)
        k2 = rhs(t + dt / 2, w + (dt / 2) * k1)
        k3 = rhs(t + dt / 2, w + (dt / 2) * k2)
        k4 = rhs(t + dt, w + dt * k3)
        return w + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    def stepper(self, kind, coeffs: Optional[EvolutionCoefficients] = None,
                r_theta: Optional[np.ndarray] = None,
                alpha_fn: Optional["AlphaFunctional"] = None) -> Callable:
        """Full-step map ``(t, w) -> w`` of the non-transport part of ``kind``.

        Whenever the coefficients vanish at all RK4 stage times the step is the
        precomputed L1 polynomial, so L1, B1 and B agree bitwise there.
        """
        kind = OperatorKind(kind)
        if kind is OperatorKind.B and (r_theta is None or alpha_fn is None):
            raise ConfigurationError("kind B needs r_Theta and an alpha functional")
        if kind is OperatorKind.L1 or coeffs is None or coeffs.is_zero:
            return lambda t, w: self._apply_P(w)
        rt = None if r_theta is None else np.asarray(r_theta)[:, :, None]

        def rhs(t, w):
            eta, td = coeffs.at(t)
            out = self.coupling_L1(w)
            if eta == 0 and td == 0:
                return out
            b1n = self.coupling_B1n(w, eta, td)
            out = out + b1n
            if kind is OperatorKind.B:
                out = out - alpha_fn.internal(b1n)[None, None, :] * rt
            return out

        dt = self.dt

        def step(t, w):
            stages = [coeffs.at(s) for s in (t, t + dt / 2, t + dt)]
            if all(e == 0 and d == 0 for e, d in stages):
                return self._apply_P(w)
            return self.rk4(w, rhs, t)

        return step

    def strang(self, w: np.ndarray, couple: Callable, t: float) -> np.ndarray:
        """Transport half-step, ``couple(t, w)``, transport half-step."""
        return self.transport(couple(t, self.transport(w)))

    def strang_rhs(self, w: np.ndarray, rhs: Callable, t: float) -> np.ndarray:
        """One split step for ``dw/dt = l d_xi w + rhs(t, w)`` with RK4 for ``rhs``."""
        return self.transport(self.rk4(self.transport(w), rhs, t))

    # stepping on external arrays

    def n_steps(self, t0: float, t1: float) -> int:
        if t1 < t0:
            raise ConfigurationError("t1 must be >= t0")
        n = round((t1 - t0) / self.dt)
        if abs(n * self.dt - (t1 - t0)) > 1e-9 * max(1.0, t1 - t0):
            raise ConfigurationError(f"interval {t1 - t0} is not a multiple of dt={self.dt}")
        return n

    def step_values(self, u: np.ndarray, couple: Callable, t: float = 0.0) -> np.ndarray:
        w, batch = to_internal(np.asarray(u, dtype=complex))
        return from_internal(self.strang(w, couple, t), batch)

    def evolve_values(self, u0: np.ndarray, couple: Callable, t0: float, t1: float):
        """Composite steps; returns ``(u, trace)`` with ``trace[n] = u_1(t0 + n dt, 0)``."""
        n = self.n_steps(t0, t1)
        w, batch = to_internal(np.asarray(u0, dtype=complex))
        trace = np.empty((n + 1, w.shape[-1]), dtype=complex)
        trace[0] = w[0, 0]
        for k in range(n):
            w = self.strang(w, couple, t0 + k * self.dt)
            trace[k + 1] = w[0, 0]
            if k % 64 == 63:
                flush_subnormal(w)
        return from_internal(w, batch), trace.reshape((n + 1,) + batch)

    def step(self, kind, f: SpectralField, coeffs: Optional[EvolutionCoefficients] = None,
             t: float = 0.0, r_theta=None, alpha_fn=None) -> SpectralField:
        self._check_grid(f.grid)
        rt = None if r_theta is None else _values(r_theta)
        return SpectralField(self.grid, self.step_values(
            f.values, self.stepper(kind, coeffs, rt, alpha_fn), t))

    def evolve(self, kind, f0: SpectralField, coeffs: Optional[EvolutionCoefficients] = None,
               t0: float = 0.0, t1: float = 0.0, r_theta=None, alpha_fn=None):
        self._check_grid(f0.grid)
        rt = None if r_theta is None else _values(r_theta)
        u, trace = self.evolve_values(f0.values, self.stepper(kind, coeffs, rt, alpha_fn), t0, t1)
        times = t0 + self.dt * np.arange(trace.shape[0])
        return SpectralField(self.grid, u), BoundaryTrace(times, trace)

    def _check_grid(self, grid):
        if grid != self.grid:
            raise ConfigurationError("field grid differs from the propagator grid")

    def adjoint_step(self, v: np.ndarray) -> np.ndarray:
        """Transpose (not conjugate) of one L1 step on an internal array."""
        return self.transport(self._apply_P(self.transport(v, adjoint=True), transpose=True),
                              adjoint=True)


def _values(f):
    return f.values if isinstance(f, SpectralField) else np.asarray(f)


def trapezoid_time_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n + 1, dt)
    w[0] = w[-1] = dt / 2
    return w


def _tail_estimate(trace: np.ndarray, dt: float) -> np.ndarray:
    """Extrapolated remainder of ``int |trace|`` past the horizon (per batch entry).

    An exponential is fitted to ``|trace|`` over the last tenth of the samples;
    without decay the remainder is taken as ``|trace(T)| * T``.
    """
    mag = np.abs(trace)
    n = mag.shape[0] - 1
    k = max(2, n // 10)
    seg = mag[n - k:]
    t = dt * np.arange(k + 1)
    end = mag[-1]
    with np.errstate(divide="ignore"):
        logs = np.log(np.maximum(seg, 1e-300))
    slope = -np.polyfit(t, logs.reshape(k + 1, -1), 1)[0].reshape(end.shape)
    T = n * dt
    tail = np.where(slope > 1e-12, end / np.maximum(slope, 1e-12), end * T)
    return np.where(end == 0, 0.0, tail)


def boundary_integral(f_values: np.ndarray, ac: AlphaCoefficients, prop: Propagator,
                      absolute: bool = False):
    """``int_0^T (c_r Re + c_i Im) y`` or ``int_0^T |y|``, ``y = (e^{t L1} f)_1(0)``.

    Returns ``(value, tail)``, both with the batch shape of ``f_values``.
    """
    u = np.asarray(f_values, dtype=complex)
    _, trace = prop.evolve_values(u, prop.stepper(OperatorKind.L1), 0.0, ac.T_alpha)
    w = trapezoid_time_weights(trace.shape[0] - 1, prop.dt)
    if absolute:
        integrand = np.abs(trace)
        scale = 1.0
    else:
        integrand = ac.c_r * trace.real + ac.c_i * trace.imag
        scale = abs(ac.c)
    value = np.tensordot(w, integrand, axes=(0, 0))
    tail = scale * _tail_estimate(trace, prop.dt)
    return value, tail


_PROPAGATORS: dict = {}


def alpha_propagator(grid: FieldGrid, K: float, r_stat: float, ac: AlphaCoefficients) -> Propagator:
    """Propagator on ``grid`` with the largest step <= dt_alpha that divides T_alpha and obeys CFL."""
    dt = min(ac.dt_alpha, grid.d_xi / grid.ell_max)
    n = int(np.ceil(ac.T_alpha / dt - 1e-9))
    dt = ac.T_alpha / n
    key = (grid, float(K), float(r_stat), dt)
    if key not in _PROPAGATORS:
        if len(_PROPAGATORS) > 16:
            _PROPAGATORS.clear()
        _PROPAGATORS[key] = Propagator(grid, dt, K, r_stat)
    return _PROPAGATORS[key]


def _warn_tail(value, tail, what):
    if np.any(tail > 0.01 * np.abs(value)):
        warnings.warn(f"{what}: truncation tail {np.max(tail):.3e} exceeds 1% of the value",
                      TruncationWarning, stacklevel=3)


def alpha(f: SpectralField, ac: AlphaCoefficients, state: StationaryState) -> AlphaValue:
    """``alpha(f)`` by forward L1 propagation and trapezoid quadrature of the boundary trace."""
    prop = alpha_propagator(f.grid, state.K, state.r_stat, ac)
    value, tail = boundary_integral(f.values, ac, prop)
    _warn_tail(value, tail, "alpha")
    return AlphaValue(float(value), float(tail))


def seminorm_alpha(f: SpectralField, ac: AlphaCoefficients, state: StationaryState) -> AlphaValue:
    """``beta_alpha(f) = |K_Theta| int_0^T |(e^{t L1} f)_1(0)| dt``."""
    prop = alpha_propagator(f.grid, state.K, state.r_stat, ac)
    value, tail = boundary_integral(f.values, ac, prop, absolute=True)
    value, tail = ac.K_norm * value, ac.K_norm * tail
    _warn_tail(value, tail, "beta_alpha")
    return AlphaValue(float(value), float(tail))


def beta_d_fields(values: np.ndarray) -> np.ndarray:
    """Stack of ``(l u_{l-1})_l``, ``(l u_l)_l`` and ``(l u_{l+1})_l`` (closure ``u_0 = u_{L+1} = 0``)."""
    u = np.asarray(values, dtype=complex)
    ell = np.arange(1, u.shape[-2] + 1, dtype=float)[:, None]
    lo = np.zeros_like(u)
    hi = np.zeros_like(u)
    lo[..., 1:, :] = u[..., :-1, :]
    hi[..., :-1, :] = u[..., 1:, :]
    return np.stack([ell * lo, ell * u, ell * hi], axis=-3)


def seminorm_beta_d(f: SpectralField, ac: AlphaCoefficients, state: StationaryState) -> AlphaValue:
    prop = alpha_propagator(f.grid, state.K, state.r_stat, ac)
    value, tail = boundary_integral(beta_d_fields(f.values), ac, prop, absolute=True)
    value, tail = ac.K_norm * value, ac.K_norm * tail
    i = int(np.argmax(value))
    _warn_tail(value[i], tail[i], "beta_d")
    return AlphaValue(float(value[i]), float(tail[i]))


class AlphaFunctional:
    """``alpha`` as a real-linear functional ``u -> Re(conj(c) <A, u>)``.

    The real array ``A`` is the adjoint-propagated boundary evaluation
    ``sum_n w_n (S^T)^n e_(1,0)`` of the same discrete L1 step used by
    :func:`alpha`, so both agree to rounding error.
    """

    def __init__(self, grid: FieldGrid, K: float, r_stat: float, ac: AlphaCoefficients):
        self.grid = grid
        self.ac = ac
        prop = alpha_propagator(grid, K, r_stat, ac)
        self.dt = prop.dt
        n = prop.n_steps(0.0, ac.T_alpha)
        w = trapezoid_time_weights(n, prop.dt)
        v = np.zeros(grid.shape + (1,))
        v[0, 0] = 1.0
        A = w[0] * v
        for k in range(1, n + 1):
            v = prop.adjoint_step(v)
            A += w[k] * v
            if k % 64 == 0:
                flush_subnormal(v)
        self.representer = A[:, :, 0]
        self._cbar = np.conj(ac.c)

    @classmethod
    def for_state(cls, state: StationaryState, ac: AlphaCoefficients) -> "AlphaFunctional":
        return cls(state.grid, state.K, state.r_stat, ac)

    def __call__(self, u):
        """Alpha of values with shape ``(..., ell_max, n_xi)``."""
        y = np.einsum("lx,...lx->...", self.representer, _values(u))
        out = (self._cbar * y).real
        return float(out) if np.ndim(out) == 0 else out

    def internal(self, w: np.ndarray) -> np.ndarray:
        """Alpha of a mode-major batch ``(ell_max, n_xi, B)``; shape ``(B,)``."""
        y = np.tensordot(self.representer, w, axes=([0, 1], [0, 1]))
        return (self._cbar * y).real


def apply_L2(eta: complex, state: StationaryState) -> SpectralField:
    """``L2 = r_r Re(conj(eta)) + r_i Im(conj(eta))``."""
    eb = np.conj(complex(eta))
    return state.r_r * eb.real + state.r_i * eb.imag


def step(kind, f: SpectralField, coeffs: Optional[EvolutionCoefficients], t: float, dt: float,
         state: StationaryState, alpha_fn: Optional[AlphaFunctional] = None) -> SpectralField:
    """One split step of ``kind``; for ``B`` the state must carry ``r_Theta``."""
    kind = OperatorKind(kind)
    if kind is OperatorKind.B and state.r_Theta is None:
        raise ConfigurationError("kind B requires r_Theta on the state")
    prop = Propagator.for_state(state, dt)
    return prop.step(kind, f, coeffs, t, state.r_Theta, alpha_fn)


def evolve(kind, f0: SpectralField, coeffs: Optional[EvolutionCoefficients], t0: float, t1: float,
           dt: float, state: StationaryState, alpha_fn: Optional[AlphaFunctional] = None):
    kind = OperatorKind(kind)
    if kind is OperatorKind.B and state.r_Theta is None:
        raise ConfigurationError("kind B requires r_Theta on the state")
    prop = Propagator.for_state(state, dt)
    return prop.evolve(kind, f0, coeffs, t0, t1, state.r_Theta, alpha_fn)


__all__ = [
    "OperatorKind", "EvolutionCoefficients", "AlphaCoefficients", "AlphaValue", "BoundaryTrace",
    "Propagator", "AlphaFunctional", "to_internal", "from_internal", "alpha", "seminorm_alpha", "seminorm_beta_d",
    "beta_d_fields", "apply_L2", "step", "evolve", "shift_matrix", "transport_matrix",
    "lagrange_shift_weights", "boundary_integral", "alpha_propagator", "trapezoid_time_weights",
]
