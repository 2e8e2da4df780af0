"""Nonlinear perturbation dynamics in polar coordinates ``f = R_Theta (f_stat + u)``.

``u`` evolves by ``du/dt = L1 u + L2 u + Q(u) - Theta_dot (D R f_stat + D R u)``
with ``Theta_dot = alpha(Q u) / (alpha(D R f_stat) + alpha(D R u))``, which keeps
``alpha(u) = 0``.  Time stepping reuses the transport splitting.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import optimize

from .errors import (ConfigurationError, Diverged, PolarCoordinatesBreakdown,
                     ProjectionFailed)
from .spectral_core import FieldGrid, NormSpec, SpectralField, Weight, sobolev_norm_values
from .stationary import StationaryState, build_fstat_fourier
from .transport import (AlphaCoefficients, AlphaFunctional, Propagator, beta_d_fields,
                        boundary_integral, alpha_propagator, flush_subnormal, from_internal,
                        to_internal)


def rotate(f: SpectralField, theta: float) -> SpectralField:
    """``(R_Theta f)_l = e^{i l Theta} f_l``."""
    return SpectralField(f.grid, np.exp(1j * theta * f.grid.ells) * f.values)


@dataclass(frozen=True)
class PerturbationRecipe:
    """Initial distribution ``f_init`` built from the stationary state.

    kinds:
      ``rotation``     f_init = R_amplitude f_stat
      ``phase_shift``  every oscillator moved by ``amplitude * exp(-omega^2 / (2 width^2))``
      ``power_law``    f_stat + amplitude (1 + xi)^(-decay) on modes 1 and 2
    """

    kind: str
    amplitude: float
    width: float = 0.5
    decay: float = 2.75

    def __post_init__(self):
        if self.kind not in ("rotation", "phase_shift", "power_law"):
            raise ConfigurationError(f"unknown perturbation kind {self.kind!r}")

    def phase(self):
        if self.kind != "phase_shift":
            return None
        return lambda om: self.amplitude * np.exp(-0.5 * (np.asarray(om) / self.width) ** 2)

    def build(self, state: StationaryState, grid: Optional[FieldGrid] = None) -> SpectralField:
        grid = grid or state.grid
        fstat = state.fstat_hat if grid == state.grid else build_fstat_fourier(
            state.r_stat, state.K, state.g, grid)
        if self.kind == "rotation":
            return rotate(fstat, self.amplitude)
        if self.kind == "phase_shift":
            return build_fstat_fourier(state.r_stat, state.K, state.g, grid, phase=self.phase())
        bump = (1 + grid.xi) ** (-self.decay)
        vals = fstat.values.copy()
        vals[0] += self.amplitude * bump
        vals[1] += 0.5j * self.amplitude * bump
        return SpectralField(grid, vals)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "amplitude": self.amplitude, "width": self.width,
                "decay": self.decay}


@dataclass(eq=False)
class SimulationConfig:
    """One nonlinear run.

    ``f_init`` is the full initial Fourier profile (or a recipe); it is
    projected by ``initial_theta``.  Passing ``u_init`` instead skips the
    projection and starts from ``Theta = 0``.  ``nonlinear=False`` drops
    ``Q`` and ``Theta_dot`` (the linearized PDE on the same solver).
    """

    state: StationaryState
    ac: AlphaCoefficients
    T: float
    dt: float
    f_init: Union[SpectralField, PerturbationRecipe, None] = None
    u_init: Optional[SpectralField] = None
    b: float = 2.0
    b_d: Optional[float] = None
    n_diag: int = 10
    beta_every: Optional[int] = None
    nonlinear: bool = True
    max_growth: float = 1e3
    perturbation_warn: float = 0.1
    max_cfl: float = 1.0

    def __post_init__(self):
        if (self.f_init is None) == (self.u_init is None):
            raise ConfigurationError("give exactly one of f_init and u_init")
        if self.state.r_Theta is None:
            raise ConfigurationError("the state needs r_Theta (run the spectrum step first)")
        if self.b <= 1.5:
            warnings.warn(f"b = {self.b} <= 3/2: no power-law decay guarantee",
                          stacklevel=2)
        if not self.T > 0 or not self.dt > 0:
            raise ConfigurationError("T and dt must be positive")
        if self.n_diag < 1:
            raise ConfigurationError("n_diag must be >= 1")

    @property
    def grid(self) -> FieldGrid:
        return self.state.grid

    @property
    def bootstrap_exponent(self) -> float:
        return self.b - 0.5 if self.b_d is None else self.b_d


@dataclass(eq=False)
class SimulationTrace:
    """Per-step samples; ``eta`` is ``conj(u_1(t, 0))``.

    ``norm_pb``, ``alpha_u`` and ``beta_d`` are NaN between diagnostic samples.
    """

    t: np.ndarray
    eta: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    norm_pb: np.ndarray
    beta_d: np.ndarray
    alpha_u: np.ndarray
    M_d: np.ndarray = None
    R_d: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def abs_eta(self) -> np.ndarray:
        return np.abs(self.eta)

    def diag_mask(self) -> np.ndarray:
        return np.isfinite(self.norm_pb)

    def alpha_violations(self, floor: float = 1e-6, rel: float = 1e-3) -> np.ndarray:
        """Diagnostic samples where ``|alpha(u)| > max(floor, rel |u|)``."""
        m = self.diag_mask()
        bound = np.maximum(floor, rel * self.norm_pb[m])
        return self.t[m][np.abs(self.alpha_u[m]) > bound]

    def to_csv(self, path) -> None:
        cols = [self.t, self.eta.real, self.eta.imag, self.abs_eta, self.theta, self.theta_dot,
                self.norm_pb, self.beta_d, self.M_d, self.R_d]
        np.savetxt(path, np.column_stack(cols), delimiter=",", comments="",
                   header="t,re_eta,im_eta,abs_eta,theta,theta_dot,norm_pb,beta_d,M_d,R_d")


@dataclass(frozen=True)
class DecayFit:
    exponent: Optional[float]
    amplitude: Optional[float]
    t_lo: float
    t_hi: float
    residual: Optional[float]
    theta_dot_exponent: Optional[float] = None
    predicted: Optional[float] = None
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("exponent", "amplitude", "t_lo", "t_hi", "residual",
                                              "theta_dot_exponent", "predicted", "degenerate")}


class _Dynamics:
    """Right-hand side pieces on mode-major arrays ``(L, n, 1)``."""

    def __init__(self, state: StationaryState, prop: Propagator, alpha_fn: AlphaFunctional,
                 nonlinear: bool = True):
        self.prop = prop
        self.alpha_fn = alpha_fn
        self.nonlinear = nonlinear
        self.r_r = to_internal(state.r_r.values)[0]
        self.r_i = to_internal(state.r_i.values)[0]
        self.rot = to_internal(state.rot_mode.values)[0]
        self.alpha_rot = float(alpha_fn.internal(self.rot)[0])
        self.ell = prop._ell

    def theta_dot(self, w: np.ndarray) -> float:
        eb = w[0, 0, 0]
        if eb == 0:
            return 0.0
        q = self.prop.coupling_B1n(w, np.conj(eb), 0.0)
        den = self.alpha_rot + float(self.alpha_fn.internal(1j * self.ell * w)[0])
        if not abs(den) > 0.5 * abs(self.alpha_rot):
            raise PolarCoordinatesBreakdown(
                f"alpha(D R f_stat) + alpha(D R u) = {den:.3e} below half of {self.alpha_rot:.3e}")
        return float(self.alpha_fn.internal(q)[0]) / den

    def rhs(self, t: float, w: np.ndarray) -> np.ndarray:
        eb = w[0, 0, 0]
        out = self.prop.coupling_L1(w) + eb.real * self.r_r + eb.imag * self.r_i
        if self.nonlinear:
            td = self.theta_dot(w)
            out = out + self.prop.coupling_B1n(w, np.conj(eb), td) - td * self.rot
        return out


def initial_theta(f_init_hat: SpectralField, state: StationaryState, ac: AlphaCoefficients,
                  alpha_fn: Optional[AlphaFunctional] = None, warn_above: float = 0.1,
                  b: float = 2.0):
    """Angle ``Theta`` with ``alpha(R_{-Theta} f_init - f_stat) = 0`` on ``[-pi/4, pi/4]``.

    Returns ``(Theta, u0)``.
    """
    alpha_fn = alpha_fn or AlphaFunctional.for_state(state, ac)
    fstat = state.fstat_hat
    spec = NormSpec(Weight(1.0, b))
    dev = sobolev_norm_values((f_init_hat - fstat).values, state.grid, spec)
    if dev > warn_above:
        warnings.warn(f"initial perturbation norm {dev:.3e} is not small", stacklevel=2)
    G = lambda th: alpha_fn((rotate(f_init_hat, -th) - fstat).values)
    if np.all(f_init_hat.values == fstat.values):
        return 0.0, SpectralField.zeros(state.grid)
    lo, hi = -np.pi / 4, np.pi / 4
    g_lo, g_hi = G(lo), G(hi)
    if g_lo * g_hi > 0:
        raise ProjectionFailed(
            f"alpha(R_-Theta f_init - f_stat) has no sign change on [-pi/4, pi/4] "
            f"({g_lo:.3e}, {g_hi:.3e}); perturbation too large")
    theta = optimize.brentq(G, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    u0 = rotate(f_init_hat, -theta) - fstat
    return float(theta), u0


def theta_dot(u: SpectralField, state: StationaryState, ac: AlphaCoefficients,
              alpha_fn: Optional[AlphaFunctional] = None) -> float:
    """``alpha(Q u) / (alpha(D R f_stat) + alpha(D R u))``."""
    alpha_fn = alpha_fn or AlphaFunctional.for_state(state, ac)
    prop = Propagator.for_state(state, min(ac.dt_alpha, state.grid.d_xi / state.grid.ell_max))
    dyn = _Dynamics(state, prop, alpha_fn)
    return dyn.theta_dot(to_internal(u.values)[0])


def apply_Q(u: SpectralField, K: float) -> SpectralField:
    """``(Q u)_l = (K l / 2)(u_1(0) u_{l-1} - conj(u_1(0)) u_{l+1})``."""
    v = u.values
    eb = v[0, 0]
    lo = np.zeros_like(v)
    hi = np.zeros_like(v)
    lo[1:] = v[:-1]
    hi[:-1] = v[1:]
    return SpectralField(u.grid, 0.5 * K * u.grid.ells * (eb * lo - np.conj(eb) * hi))


def project_alpha(w: SpectralField, state: StationaryState, alpha_fn: AlphaFunctional) -> SpectralField:
    """Linear projection ``w - alpha(w) r_Theta`` onto ``alpha = 0``."""
    return w - state.r_Theta * alpha_fn(w.values)


def beta_d_value(w_int: np.ndarray, prop_alpha: Propagator, ac: AlphaCoefficients, batch) -> float:
    vals = beta_d_fields(from_internal(w_int, batch))
    value, _ = boundary_integral(vals, ac, prop_alpha, absolute=True)
    return float(ac.K_norm * np.max(value))


def run(config: SimulationConfig, alpha_fn: Optional[AlphaFunctional] = None) -> SimulationTrace:
    """Integrate ``(Theta, u)`` to ``config.T`` and record the trace."""
    st, ac = config.state, config.ac
    grid = config.grid
    alpha_fn = alpha_fn or AlphaFunctional.for_state(st, ac)
    prop = Propagator.for_state(st, config.dt, config.max_cfl)
    prop_alpha = alpha_propagator(grid, st.K, st.r_stat, ac)
    dyn = _Dynamics(st, prop, alpha_fn, config.nonlinear)
    spec = NormSpec(Weight(1.0, config.b))

    if config.u_init is not None:
        theta0, u0 = 0.0, config.u_init
    else:
        f_init = config.f_init.build(st) if isinstance(config.f_init, PerturbationRecipe) else config.f_init
        theta0, u0 = initial_theta(f_init, st, ac, alpha_fn, config.perturbation_warn, config.b)

    n = prop.n_steps(0.0, config.T)
    beta_every = config.beta_every or 50 * config.n_diag
    t = prop.dt * np.arange(n + 1)
    eta = np.empty(n + 1, dtype=complex)
    theta = np.empty(n + 1)
    td = np.empty(n + 1)
    norm = np.full(n + 1, np.nan)
    beta = np.full(n + 1, np.nan)
    alpha_u = np.full(n + 1, np.nan)

    w, batch = to_internal(u0.values)
    w = w.astype(complex)

    def diagnostics(k):
        u_vals = from_internal(w, batch)
        norm[k] = float(sobolev_norm_values(u_vals, grid, spec))
        alpha_u[k] = float(alpha_fn.internal(w)[0])
        if k % beta_every == 0:
            beta[k] = beta_d_value(w, prop_alpha, ac, batch)

    eta[0] = np.conj(w[0, 0, 0])
    theta[0] = theta0
    td[0] = dyn.theta_dot(w) if config.nonlinear else 0.0
    diagnostics(0)
    norm0 = max(norm[0], 1e-300)
    for k in range(n):
        w = prop.strang_rhs(w, dyn.rhs, t[k])
        if k % 64 == 63:
            flush_subnormal(w)
        eta[k + 1] = np.conj(w[0, 0, 0])
        td[k + 1] = dyn.theta_dot(w) if config.nonlinear else 0.0
        theta[k + 1] = theta[k] + 0.5 * prop.dt * (td[k] + td[k + 1])
        if (k + 1) % config.n_diag == 0 or k + 1 == n:
            diagnostics(k + 1)
            if not np.isfinite(norm[k + 1]) or norm[k + 1] > config.max_growth * norm0:
                raise Diverged(f"norm {norm[k + 1]:.3e} at t={t[k + 1]:.3f} exceeds "
                               f"{config.max_growth:g} x initial {norm0:.3e}")
    trace = SimulationTrace(t, eta, theta, td, norm, beta, alpha_u)
    trace.meta.update({"theta0": theta0, "u0_norm": float(norm[0]), "nonlinear": config.nonlinear,
                       "b": config.b, "b_d": config.bootstrap_exponent, "dt": prop.dt,
                       "T": config.T, "final_u": from_internal(w, batch)})
    compute_bootstrap(trace, st.K, config.bootstrap_exponent)
    viol = trace.alpha_violations()
    trace.meta["alpha_preserved"] = bool(viol.size == 0)
    trace.meta["alpha_max"] = float(np.nanmax(np.abs(alpha_u)))
    return trace


def compute_bootstrap(trace: SimulationTrace, K: float, b_d: float) -> SimulationTrace:
    """``M_d = K |eta| + |Theta_dot|`` and ``R_d(t) = sup_{s <= t} (1 + s)^{b_d} M_d(s)``."""
    trace.M_d = K * np.abs(trace.eta) + np.abs(trace.theta_dot)
    trace.R_d = np.maximum.accumulate((1 + trace.t) ** b_d * trace.M_d)
    return trace


def _power_fit(t, y):
    x = np.log1p(t)
    ly = np.log(y)
    A = np.column_stack([x, np.ones_like(x)])
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - ly) ** 2)))
    return float(coef[0]), float(np.exp(coef[1])), resid


def fit_decay(trace: SimulationTrace, b: float, window: Optional[tuple] = None,
              floor: float = 1e-14) -> DecayFit:
    """Least-squares fit of ``log |eta|`` against ``log(1 + t)`` on the window.

    Default window ``[0.2 T, 0.9 T]``.  Samples after ``|eta|`` first drops
    below ``floor`` are excluded; too few remaining samples give a degenerate fit.
    """
    T = trace.t[-1]
    t_lo, t_hi = window if window is not None else (0.2 * T, 0.9 * T)
    y = np.abs(trace.eta)
    under = np.nonzero(y < floor)[0]
    stop = under[0] if under.size else y.size
    m = (trace.t >= t_lo) & (trace.t <= t_hi) & (np.arange(y.size) < stop)
    pred = 0.5 - b
    if m.sum() < 3:
        return DecayFit(None, None, t_lo, t_hi, None, None, pred, True)
    e, a, res = _power_fit(trace.t[m], y[m])
    tdv = np.abs(trace.theta_dot)
    mt = m & (tdv > floor * 1e-6)
    te = _power_fit(trace.t[mt], tdv[mt])[0] if mt.sum() >= 3 else None
    return DecayFit(e, a, float(trace.t[m][0]), float(trace.t[m][-1]), res, te, pred, False)


def decay_fit_from_series(t: np.ndarray, y: np.ndarray, b: float, window: tuple) -> DecayFit:
    """Power-law fit of a bare magnitude series (e.g. a Volterra solution)."""
    tr = SimulationTrace(np.asarray(t), np.asarray(y, dtype=complex), np.zeros(len(t)),
                         np.zeros(len(t)), np.full(len(t), np.nan), np.full(len(t), np.nan),
                         np.full(len(t), np.nan))
    return fit_decay(tr, b, window)


def run_metadata(config: SimulationConfig, trace: SimulationTrace, fit: Optional[DecayFit]) -> dict:
    return {
        "T": config.T, "dt": config.dt, "b": config.b, "b_d": config.bootstrap_exponent,
        "n_diag": config.n_diag, "nonlinear": config.nonlinear,
        "alpha_coefficients": config.ac.to_dict(),
        "f_init": config.f_init.to_dict() if isinstance(config.f_init, PerturbationRecipe) else None,
        "theta0": trace.meta.get("theta0"), "u0_norm": trace.meta.get("u0_norm"),
        "alpha_preserved": trace.meta.get("alpha_preserved"),
        "alpha_max": trace.meta.get("alpha_max"),
        "fit": None if fit is None else fit.to_dict(),
        "predicted_exponent": 0.5 - config.b,
    }


__all__ = [
    "rotate", "PerturbationRecipe", "SimulationConfig", "SimulationTrace", "DecayFit",
    "initial_theta", "theta_dot", "apply_Q", "project_alpha", "run", "compute_bootstrap",
    "fit_decay", "decay_fit_from_series", "run_metadata",
]
