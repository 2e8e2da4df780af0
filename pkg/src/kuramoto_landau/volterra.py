"""Linearized Volterra kernel, stability criterion, resolvent and K_Theta.

The boundary value ``x(t) = (Re u_1(t,0), Im u_1(t,0))`` of a linearized
perturbation solves ``x + k * x = F`` with the 2x2 kernel
``k(t) = -[[Re a, Re b], [Im a, Im b]]``, ``a = (e^{t L1} r_r)_1(0)``,
``b = (e^{t L1} r_i)_1(0)``, and ``F(t) = (e^{t L1} u_init)_1(0)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (ConfigurationError, ContourTooClose, InconsistentKTheta,
                     NumericalError, StepTooLarge)
from .stationary import StationaryState
from .transport import (AlphaCoefficients, AlphaFunctional, EvolutionCoefficients,
                        OperatorKind, Propagator)

_MEMORY_CUTOFF = 1e-17


@dataclass(frozen=True, eq=False)
class MatrixKernelTrace:
    """Convolution kernel samples ``k(n dt)``, shape ``(n_t, 2, 2)``."""

    dt: float
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 3 or s.shape[1:] != (2, 2):
            raise ConfigurationError(f"kernel samples must have shape (n, 2, 2), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ConfigurationError("kernel samples must be finite")
        if not self.dt > 0:
            raise ConfigurationError("kernel dt must be positive")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.n)

    @property
    def T(self) -> float:
        return self.dt * (self.n - 1)

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.samples, ord=2, axis=(1, 2))

    def memory(self, cutoff: float = _MEMORY_CUTOFF) -> int:
        """Number of leading samples above ``cutoff * max |k|`` (at least 1)."""
        nrm = self.norms()
        big = np.nonzero(nrm > cutoff * max(nrm.max(), 1e-300))[0]
        return int(big[-1]) + 1 if big.size else 1

    def weighted_l1(self, b: float) -> float:
        """``int |k(t)| (1 + t)^b dt`` by the trapezoid rule."""
        y = self.norms() * (1 + self.t) ** b
        return float(self.dt * (y.sum() - 0.5 * (y[0] + y[-1])))

    def to_csv(self, path) -> None:
        s = self.samples.reshape(self.n, 4)
        np.savetxt(path, np.column_stack([self.t, s]), delimiter=",",
                   header="t,k11,k12,k21,k22", comments="")

    @classmethod
    def from_csv(cls, path) -> "MatrixKernelTrace":
        d = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        dt = float(d[1, 0] - d[0, 0]) if d.shape[0] > 1 else 1.0
        return cls(dt, d[:, 1:].reshape(-1, 2, 2))


@dataclass(frozen=True, eq=False)
class NonconvolutionKernel:
    """Lower-triangular kernel ``k(t_n, s_j)`` on a uniform grid.

    Either a dense ``table`` of shape ``(n, n, 2, 2)`` or a convolution part
    ``base`` plus a deviation sampled at strided start times ``s_index``;
    the deviation is interpolated linearly in ``s`` and vanishes for ``s >= t``.
    """

    dt: float
    n: int
    table: Optional[np.ndarray] = None
    base: Optional[MatrixKernelTrace] = None
    s_index: Optional[np.ndarray] = None
    deviation: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.table is None and (self.base is None or self.s_index is None
                                   or self.deviation is None):
            raise ConfigurationError("need a dense table or base + strided deviation")
        if self.table is not None:
            tab = np.asarray(self.table, dtype=float)
            if tab.shape != (self.n, self.n, 2, 2):
                raise ConfigurationError("dense table must have shape (n, n, 2, 2)")
            object.__setattr__(self, "table", np.tril(tab.transpose(2, 3, 0, 1)).transpose(2, 3, 0, 1))

    @classmethod
    def from_convolution(cls, k: MatrixKernelTrace) -> "NonconvolutionKernel":
        n = k.n
        return cls(k.dt, n, base=k, s_index=np.array([0, n - 1]),
                   deviation=np.zeros((n, 2, 2, 2)))

    def row(self, n: int) -> np.ndarray:
        """``k(t_n, s_j)`` for ``j = 0..n``."""
        if self.table is not None:
            return self.table[n, : n + 1]
        out = self.base.samples[n::-1].copy()
        cols = self.s_index <= n
        xs = self.s_index[cols]
        dev = self.deviation[n, cols]
        if xs[-1] < n:
            # the deviation vanishes on the diagonal s = t
            xs = np.append(xs, n)
            dev = np.concatenate([dev, np.zeros((1, 2, 2))])
        j = np.arange(n + 1)
        for a in range(2):
            for b in range(2):
                out[:, a, b] += np.interp(j, xs, dev[:, a, b])
        return out


@dataclass
class StabilityReport:
    roots: list
    multiplicities: list
    zero_root_derivative: complex
    stable: bool
    det_at_zero: complex = 0j
    contour_scale: float = 1.0
    winding: int = 0
    rotation_mode: bool = True
    region: tuple = ()

    def to_dict(self) -> dict:
        return {"roots": [[z.real, z.imag] for z in self.roots],
                "multiplicities": list(self.multiplicities),
                "zero_root_derivative": [self.zero_root_derivative.real, self.zero_root_derivative.imag],
                "stable": bool(self.stable),
                "det_at_zero": [self.det_at_zero.real, self.det_at_zero.imag],
                "contour_scale": self.contour_scale, "winding": self.winding,
                "rotation_mode": self.rotation_mode, "region": list(self.region)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True, eq=False)
class ResolventSplit:
    K_Theta: np.ndarray
    c_r: float
    c_i: float
    r_Lcs: MatrixKernelTrace
    L1_weighted_norm_report: float
    tail_estimate: np.ndarray
    null_estimate: np.ndarray
    rotation_integral: np.ndarray
    agreement: float

    @property
    def K_norm(self) -> float:
        return float(np.linalg.norm(self.K_Theta, 2))

    def alpha_coefficients(self, T_alpha: float = 20.0, dt_alpha: float = 0.01) -> AlphaCoefficients:
        return AlphaCoefficients(self.c_r, self.c_i, T_alpha, dt_alpha, self.K_norm)

    def to_dict(self) -> dict:
        return {"K_Theta": self.K_Theta.tolist(), "c_r": self.c_r, "c_i": self.c_i,
                "K_norm": self.K_norm, "L1_weighted_norm_report": self.L1_weighted_norm_report,
                "tail_estimate": self.tail_estimate.tolist(),
                "null_estimate": self.null_estimate.tolist(),
                "rotation_integral": self.rotation_integral.tolist(),
                "agreement": self.agreement}


# kernel sampling

def _pack_kernel(trace: np.ndarray) -> np.ndarray:
    """``-[[Re a, Re b], [Im a, Im b]]`` from traces ``(..., 2)`` of a and b."""
    a, b = trace[..., 0], trace[..., 1]
    return -np.stack([np.stack([a.real, b.real], -1), np.stack([a.imag, b.imag], -1)], -2)


def sample_linear_traces(state: StationaryState, T: float, dt: float,
                         prop: Optional[Propagator] = None):
    """Kernel ``k_Lc`` and the rotation forcing ``F_rot(t) = (e^{t L1} rot)_1(0)`` as 2-vectors."""
    prop = prop or Propagator.for_state(state, dt)
    u0 = np.stack([state.r_r.values, state.r_i.values, state.rot_mode.values])
    _, trace = prop.evolve_values(u0, prop.stepper(OperatorKind.L1), 0.0, T)
    k = MatrixKernelTrace(prop.dt, _pack_kernel(trace[:, :2]), {"T": T})
    F_rot = np.stack([trace[:, 2].real, trace[:, 2].imag], axis=-1)
    return k, F_rot


def sample_kernel_linear(state: StationaryState, T: float, dt: float) -> MatrixKernelTrace:
    return sample_linear_traces(state, T, dt)[0]


def boundary_forcing(u0: np.ndarray, state: StationaryState, T: float, dt: float,
                     prop: Optional[Propagator] = None) -> np.ndarray:
    """``F(t) = (e^{t L1} u0)_1(0)`` as an array of 2-vectors."""
    prop = prop or Propagator.for_state(state, dt)
    _, trace = prop.evolve_values(np.asarray(u0, dtype=complex), prop.stepper(OperatorKind.L1), 0.0, T)
    return np.stack([trace.real, trace.imag], axis=-1)


# Laplace transform

def _filon_weights(zeta: np.ndarray):
    """``int_0^1 (1-s) e^{-zeta s}`` and ``int_0^1 s e^{-zeta s}``."""
    zeta = np.asarray(zeta, dtype=complex)
    small = np.abs(zeta) < 1e-3
    zs = np.where(small, 1.0, zeta)
    e = np.exp(-zs)
    e0 = -np.expm1(-zs) / zs
    p1 = (1 - e - zs * e) / zs ** 2
    z = zeta
    e0s = 1 - z / 2 + z ** 2 / 6 - z ** 3 / 24 + z ** 4 / 120
    p1s = 0.5 - z / 3 + z ** 2 / 8 - z ** 3 / 30 + z ** 4 / 144
    e0 = np.where(small, e0s, e0)
    p1 = np.where(small, p1s, p1)
    return e0 - p1, p1


def _exp_tail(samples: np.ndarray, dt: float):
    """Exponential fit ``k_ij(t) ~ k_ij(T) e^{-lam_ij (t - T)}`` over the last tenth."""
    n = samples.shape[0] - 1
    m = max(2, n // 10)
    seg = np.abs(samples[n - m:]).reshape(m + 1, -1)
    t = dt * np.arange(m + 1)
    with np.errstate(divide="ignore"):
        logs = np.log(np.maximum(seg, 1e-300))
    lam = -np.polyfit(t, logs, 1)[0].reshape(samples.shape[1:])
    ok = (lam > 0) & (np.abs(samples[-1]) > 0)
    return np.where(ok, lam, 0.0), ok


def laplace_transform(k: MatrixKernelTrace, z, weight_t: bool = False, tail: bool = True) -> np.ndarray:
    """``int_0^inf k(t) e^{-z t} dt`` for an array of ``z``; shape ``z.shape + (2, 2)``.

    ``k`` is taken piecewise linear between samples and each panel integrated
    exactly against ``e^{-zt}``.  Beyond the horizon an exponential fit of the
    last tenth of the samples is integrated in closed form.  With
    ``weight_t`` the samples are replaced by ``-t k(t)`` (the z-derivative).
    """
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    s = k.samples * (-k.t[:, None, None]) if weight_t else k.samples
    m = k.memory() if not weight_t else min(k.n, k.memory() + 1)
    m = max(m, 2)
    s_used = s[:m]
    h = k.dt
    t = h * np.arange(m)
    out = np.empty((flat.size, 2, 2), dtype=complex)
    chunk = max(1, 2 ** 22 // m)
    for lo in range(0, flat.size, chunk):
        zz = flat[lo: lo + chunk]
        w0, w1 = _filon_weights(zz * h)
        E = np.exp(-np.outer(zz, t[:-1]))  # panel start factors
        A0 = E @ s_used[:-1].reshape(m - 1, 4)
        A1 = E @ s_used[1:].reshape(m - 1, 4)
        out[lo: lo + chunk] = (h * (w0[:, None] * A0 + w1[:, None] * A1)).reshape(-1, 2, 2)
    if tail and m == k.n and k.n > 3:
        lam, ok = _exp_tail(s, h)
        end = s[-1]
        T = k.T
        with np.errstate(over="ignore", invalid="ignore"):
            tl = np.where(ok, end, 0.0)[None] * np.exp(-flat * T)[:, None, None] / (
                lam[None] + flat[:, None, None])
        out += np.where(np.isfinite(tl), tl, 0.0)
    return out.reshape(z.shape + (2, 2))


def _det2(M):
    return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]


def char_det(k: MatrixKernelTrace, z) -> np.ndarray | complex:
    """``det(Id + L k(z))``."""
    z = np.asarray(z, dtype=complex)
    if np.any(z.real < -1e-12):
        raise ConfigurationError("char_det is defined for Re z >= 0")
    out = _det2(np.eye(2) + laplace_transform(k, z))
    return complex(out) if out.ndim == 0 else out


def char_det_derivative(k: MatrixKernelTrace, z):
    z = np.asarray(z, dtype=complex)
    M = np.eye(2) + laplace_transform(k, z)
    D = laplace_transform(k, z, weight_t=True)
    out = (D[..., 0, 0] * M[..., 1, 1] + M[..., 0, 0] * D[..., 1, 1]
           - D[..., 0, 1] * M[..., 1, 0] - M[..., 0, 1] * D[..., 1, 0])
    return complex(out) if out.ndim == 0 else out


# root search

def _contour(sigma_max: float, omega_max: float, radius: float, n: int):
    """Counter-clockwise indented rectangle as a list of parametrized pieces."""
    pieces = [
        lambda s: sigma_max + 1j * (-omega_max + 2 * omega_max * s),          # right, upward
        lambda s: (sigma_max - sigma_max * s) + 1j * omega_max,               # top, leftward
        lambda s: 1j * (omega_max - (omega_max - radius) * s),                # left upper, down
        lambda s: radius * np.exp(1j * (np.pi / 2 - np.pi * s)),              # indentation into Re > 0
        lambda s: 1j * (-radius - (omega_max - radius) * s),                  # left lower, down
        lambda s: sigma_max * s - 1j * omega_max,                             # bottom, rightward
    ]
    return pieces


def _trace_piece(fn, det_fn, n0: int, max_points: int = 2 ** 16):
    s = np.linspace(0, 1, n0 + 1)
    z = fn(s)
    d = det_fn(z)
    while True:
        jump = np.abs(np.angle(d[1:] / d[:-1]))
        bad = np.nonzero(jump > np.pi / 8)[0]
        if bad.size == 0 or s.size > max_points:
            break
        mids = 0.5 * (s[bad] + s[bad + 1])
        zm = fn(mids)
        dm = det_fn(zm)
        s = np.concatenate([s, mids])
        order = np.argsort(s)
        s = s[order]
        z = np.concatenate([z, zm])[order]
        d = np.concatenate([d, dm])[order]
    return z, d


def _winding(k, sigma_lo, sigma_hi, om_lo, om_hi, n0=64):
    """Zeros of det inside a plain rectangle and the contour samples."""
    det_fn = lambda z: char_det(k, np.maximum(z.real, 0) + 1j * z.imag)
    corners = [complex(sigma_lo, om_lo), complex(sigma_hi, om_lo), complex(sigma_hi, om_hi),
               complex(sigma_lo, om_hi), complex(sigma_lo, om_lo)]
    zs, ds = [], []
    for a, b in zip(corners[:-1], corners[1:]):
        z, d = _trace_piece(lambda s, a=a, b=b: a + (b - a) * s, det_fn, n0)
        zs.append(z[:-1])
        ds.append(d[:-1])
    z = np.concatenate(zs + [[corners[0]]])
    d = np.concatenate(ds + [[det_fn(np.array([corners[0]]))[0]]])
    return z, d


def _moments(z, d, p_max):
    """Power sums ``sum z_k^p`` over the zeros enclosed by the closed polyline."""
    dlog = np.log(np.abs(d[1:] / d[:-1])) + 1j * np.angle(d[1:] / d[:-1])
    zm = 0.5 * (z[1:] + z[:-1])
    return np.array([np.sum(zm ** p * dlog) / (2j * np.pi) for p in range(p_max + 1)])


def _newton(k, z0, tol=1e-12, max_iter=50):
    z = complex(z0)
    for _ in range(max_iter):
        zz = complex(max(z.real, 0.0), z.imag)
        f = char_det(k, zz)
        fp = char_det_derivative(k, zz)
        if fp == 0:
            break
        step = f / fp
        z = zz - step
        if abs(step) < tol * max(1.0, abs(z)):
            break
    return z


def _locate(k, box, depth=0, max_per_box=4):
    """Roots inside an axis-aligned box by recursive bisection and moments."""
    s0, s1, w0, w1 = box
    z, d = _winding(k, s0, s1, w0, w1)
    n = int(round(_moments(z, d, 0)[0].real))
    if n <= 0:
        return []
    if n <= max_per_box or depth > 8:
        p = _moments(z, d, n)
        # Newton identities: power sums -> elementary symmetric -> polynomial
        e = [1.0 + 0j]
        for j in range(1, n + 1):
            e.append(sum((-1) ** (i - 1) * e[j - i] * p[i] for i in range(1, j + 1)) / j)
        coeffs = [(-1) ** j * e[j] for j in range(n + 1)]
        guesses = np.roots(coeffs) if n > 1 else np.array([p[1] / p[0]])
        return [_newton(k, g) for g in guesses]
    sm, wm = 0.5 * (s0 + s1), 0.5 * (w0 + w1)
    out = []
    for b in [(s0, sm, w0, wm), (sm, s1, w0, wm), (s0, sm, wm, w1), (sm, s1, wm, w1)]:
        out += _locate(k, b, depth + 1, max_per_box)
    return out


def find_roots(k: MatrixKernelTrace, sigma_max: Optional[float] = None,
               omega_max: Optional[float] = None, K: float = 1.0, radius: float = 1e-3,
               derivative_threshold: float = 1e-4, n0: int = 256) -> StabilityReport:
    """Zeros of ``det(Id + L k)`` in ``[0, sigma_max] x [-omega_max, omega_max]`` minus a half disc at 0.

    Defaults ``sigma_max = 2K``, ``omega_max = 4K``.
    """
    sigma_max = 2 * K if sigma_max is None else sigma_max
    omega_max = 4 * K if omega_max is None else omega_max
    det_fn = lambda z: char_det(k, np.maximum(np.asarray(z).real, 0) + 1j * np.asarray(z).imag)
    zs, ds = [], []
    for piece in _contour(sigma_max, omega_max, radius, n0):
        z, d = _trace_piece(piece, det_fn, n0)
        zs.append(z[:-1])
        ds.append(d[:-1])
    z = np.concatenate(zs + [zs[0][:1]])
    d = np.concatenate(ds + [ds[0][:1]])
    scale = float(np.median(np.abs(d)))
    dprime = char_det_derivative(k, z)
    dist = np.abs(d) / np.maximum(np.abs(dprime), 1e-300)
    if np.min(dist) < 1e-6:
        raise ContourTooClose(f"contour passes within {np.min(dist):.2e} of a root")
    winding = int(round(np.sum(np.angle(d[1:] / d[:-1])) / (2 * np.pi)))
    d0 = char_det(k, 0.0)
    dp0 = char_det_derivative(k, 0.0)
    rotation_mode = abs(d0) <= 1e-3 * scale
    roots, mult = [], []
    if winding > 0:
        found = _locate(k, (0.0, sigma_max, -omega_max, omega_max))
        for r in found:
            if abs(r) <= radius:
                continue
            for i, q in enumerate(roots):
                if abs(q - r) < 1e-6 * max(1, abs(r)):
                    mult[i] += 1
                    break
            else:
                roots.append(complex(r))
                mult.append(1)
    all_roots = ([0j] if rotation_mode else []) + roots
    all_mult = ([1] if rotation_mode else []) + mult
    if rotation_mode:
        stable = winding == 0 and abs(dp0) > derivative_threshold
    else:
        # no rotation mode (e.g. k == 0): stability holds trivially, flagged by rotation_mode
        stable = winding == 0
    return StabilityReport(all_roots, all_mult, complex(dp0), bool(stable), complex(d0), scale,
                           winding, bool(rotation_mode), (0.0, sigma_max, -omega_max, omega_max))


# Volterra solves

class _History:
    """Memory sums ``sum_{j} k_{n-j} x_j`` against a kernel truncated to ``m`` samples."""

    def __init__(self, ks: np.ndarray, m: int):
        self.ks = ks
        self.m = m
        desc = ks[m - 1:0:-1]  # k_{m-1}, ..., k_1
        self._left = np.ascontiguousarray(desc.transpose(1, 0, 2).reshape(2, -1))
        self._right = np.ascontiguousarray(desc.reshape(-1, 2))

    def _span(self, n):
        return min(n - 1, self.m - 1)

    def kx(self, x: np.ndarray, n: int) -> np.ndarray:
        """``sum_{j=n-L}^{n-1} k_{n-j} x_j``; ``x`` holds vectors or matrices."""
        L = self._span(n)
        if L <= 0:
            return np.zeros(x.shape[1:])
        K = self._left[:, 2 * (self.m - 1 - L):]
        return (K @ x[n - L:n].reshape(2 * L, -1)).reshape(x.shape[1:])

    def xk(self, x: np.ndarray, n: int) -> np.ndarray:
        """``sum_{j=n-L}^{n-1} x_j k_{n-j}`` for matrices ``x``."""
        L = self._span(n)
        if L <= 0:
            return np.zeros((2, 2))
        X = x[n - L:n].transpose(1, 0, 2).reshape(2, 2 * L)
        return X @ self._right[2 * (self.m - 1 - L):]

    def end(self, n: int) -> Optional[np.ndarray]:
        return self.ks[n] if n < self.m else None


def _implicit_block(k0: np.ndarray, dt: float) -> np.ndarray:
    A = np.eye(2) + 0.5 * dt * k0
    if abs(np.linalg.det(A)) < 1e-12:
        raise StepTooLarge("Id + dt/2 k(0) is singular; reduce dt")
    return np.linalg.inv(A)


def resolvent(k: MatrixKernelTrace, check: bool = True) -> MatrixKernelTrace:
    """Trapezoid product-integration solution of ``r + k * r = k``.

    The memory sum is truncated where ``|k| < 1e-17 max|k|``.  Residuals of
    both defining identities are stored in ``meta``.
    """
    ks, dt, N = k.samples, k.dt, k.n
    Ainv = _implicit_block(ks[0], dt)
    hist = _History(ks, k.memory())
    r = np.empty_like(ks)
    r[0] = ks[0]
    for n in range(1, N):
        acc = hist.kx(r, n)
        kn = hist.end(n)
        if kn is not None:
            acc = acc + 0.5 * kn @ r[0]
        r[n] = Ainv @ (ks[n] - dt * acc)
    out = MatrixKernelTrace(dt, r, dict(k.meta))
    if check:
        out.meta.update(resolvent_residuals(k, out))
    return out


def convolve(a: MatrixKernelTrace, x: np.ndarray, left: bool = True) -> np.ndarray:
    """Trapezoid ``(a * x)(t_n)`` (``left``) or ``(x * a)(t_n)`` for matrices ``x``."""
    hist = _History(a.samples, a.memory())
    dt = a.dt
    out = np.zeros_like(x)
    for n in range(1, x.shape[0]):
        an = hist.end(n)
        if left:
            acc = hist.kx(x, n) + 0.5 * a.samples[0] @ x[n]
            if an is not None:
                acc = acc + 0.5 * an @ x[0]
        else:
            acc = hist.xk(x, n) + 0.5 * x[n] @ a.samples[0]
            if an is not None:
                acc = acc + 0.5 * x[0] @ an
        out[n] = dt * acc
    return out


def resolvent_residuals(k: MatrixKernelTrace, r: MatrixKernelTrace) -> dict:
    kmax = max(k.norms().max(), 1e-300)
    right = r.samples + convolve(k, r.samples) - k.samples
    left = r.samples + convolve(k, r.samples, left=False) - k.samples
    return {"right_residual": float(np.abs(right).max() / kmax),
            "left_residual": float(np.abs(left).max() / kmax)}


def split_K_Theta(r: MatrixKernelTrace, k: MatrixKernelTrace, F_rot: np.ndarray,
                  b: float = 2.0, tol: float = 0.02) -> ResolventSplit:
    """``r = K_Theta + r_Lcs`` with ``K_Theta = (0; 1) (c_r, c_i)``.

    ``K_Theta`` is the tail average of ``r`` over the final 20% of the
    horizon.  It is compared entrywise (relative to ``|K_Theta|``) with the
    left-null-vector construction.  The null vector is normalized through the rotation
    eigenmode: its boundary value is the constant ``x_rot = F_rot(0)``, so
    ``x_rot = F_rot - r * F_rot`` gives ``-int K_Theta F_rot = x_rot = (0; r_stat)``.
    """
    n = r.n
    tail = r.samples[int(np.floor(0.8 * (n - 1))):].mean(axis=0)
    M0 = np.eye(2) + laplace_transform(k, 0.0).real
    U, S, Vt = np.linalg.svd(M0)
    v = U[:, -1]
    w = np.full(F_rot.shape[0], k.dt)
    w[0] = w[-1] = k.dt / 2
    intF = w @ F_rot
    target = F_rot[0, 1]
    denom = v @ intF
    if abs(denom) < 1e-14 or target == 0:
        raise InconsistentKTheta("rotation forcing gives no normalization of the null vector",
                                 tail, None)
    c = -target * v / denom
    null = np.array([[0.0, 0.0], [c[0], c[1]]])
    scale = max(np.linalg.norm(null, 2), 1e-300)
    agreement = float(np.max(np.abs(tail - null)) / scale)
    if agreement > tol:
        raise InconsistentKTheta(
            f"K_Theta estimates disagree by {agreement:.2%} (tail {tail.tolist()}, null {null.tolist()})",
            tail, null)
    r_lcs = MatrixKernelTrace(r.dt, r.samples - tail[None], dict(r.meta))
    return ResolventSplit(tail, float(tail[1, 0]), float(tail[1, 1]), r_lcs, r_lcs.weighted_l1(b),
                          tail, null, -tail @ intF, agreement)


def solve_volterra(k, F: np.ndarray, r: Optional[MatrixKernelTrace] = None,
                   verify: bool = False):
    """Solve ``x + k * x = F`` for a convolution or nonconvolution kernel.

    For convolution kernels with ``verify`` the solution is compared with
    ``F - r * F``; the relative difference is returned alongside ``x``.
    """
    F = np.asarray(F, dtype=float)
    if isinstance(k, MatrixKernelTrace):
        if F.shape != (k.n, 2):
            raise ConfigurationError(f"forcing must have shape ({k.n}, 2)")
        ks, dt = k.samples, k.dt
        Ainv = _implicit_block(ks[0], dt)
        hist = _History(ks, k.memory())
        x = np.empty_like(F)
        x[0] = F[0]
        for n in range(1, k.n):
            acc = hist.kx(x, n)
            kn = hist.end(n)
            if kn is not None:
                acc = acc + 0.5 * kn @ x[0]
            x[n] = Ainv @ (F[n] - dt * acc)
        if not verify:
            return x
        r = r or resolvent(k, check=False)
        alt = F - convolve(MatrixKernelTrace(dt, r.samples), F)
        err = float(np.abs(alt - x).max() / max(np.abs(F).max(), 1e-300))
        return x, err
    if isinstance(k, NonconvolutionKernel):
        if F.shape != (k.n, 2):
            raise ConfigurationError(f"forcing must have shape ({k.n}, 2)")
        dt = k.dt
        x = np.empty_like(F)
        row0 = k.row(0)
        A = np.eye(2) + 0.5 * dt * row0[0]
        x[0] = F[0]
        for n in range(1, k.n):
            row = k.row(n)
            w = np.full(n + 1, dt)
            w[0] = w[-1] = dt / 2
            acc = np.einsum("j,jab,jb->a", w[:-1], row[:-1], x[:n])
            A = np.eye(2) + 0.5 * dt * row[n]
            if abs(np.linalg.det(A)) < 1e-12:
                raise StepTooLarge("Id + dt/2 k(t, t) is singular; reduce dt")
            x[n] = np.linalg.solve(A, F[n] - acc)
        return x
    raise ConfigurationError("unknown kernel type")


# nonlinear kernel

@dataclass(frozen=True, eq=False)
class NonlinearKernelReport:
    kernel: NonconvolutionKernel
    k_Q: np.ndarray
    s_index: np.ndarray
    triple_norm: float
    b_eta: float


def sample_kernel_nonlinear(state: StationaryState, coeffs: EvolutionCoefficients,
                            ac: AlphaCoefficients, T: float, dt: float, s_stride: int,
                            b: float = 2.0, b_eta: Optional[float] = None,
                            k_lin: Optional[MatrixKernelTrace] = None,
                            alpha_fn: Optional[AlphaFunctional] = None) -> NonlinearKernelReport:
    """Nonconvolution kernel ``k(t, s)`` from ``sol_B(s, t) r_r`` and ``sol_B(s, t) r_i``.

    Start times are every ``s_stride``-th step.  Returns the kernel, the
    deviation ``k_Q(t, s) = k(t, s) - k_Lc(t - s)`` on the strided columns
    and ``sup_t (1+t)^{b_eta} sum_s |k_Q(t, s)| (1+s)^{-b_eta} ds``.
    """
    if state.r_Theta is None:
        raise ConfigurationError("nonlinear kernel sampling needs r_Theta on the state")
    b_eta = b - 0.5 if b_eta is None else b_eta
    prop = Propagator.for_state(state, dt)
    N = prop.n_steps(0.0, T)
    s_index = np.arange(0, N + 1, int(s_stride))
    if s_index[-1] != N:
        s_index = np.append(s_index, N)
    k_lin = k_lin or sample_kernel_linear(state, T, dt)
    alpha_fn = alpha_fn or AlphaFunctional.for_state(state, ac)
    couple = prop.stepper(OperatorKind.B, coeffs, state.r_Theta.values, alpha_fn)
    u0 = np.stack([state.r_r.values, state.r_i.values])
    dev = np.zeros((N + 1, s_index.size, 2, 2))
    for col, s in enumerate(s_index):
        _, trace = prop.evolve_values(u0, couple, s * prop.dt, T)
        ks = _pack_kernel(trace)
        dev[s:, col] = ks - k_lin.samples[: N + 1 - s]
    base = MatrixKernelTrace(prop.dt, k_lin.samples[: N + 1])
    kern = NonconvolutionKernel(prop.dt, N + 1, base=base, s_index=s_index, deviation=dev)
    t = prop.dt * np.arange(N + 1)
    s_t = prop.dt * s_index
    ws = np.diff(s_t, prepend=s_t[0], append=s_t[-1])
    ws = 0.5 * (ws[:-1] + ws[1:])
    nrm = np.linalg.norm(dev, ord=2, axis=(2, 3))
    inner = nrm @ (ws * (1 + s_t) ** (-b_eta))
    triple = float(np.max((1 + t) ** b_eta * inner))
    return NonlinearKernelReport(kern, dev, s_index, triple, b_eta)


# pipeline

@dataclass(eq=False)
class SpectrumResult:
    kernel: MatrixKernelTrace
    F_rot: np.ndarray
    report: StabilityReport
    resolvent: Optional[MatrixKernelTrace] = None
    split: Optional[ResolventSplit] = None


def analyze_spectrum(state: StationaryState, T: float, dt: float, b: float = 2.0,
                     tol: float = 0.02, sigma_max: Optional[float] = None,
                     omega_max: Optional[float] = None) -> SpectrumResult:
    """Kernel sampling, root search and, for stable states, the resolvent split."""
    k, F_rot = sample_linear_traces(state, T, dt)
    report = find_roots(k, sigma_max, omega_max, K=state.K)
    if not report.stable:
        return SpectrumResult(k, F_rot, report)
    r = resolvent(k)
    return SpectrumResult(k, F_rot, report, r, split_K_Theta(r, k, F_rot, b=b, tol=tol))


def linearized_boundary(state: StationaryState, u0: np.ndarray, k: MatrixKernelTrace,
                        r: Optional[MatrixKernelTrace] = None) -> np.ndarray:
    """Boundary value ``x(t) = (Re, Im) u_1(t, 0)`` of the linearized flow on the kernel's grid.

    With a resolvent ``r`` the solution is ``F - r * F``.  This keeps the
    rotation component at exactly ``K_Theta int F``, so data with
    ``alpha = 0`` carry none of it.  The direct solve otherwise leaves an
    O(dt^2) local error parked in the neutral rotation mode.
    """
    F = boundary_forcing(u0, state, k.T, k.dt)
    if r is None:
        return solve_volterra(k, F)
    if r.n < k.n or abs(r.dt - k.dt) > 1e-15:
        raise ConfigurationError("resolvent must share dt and cover the kernel horizon")
    return F - convolve(MatrixKernelTrace(r.dt, r.samples[:k.n]), F)


__all__ = [
    "MatrixKernelTrace", "NonconvolutionKernel", "StabilityReport", "ResolventSplit",
    "NonlinearKernelReport", "sample_kernel_linear", "sample_linear_traces", "boundary_forcing",
    "laplace_transform", "char_det", "char_det_derivative", "find_roots", "resolvent",
    "resolvent_residuals", "convolve", "split_K_Theta", "solve_volterra", "sample_kernel_nonlinear",
    "SpectrumResult", "analyze_spectrum", "linearized_boundary",
]
