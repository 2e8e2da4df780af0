"""Partially locked stationary states and their Fourier representation.

Oscillators with ``|omega| <= K r`` sit at ``theta = arcsin(omega / (K r))``;
the rest drift with density ``sqrt(omega^2 - (K r)^2) / (2 pi |omega - K r sin theta|)``.
All omega integrals are done in substituted variables (``omega = a sin(phi)``
on the locked set, ``omega = +-a cosh(s)`` on the drifting set, ``a = K r``)
which remove the square-root behaviour at ``|omega| = a``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy import integrate, optimize

from .errors import (ConfigurationError, DegenerateRotationProjection,
                     NoPartiallyLockedState, NumericalError)
from .spectral_core import FieldGrid, SpectralField

_GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
_SUPPORT_CUTOFF = 1e-14


@dataclass(frozen=True)
class VelocityDistribution:
    """Frequency density ``g``.

    ``scale`` is sigma for ``gaussian`` and gamma for ``lorentzian`` /
    ``uniform`` (support ``[-gamma, gamma]``).  ``tabulated`` densities are
    piecewise linear through ``(nodes, values)`` and normalized on creation.
    """

    kind: str
    scale: float = 1.0
    nodes: Optional[tuple] = None
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "lorentzian", "uniform", "tabulated"):
            raise ConfigurationError(f"unknown velocity distribution kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.nodes is None or self.values is None or len(self.nodes) != len(self.values):
                raise ConfigurationError("tabulated distribution needs matching nodes and values")
            x = np.asarray(self.nodes, dtype=float)
            y = np.asarray(self.values, dtype=float)
            if np.any(np.diff(x) <= 0) or np.any(y < 0):
                raise ConfigurationError("tabulated nodes must increase and values be >= 0")
            y = y / integrate.trapezoid(y, x)
            object.__setattr__(self, "nodes", tuple(x))
            object.__setattr__(self, "values", tuple(y))
        elif not self.scale > 0:
            raise ConfigurationError("distribution scale must be positive")
        if self.kind == "lorentzian":
            warnings.warn("lorentzian g has heavy tails; omega truncation is far from the peak",
                          stacklevel=2)

    @property
    def symmetric(self) -> bool:
        if self.kind != "tabulated":
            return True
        x = np.asarray(self.nodes)
        return bool(np.allclose(self.pdf(x), self.pdf(-x), atol=1e-12))

    def pdf(self, omega):
        w = np.asarray(omega, dtype=float)
        s = self.scale
        if self.kind == "gaussian":
            return np.exp(-0.5 * (w / s) ** 2) / (s * np.sqrt(2 * np.pi))
        if self.kind == "lorentzian":
            return s / (np.pi * (w ** 2 + s ** 2))
        if self.kind == "uniform":
            return np.where(np.abs(w) <= s, 0.5 / s, 0.0)
        return np.interp(w, self.nodes, self.values, left=0.0, right=0.0)

    def support(self) -> tuple[float, float]:
        """Interval outside which ``g`` is below 1e-14 of its peak."""
        s = self.scale
        if self.kind == "gaussian":
            half = s * np.sqrt(2 * np.log(1 / _SUPPORT_CUTOFF))
            return -half, half
        if self.kind == "lorentzian":
            half = s * np.sqrt(1 / _SUPPORT_CUTOFF - 1)
            return -half, half
        if self.kind == "uniform":
            return -s, s
        y = np.asarray(self.values)
        idx = np.nonzero(y >= _SUPPORT_CUTOFF * y.max())[0]
        x = np.asarray(self.nodes)
        return float(x[max(idx[0] - 1, 0)]), float(x[min(idx[-1] + 1, len(x) - 1)])

    def breakpoints(self) -> np.ndarray:
        """Points where ``g`` is not smooth (quadrature panel edges)."""
        if self.kind == "uniform":
            return np.array([-self.scale, self.scale])
        if self.kind == "tabulated":
            return np.asarray(self.nodes)
        return np.array([])

    def ghat(self, xi):
        """Fourier transform ``int exp(-i xi omega) g(omega) d omega``."""
        xi = np.asarray(xi, dtype=float)
        s = self.scale
        if self.kind == "gaussian":
            return np.exp(-0.5 * (s * xi) ** 2) + 0j
        if self.kind == "lorentzian":
            return np.exp(-s * np.abs(xi)) + 0j
        if self.kind == "uniform":
            return np.sinc(s * xi / np.pi) + 0j
        x, wts = _panel_nodes(np.asarray(self.nodes), 0.5 / max(1.0, float(np.max(np.abs(xi)))))
        return (wts * self.pdf(x)) @ np.exp(-1j * np.outer(x, xi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        s = self.scale
        if self.kind == "gaussian":
            return rng.normal(0.0, s, n)
        if self.kind == "lorentzian":
            return s * rng.standard_cauchy(n)
        if self.kind == "uniform":
            return rng.uniform(-s, s, n)
        x = np.asarray(self.nodes)
        cdf = integrate.cumulative_trapezoid(np.asarray(self.values), x, initial=0.0)
        cdf /= cdf[-1]
        u = rng.uniform(0.0, 1.0, n)
        return np.interp(u, cdf, x)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "scale": self.scale}
        if self.kind == "tabulated":
            d.update(nodes=list(self.nodes), values=list(self.values))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VelocityDistribution":
        nodes = tuple(d["nodes"]) if d.get("nodes") is not None else None
        values = tuple(d["values"]) if d.get("values") is not None else None
        return cls(d["kind"], float(d.get("scale", 1.0)), nodes, values)


def _panel_nodes(edges: np.ndarray, max_width: float):
    """Gauss-Legendre nodes on panels between ``edges``, subdivided to ``max_width``."""
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        m = max(1, int(np.ceil((hi - lo) / max_width)))
        e = np.linspace(lo, hi, m + 1)
        mid = 0.5 * (e[1:] + e[:-1])
        half = 0.5 * (e[1:] - e[:-1])
        xs.append((mid[:, None] + half[:, None] * _GL_X).ravel())
        ws.append((half[:, None] * _GL_W).ravel())
    if not xs:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs), np.concatenate(ws)


def _edges(lo, hi, interior):
    pts = [lo] + [p for p in np.sort(interior) if lo < p < hi] + [hi]
    return np.asarray(pts, dtype=float)


def drift_coefficients(omega, a: float, ell_max: int, tol=1e-14,
                       max_points: int = 2 ** 22) -> np.ndarray:
    """Fourier coefficients ``int exp(-i l theta) rho_omega(theta) d theta``, l = 1..ell_max.

    ``rho_omega`` is the drifting density for ``|omega| > a``.  The theta
    integral uses the substitution under which ``rho_omega`` becomes uniform
    (a Moebius map of the circle clustering nodes where ``|omega - a sin theta|``
    is smallest) and a periodic trapezoid rule, doubled until the change is
    below ``tol`` (scalar or one value per omega).  Returns shape
    ``(len(omega), ell_max)``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    tol = np.broadcast_to(np.asarray(tol, dtype=float), omega.shape)
    if np.any(np.abs(omega) <= a):
        raise ConfigurationError("drift coefficients need |omega| > K r")
    out = np.empty((omega.size, ell_max), dtype=complex)
    if a == 0:
        out[:] = 0.0
        return out
    x = np.abs(omega) / a
    rho = 1.0 / (x + np.sqrt(x * x - 1.0))
    center = np.sign(omega) * np.pi / 2

    def estimate(idx, m):
        psi = 2 * np.pi * np.arange(m) / m
        z = np.exp(1j * psi)[None, :]
        r = rho[idx, None]
        # exp(-i theta) at theta = center + arg(mobius(z)); the image is unimodular
        base = np.exp(-1j * center[idx, None]) * np.conj((z + r) / (1 + r * z))
        acc = np.ones_like(base)
        res = np.empty((idx.size, ell_max), dtype=complex)
        for ell in range(ell_max):
            acc = acc * base
            res[:, ell] = acc.mean(axis=1)
        return res

    # trapezoid aliasing error decays like rho**m; start near the predicted m
    with np.errstate(divide="ignore"):
        need = np.log(np.maximum(tol, 1e-300)) / np.log(rho) + 2 * ell_max
    start = 2 ** np.ceil(np.log2(np.clip(need, 32, max_points))).astype(int)
    for m0 in np.unique(start):
        active = np.nonzero(start == m0)[0]
        m = int(m0)
        prev = estimate(active, m)
        while active.size:
            m *= 2
            if m > max_points:
                raise NumericalError(
                    f"drift theta quadrature did not converge for omega={omega[active][:3]}")
            cur = estimate(active, m)
            done = np.max(np.abs(cur - prev), axis=1) <= tol[active]
            out[active[done]] = cur[done]
            active, prev = active[~done], cur[~done]
    return out


def _locked_nodes(a: float, g: VelocityDistribution, max_width: float):
    """Nodes in ``phi`` with ``omega = a sin(phi)``; weights include ``g`` and the Jacobian."""
    lo, hi = g.support()
    max_width = min(max_width, g.scale)  # resolve narrow densities
    p_lo = np.arcsin(np.clip(lo / a, -1, 1))
    p_hi = np.arcsin(np.clip(hi / a, -1, 1))
    brk = np.arcsin(np.clip(g.breakpoints() / a, -1, 1))
    phi, w = _panel_nodes(_edges(p_lo, p_hi, brk), max_width / a)
    omega = a * np.sin(phi)
    return phi, omega, w * g.pdf(omega) * a * np.cos(phi)


_TAIL_KNEE = 20.0


def _drift_nodes(a: float, g: VelocityDistribution, max_width: float, sign: int):
    """Nodes in ``s`` with ``omega = sign * a cosh(s)``."""
    lo, hi = g.support()
    max_width = min(max_width, g.scale)
    reach = hi if sign > 0 else -lo
    if reach <= a:
        return np.empty(0), np.empty(0)
    s_hi = np.arccosh(reach / a)
    brk = g.breakpoints() * sign
    brk = np.arccosh(brk[brk > a] / a) if np.any(brk > a) else np.array([])
    # beyond the knee g is a smooth tail; uniform steps in s are geometric in omega
    s_knee = min(s_hi, np.arccosh(1 + _TAIL_KNEE * g.scale / a))
    jac_max = a * np.sinh(s_knee)
    s, w = _panel_nodes(_edges(0.0, s_knee, brk), max_width / max(jac_max, 1e-300))
    if s_hi > s_knee:
        st, wt = _panel_nodes(_edges(s_knee, s_hi, brk), max_width)
        s, w = np.concatenate([s, st]), np.concatenate([w, wt])
    omega = sign * a * np.cosh(s)
    keep = np.abs(omega) > a * (1 + 1e-12)  # edge nodes carry O(1e-12) weight
    return omega[keep], (w * g.pdf(omega) * a * np.sinh(s))[keep]


def _node_tol(weights, budget=1e-15):
    """Per-node coefficient tolerance so that the weighted error stays below ``budget``."""
    return np.clip(budget / np.maximum(np.abs(weights), 1e-300), 1e-14, 1e-6)


def _total(fn, tol=1e-13, max_width=0.5, max_halvings=8):
    """Run ``fn(max_width)`` with halving widths until two estimates agree."""
    prev = fn(max_width)
    for _ in range(max_halvings):
        max_width /= 2
        cur = fn(max_width)
        if np.max(np.abs(cur - prev)) <= tol * max(1.0, np.max(np.abs(cur))):
            return cur
        prev = cur
    raise NumericalError("omega quadrature did not converge")


def order_parameter_complex(r: float, K: float, g: VelocityDistribution) -> complex:
    """``int int exp(i theta) f_stat`` for the state built at order parameter ``r``."""
    if not 0 <= r <= 1:
        raise ConfigurationError(f"r must lie in [0, 1], got {r}")
    if K <= 0:
        raise ConfigurationError("K must be positive")
    a = K * r
    if a == 0:
        return 0j
    if g.kind == "lorentzian":
        # the omega integral closes on the pole of g at -i gamma
        return complex(a / (np.hypot(a, g.scale) + g.scale))
    if a < 1e-9 * g.scale:
        # leading order: only the locked fraction contributes
        return complex(0.5 * np.pi * a * float(g.pdf(0.0)))

    def estimate(width):
        phi, _, w = _locked_nodes(a, g, width)
        total = np.sum(w * np.exp(1j * phi))
        for sign in (1, -1):
            om, wd = _drift_nodes(a, g, width, sign)
            if om.size:
                c1 = drift_coefficients(om, a, 1, tol=_node_tol(wd))[:, 0]
                total += np.sum(wd * np.conj(c1))
        return total

    return complex(_total(estimate))


def order_parameter_map(r: float, K: float, g: VelocityDistribution) -> float:
    value = order_parameter_complex(r, K, g)
    if g.symmetric and abs(value.imag) >= 1e-8:
        raise NumericalError(f"symmetric g produced Im order parameter {value.imag:.3e}")
    return value.real


def solve_self_consistency(K: float, g: VelocityDistribution, n_scan: int = 64) -> float:
    """Largest ``r`` in (0, 1] with ``order_parameter_map(r) == r``."""
    h = lambda r: order_parameter_map(r, K, g) - r
    rs = np.linspace(1.0 / n_scan, 1.0, n_scan)
    hs = np.array([h(r) for r in rs])
    crossing = np.nonzero((hs[:-1] >= 0) & (hs[1:] <= 0))[0]
    if hs[-1] == 0:
        return 1.0
    if crossing.size == 0:
        raise NoPartiallyLockedState(
            f"no nonzero fixed point for K={K} with {g.kind} g (max residual {hs.max():.3e})")
    i = crossing[-1]
    r = optimize.brentq(h, rs[i], rs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps,
                        maxiter=200)
    if abs(h(r)) > 1e-10:
        raise NumericalError(f"self-consistency residual {abs(h(r)):.3e} too large")
    return float(r)


def build_fstat_fourier(r_stat: float, K: float, g: VelocityDistribution, grid: FieldGrid,
                        phase: Optional[Callable] = None, tol: float = 1e-12) -> SpectralField:
    """``(f_hat)_l(xi)`` for ``l = 1..ell_max`` on the grid.

    ``phase(omega)``, when given, shifts every oscillator of frequency omega
    by that angle (``theta -> theta + phase``); used to build physically
    realizable perturbed states.
    """
    a = K * r_stat
    ells = np.arange(1, grid.ell_max + 1)
    xi = grid.xi
    if a == 0:
        return SpectralField.zeros(grid)
    if g.kind == "lorentzian":
        if phase is not None:
            raise ConfigurationError("phase-shifted states need a compactly resolved g; "
                                     "lorentzian tails are handled in closed form only")
        # residue at omega = -i gamma of g(omega) z(omega)^l exp(-i xi omega), xi >= 0
        z = a / (np.hypot(a, g.scale) + g.scale)
        values = np.exp(-g.scale * xi)[None, :] * z ** ells[:, None]
        return SpectralField(grid, values + 0j)
    spacing = min(0.1, 0.5 / max(grid.xi_max, 1e-12))

    def estimate(width):
        phi, om_l, w_l = _locked_nodes(a, g, width)
        amps = [np.exp(-1j * np.outer(phi, ells))]
        omegas, weights = [om_l], [w_l]
        for sign in (1, -1):
            om, wd = _drift_nodes(a, g, width, sign)
            if om.size:
                amps.append(drift_coefficients(om, a, grid.ell_max, tol=_node_tol(wd)))
                omegas.append(om)
                weights.append(wd)
        amp = np.concatenate(amps)
        om = np.concatenate(omegas)
        w = np.concatenate(weights)
        if phase is not None:
            amp = amp * np.exp(-1j * np.outer(phase(om), ells))
        return (amp * w[:, None]).T @ np.exp(-1j * np.outer(om, xi))

    # GL panels of width 10 * spacing keep node gaps below the spacing bound
    values = _total(estimate, tol=tol, max_width=10 * spacing)
    return SpectralField(grid, values)


def force_vectors(fstat: SpectralField, ghat: np.ndarray, K: float):
    """``(r_r, r_i, rot_mode)`` with ``(f_stat)_0 = ghat`` and ``(f_stat)_{ell_max+1} = 0``."""
    grid = fstat.grid
    f = fstat.values
    below = np.vstack([np.asarray(ghat, dtype=complex)[None, :], f[:-1]])
    above = np.vstack([f[1:], np.zeros((1, grid.n_xi), dtype=complex)])
    ell = grid.ells
    r_r = 0.5 * K * ell * (below - above)
    r_i = 0.5j * K * ell * (below + above)
    rot = 1j * ell * f
    return SpectralField(grid, r_r), SpectralField(grid, r_i), SpectralField(grid, rot)


def normalize_r_theta(rot_mode: SpectralField, alpha_of_rot: float) -> SpectralField:
    if not abs(alpha_of_rot) > 1e-8:
        raise DegenerateRotationProjection(
            f"alpha(D R f_stat) = {alpha_of_rot:.3e}; the state fails the stability hypotheses")
    return rot_mode * (1.0 / float(alpha_of_rot))


@dataclass(frozen=True, eq=False)
class StationaryState:
    r_stat: float
    K: float
    g: VelocityDistribution
    grid: FieldGrid
    fstat_hat: SpectralField
    ghat: np.ndarray
    r_r: SpectralField
    r_i: SpectralField
    rot_mode: SpectralField
    r_Theta: Optional[SpectralField] = None
    residual: float = field(default=0.0)

    def with_r_theta(self, alpha_of_rot: float) -> "StationaryState":
        return replace(self, r_Theta=normalize_r_theta(self.rot_mode, alpha_of_rot))

    def to_json(self) -> str:
        fields = {name: (None if getattr(self, name) is None
                         else json.loads(getattr(self, name).to_json()))
                  for name in ("fstat_hat", "r_r", "r_i", "rot_mode", "r_Theta")}
        return json.dumps({
            "K": self.K, "r_stat": self.r_stat, "residual": self.residual,
            "g": self.g.to_dict(), "grid": self.grid.to_dict(),
            "ghat": np.stack([self.ghat.real, self.ghat.imag], axis=1).tolist(),
            "fields": fields,
        })

    @classmethod
    def from_json(cls, text: str) -> "StationaryState":
        d = json.loads(text)
        grid = FieldGrid(**d["grid"])
        fields = {k: (None if v is None else SpectralField.from_json(json.dumps(v)))
                  for k, v in d["fields"].items()}
        gh = np.asarray(d["ghat"], dtype=float)
        return cls(r_stat=d["r_stat"], K=d["K"], g=VelocityDistribution.from_dict(d["g"]),
                   grid=grid, ghat=gh[:, 0] + 1j * gh[:, 1], residual=d.get("residual", 0.0),
                   **fields)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "StationaryState":
        return cls.from_json(Path(path).read_text())


def build_force_vectors(state: StationaryState):
    return force_vectors(state.fstat_hat, state.ghat, state.K)


def stationary_state(K: float, g: VelocityDistribution, grid: FieldGrid,
                     r_stat: Optional[float] = None) -> StationaryState:
    """Solve for ``r_stat`` (unless given) and assemble the state without ``r_Theta``."""
    if r_stat is None:
        r_stat = solve_self_consistency(K, g)
    residual = abs(order_parameter_map(r_stat, K, g) - r_stat)
    fstat = build_fstat_fourier(r_stat, K, g, grid)
    ghat = g.ghat(grid.xi)
    r_r, r_i, rot = force_vectors(fstat, ghat, K)
    return StationaryState(r_stat=r_stat, K=K, g=g, grid=grid, fstat_hat=fstat, ghat=ghat,
                           r_r=r_r, r_i=r_i, rot_mode=rot, residual=residual)


def synchronization_threshold(g: VelocityDistribution) -> float:
    """Linear onset ``K_c = 2 / (pi g(0))`` of the incoherent state."""
    return 2.0 / (np.pi * float(g.pdf(0.0)))


__all__ = [
    "VelocityDistribution", "StationaryState", "drift_coefficients", "order_parameter_map",
    "order_parameter_complex", "solve_self_consistency", "build_fstat_fourier",
    "force_vectors", "build_force_vectors", "normalize_r_theta", "stationary_state",
    "synchronization_threshold",
]
