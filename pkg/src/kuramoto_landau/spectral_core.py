"""Fourier-space fields on a truncated (mode, frequency) grid.

A field holds complex amplitudes ``u_l(xi)`` for spatial modes
``l = 1..ell_max`` and a uniform grid ``xi = 0, d_xi, ..., xi_max``.
Mode ``l`` is stored in row ``l - 1``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

_BINARY_MAGIC = b"SPF1"
_BINARY_HEADER = struct.Struct("<4sqdd")


@dataclass(frozen=True)
class FieldGrid:
    ell_max: int
    xi_max: float
    d_xi: float

    def __post_init__(self):
        if int(self.ell_max) != self.ell_max or self.ell_max < 2:
            raise ConfigurationError(f"ell_max must be an integer >= 2, got {self.ell_max}")
        if not self.d_xi > 0:
            raise ConfigurationError(f"d_xi must be positive, got {self.d_xi}")
        if self.xi_max < 0:
            raise ConfigurationError(f"xi_max must be nonnegative, got {self.xi_max}")
        n = round(self.xi_max / self.d_xi)
        if abs(n * self.d_xi - self.xi_max) > 1e-9 * max(1.0, self.xi_max):
            raise ConfigurationError(
                f"xi_max={self.xi_max} is not a multiple of d_xi={self.d_xi}")
        if n + 1 < 4:
            raise ConfigurationError("grid needs at least 4 xi nodes for the stencils")
        object.__setattr__(self, "ell_max", int(self.ell_max))

    @property
    def n_xi(self) -> int:
        return round(self.xi_max / self.d_xi) + 1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ell_max, self.n_xi)

    @property
    def xi(self) -> np.ndarray:
        return np.arange(self.n_xi) * self.d_xi

    @property
    def ells(self) -> np.ndarray:
        """Mode numbers as a column, broadcastable against field values."""
        return np.arange(1, self.ell_max + 1, dtype=float)[:, None]

    def to_dict(self) -> dict:
        return {"ell_max": self.ell_max, "xi_max": self.xi_max, "d_xi": self.d_xi}


@dataclass(frozen=True, eq=False)
class SpectralField:
    grid: FieldGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ConfigurationError(
                f"field shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("field contains NaN or Inf")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: FieldGrid) -> "SpectralField":
        return cls(grid, np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_function(cls, grid: FieldGrid, fn) -> "SpectralField":
        """Build a field from ``fn(ell, xi)`` evaluated on broadcast arrays."""
        vals = np.broadcast_to(fn(grid.ells, grid.xi[None, :]), grid.shape)
        return cls(grid, np.array(vals, dtype=complex))

    def mode(self, ell: int) -> np.ndarray:
        return self.values[ell - 1]

    def _wrap(self, values) -> "SpectralField":
        return SpectralField(self.grid, values)

    def _other(self, other):
        if isinstance(other, SpectralField):
            if other.grid != self.grid:
                raise ConfigurationError("fields live on different grids")
            return other.values
        return NotImplemented

    def __add__(self, other):
        v = self._other(other)
        return NotImplemented if v is NotImplemented else self._wrap(self.values + v)

    def __sub__(self, other):
        v = self._other(other)
        return NotImplemented if v is NotImplemented else self._wrap(self.values - v)

    def __mul__(self, c):
        if isinstance(c, SpectralField):
            return NotImplemented
        return self._wrap(self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self._wrap(self.values / c)

    def __neg__(self):
        return self._wrap(-self.values)

    # serialization: header (ell_max, xi_max, d_xi) then row-major complex pairs

    def to_json(self) -> str:
        pairs = np.stack([self.values.real.ravel(), self.values.imag.ravel()], axis=1)
        return json.dumps({**self.grid.to_dict(), "values": pairs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SpectralField":
        data = json.loads(text)
        grid = FieldGrid(data["ell_max"], data["xi_max"], data["d_xi"])
        pairs = np.asarray(data["values"], dtype=float).reshape(-1, 2)
        return cls(grid, (pairs[:, 0] + 1j * pairs[:, 1]).reshape(grid.shape))

    def to_bytes(self) -> bytes:
        g = self.grid
        header = _BINARY_HEADER.pack(_BINARY_MAGIC, g.ell_max, g.xi_max, g.d_xi)
        return header + self.values.astype("<c16").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SpectralField":
        magic, ell_max, xi_max, d_xi = _BINARY_HEADER.unpack_from(blob)
        if magic != _BINARY_MAGIC:
            raise ConfigurationError("not a serialized SpectralField")
        grid = FieldGrid(ell_max, xi_max, d_xi)
        data = np.frombuffer(blob, dtype="<c16", offset=_BINARY_HEADER.size)
        return cls(grid, data.reshape(grid.shape).astype(complex))

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(self.to_json())
        else:
            path.write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SpectralField":
        path = Path(path)
        if path.suffix == ".json":
            return cls.from_json(path.read_text())
        return cls.from_bytes(path.read_bytes())


@dataclass(frozen=True)
class Weight:
    """Polynomial weight ``p_{A,b}(t) = (A + t)**b``."""

    A: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.A < 1 or self.b < 0:
            raise ConfigurationError(f"weight needs A >= 1 and b >= 0, got A={self.A}, b={self.b}")


@dataclass(frozen=True)
class NormSpec:
    weight: Weight
    k: float = -0.5


def weight_eval(w: Weight, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigurationError("weight is defined for t >= 0 only")
    out = (w.A + t) ** w.b
    return float(out) if out.ndim == 0 else out


def xi_derivative_values(values: np.ndarray, d_xi: float) -> np.ndarray:
    """Second-order derivative along the last axis (one-sided at both ends)."""
    if values.shape[-1] < 4:
        raise ConfigurationError("derivative stencils need at least 4 nodes")
    return np.gradient(values, d_xi, axis=-1, edge_order=2)


def xi_derivative(f: SpectralField) -> SpectralField:
    return SpectralField(f.grid, xi_derivative_values(f.values, f.grid.d_xi))


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def norm_density(values: np.ndarray, grid: FieldGrid, spec: NormSpec) -> np.ndarray:
    """Integrand of the squared norm, summed over modes; shape ``(..., n_xi)``."""
    du = xi_derivative_values(values, grid.d_xi)
    pw = weight_eval(spec.weight, grid.xi) ** 2
    lw = grid.ells ** (2 * spec.k)
    dens = (np.abs(values) ** 2 + np.abs(du) ** 2) * lw
    return dens.sum(axis=-2) * pw


def sobolev_norm_values(values: np.ndarray, grid: FieldGrid, spec: NormSpec):
    """Norm of raw value arrays; leading axes are treated as a batch."""
    dens = norm_density(values, grid, spec)
    return np.sqrt(dens @ trapezoid_weights(grid.n_xi, grid.d_xi))


def sobolev_norm(f: SpectralField, spec: NormSpec) -> float:
    return float(sobolev_norm_values(f.values, f.grid, spec))


def tail_ratio(f: SpectralField, spec: NormSpec, fraction: float = 0.1) -> float:
    """Share of the norm carried by the top ``fraction`` of the xi grid.

    Returned as ``sqrt(tail_sq / total_sq)``; zero for the zero field.
    """
    dens = norm_density(f.values, f.grid, spec) * trapezoid_weights(f.grid.n_xi, f.grid.d_xi)
    total = dens.sum()
    if total == 0:
        return 0.0
    start = int(np.floor((1 - fraction) * (f.grid.n_xi - 1)))
    return float(np.sqrt(dens[start:].sum() / total))


def seminorm_eta(f: SpectralField) -> float:
    return float(abs(f.values[0, 0]))
