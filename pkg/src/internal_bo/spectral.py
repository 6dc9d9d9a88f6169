"""Fourier-multiplier operators on a uniform periodic grid.

Fields are plain real ``numpy`` arrays sampled on a :class:`PeriodicGrid`;
every operator takes the grid explicitly. ``D = -i d/dx`` has the real symbol
``k``, so the products ``D eta D`` and ``D^2`` that appear in the truncated
Dirichlet-Neumann operators are real operators and are evaluated as
``-d/dx (eta d/dx)`` and ``-d^2/dx^2``.

The whole-line problem is replaced by a long periodic box. ``|D|^{-1}`` and the
antiderivative annihilate the zero mode, and they refuse inputs whose mean is
not zero to round-off.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .model_params import FluidStack

__all__ = [
    "PeriodicGrid",
    "RealField",
    "ZeroMeanError",
    "ZERO_MEAN_RTOL",
    "is_zero_mean",
    "integrate",
    "inner",
    "derivative",
    "abs_d",
    "abs_d_inverse",
    "antiderivative",
    "d_squared",
    "d_eta_d",
    "absd_eta_absd",
    "flat_dno_upper_exact",
    "dno_lower_terms",
    "dno_upper_terms",
    "dno_lower_truncated",
    "dno_upper_truncated",
    "b_inverse_terms",
    "b_inverse_truncated",
    "dealias",
    "write_field_csv",
    "read_field_csv",
]

ZERO_MEAN_RTOL = 1e-12


class ZeroMeanError(ValueError):
    """An operator with a singular zero mode got a field with nonzero mean."""


@dataclass(frozen=True)
class PeriodicGrid:
    n: int
    length: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 16, got {n!r}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"grid length must be positive, got {self.length!r}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Full FFT-ordered wavenumbers 2 pi j / L."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    @cached_property
    def k(self) -> np.ndarray:
        """Non-negative wavenumbers of the real transform."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.spacing)

    @cached_property
    def ik(self) -> np.ndarray:
        """Symbol of d/dx; the Nyquist mode is dropped so the operator stays real and skew."""
        out = 1j * self.k
        out[-1] = 0.0
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Keep |j| < n/3 (two-thirds rule)."""
        j = np.arange(self.k.size)
        return (3 * j < self.n).astype(float)

    @property
    def kmax(self) -> float:
        return float(self.k[-1])

    def to_dict(self) -> dict:
        return {"n": int(self.n), "length": float(self.length)}


@dataclass(frozen=True)
class RealField:
    """Samples of a real field together with the grid they live on."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite samples")
        object.__setattr__(self, "values", v)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def is_zero_mean(self) -> bool:
        return is_zero_mean(self.values)

    def to_csv(self, path) -> None:
        write_field_csv(path, self.grid, self.values)

    @classmethod
    def from_csv(cls, path, grid: PeriodicGrid | None = None) -> "RealField":
        grid, values = read_field_csv(path, grid)
        return cls(grid, values)


def is_zero_mean(f: np.ndarray) -> bool:
    f = np.asarray(f)
    return abs(np.mean(f)) <= ZERO_MEAN_RTOL * np.max(np.abs(f), initial=0.0)


def _require_zero_mean(f: np.ndarray, what: str) -> None:
    if not is_zero_mean(f):
        scale = np.max(np.abs(f), initial=0.0)
        raise ZeroMeanError(
            f"{what} needs a zero-mean field: mean={np.mean(f):.3e}, "
            f"tolerance={ZERO_MEAN_RTOL * scale:.3e}"
        )


def _apply(f: np.ndarray, grid: PeriodicGrid, symbol: np.ndarray) -> np.ndarray:
    return np.fft.irfft(np.fft.rfft(f) * symbol, n=grid.n)


def integrate(f: np.ndarray, grid: PeriodicGrid) -> float:
    """Rectangle rule, spectrally accurate for smooth periodic integrands."""
    return float(np.sum(f) * grid.spacing)


def inner(f: np.ndarray, g: np.ndarray, grid: PeriodicGrid) -> float:
    return float(np.dot(f, g) * grid.spacing)


# ---------------------------------------------------------------------------
# elementary multipliers


def derivative(f: np.ndarray, grid: PeriodicGrid, order: int = 1) -> np.ndarray:
    return _apply(f, grid, grid.ik**order)


def abs_d(f: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    return _apply(f, grid, grid.k)


def d_squared(f: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """D^2 = -d^2/dx^2, symbol k^2."""
    return _apply(f, grid, grid.k**2)


def _inverse_symbol(symbol: np.ndarray) -> np.ndarray:
    out = np.zeros_like(symbol)
    nz = symbol != 0
    out[nz] = 1.0 / symbol[nz]
    return out


def abs_d_inverse(f: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    _require_zero_mean(f, "|D|^-1")
    return _apply(f, grid, _inverse_symbol(grid.k))


def antiderivative(f: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    """Zero-mean primitive of a zero-mean field."""
    _require_zero_mean(f, "antiderivative")
    # Nyquist is not invertible under the real-skew derivative; drop it.
    return _apply(f, grid, _inverse_symbol(grid.ik))


def dealias(f: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    return _apply(f, grid, grid.dealias_mask)


# ---------------------------------------------------------------------------
# Dirichlet-Neumann building blocks


def d_eta_d(eta: np.ndarray, f: np.ndarray, grid: PeriodicGrid, dealiased: bool = False) -> np.ndarray:
    """D eta D f = -(eta f_x)_x."""
    prod = eta * derivative(f, grid)
    if dealiased:
        prod = dealias(prod, grid)
    return -derivative(prod, grid)


def absd_eta_absd(eta: np.ndarray, f: np.ndarray, grid: PeriodicGrid, dealiased: bool = False) -> np.ndarray:
    prod = eta * abs_d(f, grid)
    if dealiased:
        prod = dealias(prod, grid)
    return abs_d(prod, grid)


def flat_dno_upper_exact(f: np.ndarray, grid: PeriodicGrid, h1: float) -> np.ndarray:
    """Upper-layer operator for a flat interface, symbol k tanh(h1 k)."""
    return _apply(f, grid, grid.k * np.tanh(h1 * grid.k))


def dno_lower_terms(eta, f, grid: PeriodicGrid, delta: float, dealiased: bool = False) -> dict:
    """Orders 1 and 3 of the lower-layer operator G (order 2 vanishes)."""
    return {
        1: delta * abs_d(f, grid),
        3: delta**3 * (d_eta_d(eta, f, grid, dealiased) - absd_eta_absd(eta, f, grid, dealiased)),
    }


def dno_upper_terms(eta, f, grid: PeriodicGrid, delta: float, h1: float, dealiased: bool = False) -> dict:
    """Orders 2 and 3 of the upper-layer operator G1 (order 1 vanishes)."""
    return {
        2: delta**2 * h1 * d_squared(f, grid),
        3: -(delta**3) * d_eta_d(eta, f, grid, dealiased),
    }


def dno_lower_truncated(eta, f, grid: PeriodicGrid, delta: float, dealiased: bool = False) -> np.ndarray:
    t = dno_lower_terms(eta, f, grid, delta, dealiased)
    return t[1] + t[3]


def dno_upper_truncated(eta, f, grid: PeriodicGrid, delta: float, h1: float, dealiased: bool = False) -> np.ndarray:
    t = dno_upper_terms(eta, f, grid, delta, h1, dealiased)
    return t[2] + t[3]


def b_inverse_terms(f: np.ndarray, grid: PeriodicGrid, delta: float, stack: FluidStack) -> dict:
    """Orders -1 and 0 of B^{-1}, B = rho G1 + rho1 G."""
    return {
        -1: abs_d_inverse(f, grid) / (delta * stack.rho1),
        0: -stack.rho * stack.h1 / stack.rho1**2 * f,
    }


def b_inverse_truncated(f: np.ndarray, grid: PeriodicGrid, delta: float, stack: FluidStack) -> np.ndarray:
    t = b_inverse_terms(f, grid, delta, stack)
    return t[-1] + t[0]


# ---------------------------------------------------------------------------
# snapshot files


def write_field_csv(path, grid: PeriodicGrid, values: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for xj, vj in zip(grid.x, values):
            w.writerow([f"{xj:.17g}", f"{vj:.17g}"])


def read_field_csv(path, grid: PeriodicGrid | None = None) -> tuple[PeriodicGrid, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["x", "value"]:
        raise ValueError(f"{path}: expected header 'x,value'")
    data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError(f"{path}: no samples")
    x, values = data[:, 0], data[:, 1]
    if grid is None:
        grid = PeriodicGrid(len(x), len(x) * (x[1] - x[0]))
    if len(x) != grid.n or not np.allclose(x, grid.x, rtol=0, atol=1e-9 * grid.length):
        raise ValueError(f"{path}: sample positions do not match the grid")
    return grid, values
