"""Periodic 1D grid, complex fields and spectral primitives.

Wavenumbers are kept in FFT-native (wrapped) order, so ``grid.k[m]`` is the
wavenumber of ``numpy.fft.fft(values)[m]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError

__all__ = [
    "Grid1D",
    "ComplexField",
    "inner_product",
    "norm_sq",
    "laplacian",
    "gradient",
    "mode_amplitude",
    "mode_amplitudes",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid ``x_j = j * spacing`` on ``[0, length)``."""

    n_points: int
    length: float = 1.0

    def __post_init__(self):
        n = int(self.n_points)
        if n != self.n_points or n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= 2, got {self.n_points}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ValueError(f"length must be positive and finite, got {self.length}")
        object.__setattr__(self, "n_points", n)
        object.__setattr__(self, "length", float(self.length))

    @property
    def spacing(self) -> float:
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * self.spacing

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)

    @property
    def k_max(self) -> float:
        return np.pi * self.n_points / self.length

    def mode_index(self, m: int) -> int:
        """Position of integer mode ``m`` in transform-native order."""
        m = int(m)
        if abs(m) >= self.n_points // 2:
            raise IndexError(f"mode {m} out of range for n_points={self.n_points}")
        return m % self.n_points

    def wavenumber(self, m: int) -> float:
        return 2 * np.pi * int(m) / self.length


@dataclass(frozen=True, eq=False)
class ComplexField:
    """Samples ``psi(x_j)`` of a complex field on ``grid``.

    The stored array is a read-only copy, so a field behaves as a value.
    """

    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128, copy=True)
        if v.shape != (self.grid.n_points,):
            raise GridMismatchError(
                f"expected {self.grid.n_points} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("field contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid1D, func) -> "ComplexField":
        return cls(grid, func(grid.x))

    def with_values(self, values) -> "ComplexField":
        return ComplexField(self.grid, values)

    def __mul__(self, c):
        return ComplexField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        _check_same_grid(self, other)
        return ComplexField(self.grid, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return ComplexField(self.grid, self.values - other.values)

    def __neg__(self):
        return ComplexField(self.grid, -self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return self.grid.n_points


def _check_same_grid(a: ComplexField, b: ComplexField):
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: {a.grid} vs {b.grid}")


def inner_product(a: ComplexField, b: ComplexField) -> complex:
    """``<a, b> = dx * sum(conj(a) * b)``, conjugate-linear in ``a``."""
    _check_same_grid(a, b)
    return complex(np.vdot(a.values, b.values) * a.grid.spacing)


def norm_sq(a: ComplexField) -> float:
    v = a.values
    return float(np.dot(v.real, v.real) + np.dot(v.imag, v.imag)) * a.grid.spacing


def _spectral_apply(a: ComplexField, multiplier: np.ndarray) -> ComplexField:
    f = sfft.fft(a.values)
    f *= multiplier
    return ComplexField(a.grid, sfft.ifft(f, overwrite_x=True))


def laplacian(a: ComplexField) -> ComplexField:
    k = a.grid.k
    return _spectral_apply(a, -k * k)


def gradient(a: ComplexField) -> ComplexField:
    """Spectral first derivative.

    The Nyquist coefficient is dropped, so real fields have real derivatives.
    """
    ik = 1j * a.grid.k
    ik[a.grid.n_points // 2] = 0.0
    return _spectral_apply(a, ik)


def mode_amplitudes(a: ComplexField) -> np.ndarray:
    """All plane-wave amplitudes ``<e_m, a>`` in transform-native order,
    with ``e_m = exp(i k_m x) / sqrt(L)``."""
    g = a.grid
    return sfft.fft(a.values) * (g.spacing / np.sqrt(g.length))


def mode_amplitude(a: ComplexField, m: int) -> complex:
    """Amplitude of mode ``m``; ``-n/2 <= m < n/2``, so the Nyquist mode is
    included and Parseval's sum runs over every coefficient."""
    g = a.grid
    m = int(m)
    if not -(g.n_points // 2) <= m < g.n_points // 2:
        raise IndexError(f"mode {m} out of range for n_points={g.n_points}")
    idx = m % g.n_points
    phase = np.exp(-2j * np.pi * idx * np.arange(g.n_points) / g.n_points)
    return complex(np.dot(phase, a.values) * (g.spacing / np.sqrt(g.length)))
