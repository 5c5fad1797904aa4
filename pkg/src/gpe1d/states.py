"""Initial states: plane waves, dark/gray solitons and classical-field
thermal samples.

Soliton factors use the box coordinate ``x`` in ``[0, L)`` without wrapping.
A product of two black-soliton factors is therefore exactly periodic (each
factor goes from -1 to +1 across the box), while gray factors leave a
boundary mismatch of order ``beta``; see :func:`periodicity_defect`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ResolutionError
from .grid import ComplexField, Grid1D, norm_sq
from .model import ModelParams

__all__ = [
    "SolitonSpec",
    "ThermalSpec",
    "ThermalizationReport",
    "uniform_state",
    "plane_wave",
    "healing_length",
    "soliton_factor",
    "soliton_background_density",
    "gray_soliton",
    "two_soliton_state",
    "periodicity_defect",
    "thermal_amplitudes",
    "thermal_sample",
    "thermalization_check",
]


@dataclass(frozen=True)
class SolitonSpec:
    """Soliton centre ``position`` and velocity as a fraction of sound speed."""

    position: float
    speed_fraction: float = 0.0

    def __post_init__(self):
        if not abs(self.speed_fraction) < 1:
            raise ValueError(f"|speed_fraction| must be < 1, got {self.speed_fraction}")

    @property
    def darkness(self) -> float:
        return math.sqrt(1.0 - self.speed_fraction ** 2)


@dataclass(frozen=True)
class ThermalSpec:
    temperature: float
    mode_cutoff: int
    seed: int = 0
    condensate_fraction: float = 0.1

    def __post_init__(self):
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise ValueError("temperature must be positive and finite")
        if int(self.mode_cutoff) < 1:
            raise ValueError("mode_cutoff must be a positive integer")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.condensate_fraction < 0:
            raise ValueError("condensate_fraction must be >= 0")


def uniform_state(grid: Grid1D) -> ComplexField:
    return ComplexField(grid, np.full(grid.n_points, 1.0 / math.sqrt(grid.length), dtype=complex))


def plane_wave(grid: Grid1D, m: int) -> ComplexField:
    grid.mode_index(m)
    return ComplexField(grid, np.exp(1j * grid.wavenumber(m) * grid.x) / math.sqrt(grid.length))


def healing_length(coupling: float, n0: float) -> float:
    """``1 / sqrt(G n0)``: width of a black-soliton core, ``tanh(x / xi)``."""
    if not coupling * n0 > 0:
        raise ResolutionError("healing length is infinite for zero coupling or density")
    return 1.0 / math.sqrt(coupling * n0)


def soliton_factor(x: np.ndarray, spec: SolitonSpec, xi: float) -> np.ndarray:
    """Unit-background factor ``i beta + gamma tanh(gamma (x - x0) / xi)``."""
    beta = spec.speed_fraction
    gamma = spec.darkness
    return 1j * beta + gamma * np.tanh(gamma * (x - spec.position) / xi)


def _check_specs(grid: Grid1D, specs):
    for s in specs:
        if not 0.0 <= s.position < grid.length:
            raise ValueError(f"soliton position {s.position} outside [0, {grid.length})")


def soliton_background_density(grid: Grid1D, p: ModelParams, specs) -> float:
    """Self-consistent background density ``n0`` of a unit-norm soliton state.

    The core width depends on ``n0`` and the depletion in the cores sets
    ``n0``; a few fixed-point sweeps settle both.
    """
    if not p.coupling > 0:
        raise ResolutionError("solitons need a positive coupling")
    _check_specs(grid, specs)
    x = grid.x
    n0 = 1.0 / grid.length
    for _ in range(50):
        xi = healing_length(p.coupling, n0)
        f = np.ones(grid.n_points, dtype=complex)
        for s in specs:
            f *= soliton_factor(x, s, xi)
        new = 1.0 / (np.sum(np.abs(f) ** 2) * grid.spacing)
        if abs(new - n0) <= 1e-15 * n0:
            n0 = new
            break
        n0 = new
    return n0


def _soliton_product(grid: Grid1D, p: ModelParams, specs,
                     match_phase: bool = False) -> tuple[np.ndarray, float]:
    n0 = soliton_background_density(grid, p, specs)
    xi = healing_length(p.coupling, n0)
    if not grid.spacing < xi / 4:
        raise ResolutionError(
            f"grid spacing {grid.spacing:.3e} does not resolve the healing length "
            f"{xi:.3e} (need spacing < xi/4, n_points >= {4 * grid.length / xi:.0f})")
    f = np.ones(grid.n_points, dtype=complex)
    for s in specs:
        f *= soliton_factor(grid.x, s, xi)
    if match_phase:
        # spread the boundary phase mismatch as a uniform phase gradient
        ends = np.ones(2, dtype=complex)
        for s in specs:
            ends *= soliton_factor(np.array([0.0, grid.length]), s, xi)
        dphi = float(np.angle(ends[1] / ends[0]))
        f *= np.exp(-1j * dphi * grid.x / grid.length)
    values = math.sqrt(n0) * f
    values /= math.sqrt(np.vdot(values, values).real * grid.spacing)
    return values, n0


def gray_soliton(grid: Grid1D, p: ModelParams, spec: SolitonSpec) -> ComplexField:
    """Single dark (``speed_fraction = 0``) or gray soliton, unit norm.

    A single soliton has a phase jump across the periodic boundary; use
    :func:`two_soliton_state` for periodic-compatible configurations.
    """
    values, _ = _soliton_product(grid, p, [spec])
    return ComplexField(grid, values)


def two_soliton_state(grid: Grid1D, p: ModelParams, spec_a: SolitonSpec,
                      spec_b: SolitonSpec, match_phase: bool = False) -> ComplexField:
    """Product of two soliton factors at unit norm.

    With ``match_phase`` the phase difference between the two box ends is
    removed by a linear phase ramp, which makes gray pairs smooth across the
    periodic boundary.  Black pairs are unaffected.
    """
    if spec_a.position == spec_b.position:
        raise ValueError("soliton centres must be distinct")
    # sorted, so that swapping the arguments is bit-for-bit symmetric
    specs = sorted([spec_a, spec_b], key=lambda s: (s.position, s.speed_fraction))
    values, _ = _soliton_product(grid, p, specs, match_phase)
    return ComplexField(grid, values)


def periodicity_defect(grid: Grid1D, p: ModelParams, specs) -> float:
    """``|psi(L) - psi(0)| / sqrt(n0)`` of the analytic soliton product."""
    n0 = soliton_background_density(grid, p, specs)
    xi = healing_length(p.coupling, n0)
    ends = np.array([0.0, grid.length])
    f = np.ones(2, dtype=complex)
    for s in specs:
        f *= soliton_factor(ends, s, xi)
    return float(abs(f[1] - f[0]))


def thermal_amplitudes(grid: Grid1D, p: ModelParams, spec: ThermalSpec) -> np.ndarray:
    """Plane-wave amplitudes (transform-native order) before rescaling.

    Mode 0 carries ``sqrt(condensate_fraction)``; modes ``0 < |m| <= cutoff``
    are independent complex Gaussians with ``<|a_m|^2> = T / (k_m^2/2 + G n0)``
    and ``n0 = 1 / L``.
    """
    if not int(spec.mode_cutoff) < grid.n_points // 2:
        raise ValueError(f"mode_cutoff {spec.mode_cutoff} must be < n_points/2")
    rng = np.random.default_rng(spec.seed)
    n0 = 1.0 / grid.length
    cutoff = int(spec.mode_cutoff)
    modes = np.concatenate([np.arange(1, cutoff + 1), -np.arange(1, cutoff + 1)])
    k = 2 * np.pi * modes / grid.length
    energy = 0.5 * k * k + p.coupling * n0
    variance = spec.temperature / energy
    z = rng.standard_normal((modes.size, 2)) @ np.array([1.0, 1j])
    amps = np.zeros(grid.n_points, dtype=complex)
    amps[0] = math.sqrt(spec.condensate_fraction)
    amps[modes % grid.n_points] = np.sqrt(variance / 2) * z
    return amps


def thermal_sample(grid: Grid1D, p: ModelParams, spec: ThermalSpec) -> ComplexField:
    """Rayleigh-Jeans classical-field sample rescaled to unit norm."""
    amps = thermal_amplitudes(grid, p, spec)
    # psi(x_j) = sum_m a_m exp(i k_m x_j) / sqrt(L)
    values = np.fft.ifft(amps) * (grid.n_points / math.sqrt(grid.length))
    norm = np.vdot(values, values).real * grid.spacing
    return ComplexField(grid, values / math.sqrt(norm))


@dataclass(frozen=True)
class ThermalizationReport:
    mean: float
    variance: float
    first_half_mean: float
    second_half_mean: float
    standard_error: float
    stationary: bool


def _batch_standard_error(series: np.ndarray, n_batches: int = 10) -> float:
    nb = min(n_batches, series.size)
    batches = np.array_split(series, nb)
    means = np.array([b.mean() for b in batches])
    if nb < 2:
        return 0.0
    return float(means.std(ddof=1) / math.sqrt(nb))


def thermalization_check(records, min_records: int = 100) -> ThermalizationReport:
    """Ground-mode occupation statistics of a conservative run.

    Stationary when the first- and second-half means differ by at most three
    pooled standard errors; standard errors use batch means, since
    successive records are strongly correlated.
    """
    occ = np.array([r.ground_mode_occ if hasattr(r, "ground_mode_occ") else r
                    for r in records], dtype=float)
    if occ.size < min_records:
        raise ValueError(f"thermalization_check needs >= {min_records} records, got {occ.size}")
    half = occ.size // 2
    first, second = occ[:half], occ[occ.size - half:]
    se = math.hypot(_batch_standard_error(first), _batch_standard_error(second))
    m1, m2 = float(first.mean()), float(second.mean())
    return ThermalizationReport(
        mean=m2,
        variance=float(second.var()),
        first_half_mean=m1,
        second_half_mean=m2,
        standard_error=se,
        stationary=bool(abs(m1 - m2) <= 3 * se),
    )
