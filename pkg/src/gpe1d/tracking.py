"""Soliton tracking from density snapshots.

Minima are located on the grid and refined by a three-point parabola, with
periodic neighbours.  When the complex field is available the refinement
instead minimizes the density of its trigonometric interpolant, which is
exact for the spectral representation and resolves true nodes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = ["DensityMinimum", "find_density_minima", "track_solitons", "SolitonTrack"]


@dataclass(frozen=True)
class DensityMinimum:
    position: float
    depth: float      # interpolated minimum density
    index: int


def _interpolant(values: np.ndarray, spacing: float):
    """Density of the trigonometric interpolant of ``values`` as a function of x."""
    n = values.size
    length = n * spacing
    coef = np.fft.fft(values) / n
    m = np.fft.fftfreq(n, 1.0 / n)
    coef[n // 2] = 0.5 * coef[n // 2]   # split the Nyquist term symmetrically
    coef = np.append(coef, coef[n // 2])
    m = np.append(m, n // 2)
    k = 2 * np.pi * m / length

    def rho(x):
        return abs(np.dot(coef, np.exp(1j * k * x))) ** 2
    return rho


def find_density_minima(rho: np.ndarray, spacing: float, count: int = 2,
                        threshold: float = 0.5, field: np.ndarray | None = None
                        ) -> list[DensityMinimum]:
    """The ``count`` deepest local minima of ``rho`` below ``threshold * mean``,
    sorted by position.

    With ``field`` (the complex values whose modulus squared is ``rho``) the
    position and depth come from the band-limited interpolant.
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.size
    dens = _interpolant(np.asarray(field), spacing) if field is not None else None
    left, right = np.roll(rho, 1), np.roll(rho, -1)
    idx = np.flatnonzero((rho <= left) & (rho < right) & (rho < threshold * rho.mean()))
    idx = idx[np.argsort(rho[idx])][:count]
    out = []
    for i in idx:
        a, b, c = rho[(i - 1) % n], rho[i], rho[(i + 1) % n]
        curv = a - 2 * b + c
        shift = 0.5 * (a - c) / curv if curv > 0 else 0.0
        shift = float(np.clip(shift, -0.5, 0.5))
        depth = b - 0.25 * (a - c) * shift
        pos = ((i + shift) * spacing) % (n * spacing)
        if dens is not None:
            res = minimize_scalar(dens, bounds=(i * spacing - spacing, i * spacing + spacing),
                                  method="bounded", options={"xatol": 1e-12 * n * spacing})
            pos, depth = float(res.x) % (n * spacing), float(res.fun)
        out.append(DensityMinimum(pos, max(float(depth), 0.0), int(i)))
    return sorted(out, key=lambda m: m.position)


@dataclass
class SolitonTrack:
    times: np.ndarray
    positions: np.ndarray    # (n_times, count), unwrapped
    depths: np.ndarray       # (n_times, count)
    mean_density: np.ndarray

    def velocities(self) -> np.ndarray:
        return np.gradient(self.positions, self.times, axis=0)


def track_solitons(snapshots, count: int = 2, threshold: float = 0.5,
                   spectral: bool = True) -> SolitonTrack:
    """Follow ``count`` density notches through ``(t, lam, field)`` snapshots.

    Tracking stops at the first snapshot where fewer than ``count`` notches
    remain.  Notches are matched to their nearest predecessor (periodic
    distance), and positions are unwrapped across the box boundary.
    ``spectral`` selects interpolant refinement over the parabola.
    """
    times, pos, dep, means = [], [], [], []
    prev = None
    for t, _lam, psi in snapshots:
        g = psi.grid
        rho = np.abs(psi.values) ** 2
        mins = find_density_minima(rho, g.spacing, count, threshold,
                                   psi.values if spectral else None)
        if len(mins) < count:
            break
        p = np.array([m.position for m in mins])
        d = np.array([m.depth for m in mins])
        if prev is not None:
            L = g.length
            order = []
            for q in prev:
                dist = np.abs((p - q % L + L / 2) % L - L / 2)
                dist[order] = np.inf
                order.append(int(np.argmin(dist)))
            p, d = p[order], d[order]
            delta = (p - prev % L + L / 2) % L - L / 2
            p = prev + delta
        times.append(t)
        pos.append(p)
        dep.append(d)
        means.append(rho.mean())
        prev = p
    return SolitonTrack(np.array(times), np.array(pos).reshape(-1, count),
                        np.array(dep).reshape(-1, count), np.array(means))
