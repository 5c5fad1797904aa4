"""Linear response of stationary states.

Around the uniform background the fluctuation amplitudes
``(A, B)`` of ``d psi`` and ``d psi*`` at wavenumber ``k != 0`` obey::

    omega A =  (1 - i lam) [ (eps + G n0) A + G n0 B ]
   -omega B =  (1 + i lam) [ (eps + G n0) B + G n0 A ]

with ``eps = k^2 / 2``; the projection only touches ``k = 0``.  The roots are
``omega = -i lam (eps + G n0) +/- sqrt((1 + lam^2) eps (eps + 2 G n0)
- lam^2 (eps + G n0)^2)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import DegenerateStateError, FitError, ResolutionError
from .grid import ComplexField, Grid1D, norm_sq
from .model import ModelParams, gp_operator, inner_product, stationarity_residual
from .dynamics import (DynamicsKind, EvolutionConfig, LambdaSchedule, auto_dt,
                       evolve)

__all__ = [
    "DispersionPoint",
    "dispersion_matrix",
    "analytic_dispersion",
    "bogoliubov_frequency",
    "sound_wave_estimate",
    "DispersionConfig",
    "DispersionFit",
    "fit_two_frequency",
    "measure_dispersion",
    "linearized_operator",
    "StabilityReport",
    "linearized_stability_report",
]


@dataclass(frozen=True)
class DispersionPoint:
    k: float
    omega: complex
    u_v_ratio: complex    # v / u = B / A of the eigenvector


def bogoliubov_frequency(k: float, gn0: float) -> float:
    eps = 0.5 * k * k
    return math.sqrt(eps * (eps + 2 * gn0))


def sound_wave_estimate(k: float, gn0: float, lam: float) -> complex:
    """Long-wavelength form ``c_s k - i lam k^2 / 2`` quoted for small damping.

    Tabulated for comparison only; it does not follow from the 2x2 system
    above (whose damping contains ``G n0``).
    """
    return math.sqrt(gn0) * k - 1j * lam * 0.5 * k * k


def dispersion_matrix(k: float, gn0: float, lam: float) -> np.ndarray:
    eps = 0.5 * k * k
    a = eps + gn0
    return np.array([[(1 - 1j * lam) * a, (1 - 1j * lam) * gn0],
                     [-(1 + 1j * lam) * gn0, -(1 + 1j * lam) * a]])


def analytic_dispersion(k: float, p: ModelParams, n0: float = 1.0) -> DispersionPoint:
    """Damped Bogoliubov branch with ``Re(omega) >= 0`` and ``Im(omega) <= 0``.

    ``k = 0`` returns the gauge zero mode (``omega = 0``, ``B = -A``).
    """
    gn0 = p.coupling * n0
    lam = p.lam
    if k == 0:
        return DispersionPoint(0.0, 0j, -1 + 0j)
    eps = 0.5 * k * k
    a = eps + gn0
    disc = (1 + lam * lam) * eps * (eps + 2 * gn0) - (lam * a) ** 2
    root = cmath.sqrt(disc)
    omega = -1j * lam * a + root
    if omega.real < 0:
        omega = -1j * lam * a - root
    m = dispersion_matrix(k, gn0, lam)
    ratio = -m[1, 0] / (m[1, 1] - omega)
    return DispersionPoint(float(k), complex(omega), complex(ratio))


@dataclass(frozen=True)
class DispersionConfig:
    """Settings for a measured dispersion point.

    ``t_end`` defaults to one period of a sound wave at ``k``.
    """

    n_points: int = 2048
    length: float = 1.0
    amplitude: float = 1e-4
    t_end: float | None = None
    dt: float | None = None
    samples: int = 400
    fit_tolerance: float = 1e-3


@dataclass
class DispersionFit:
    omega: complex
    amplitudes: np.ndarray      # [[a+, b+], [a-, b-]]
    residual: float             # rms misfit / rms signal
    times: np.ndarray = field(repr=False)
    series: np.ndarray = field(repr=False)   # (2, n_times): modes +m, -m


class _ModeSink:
    def __init__(self, grid: Grid1D, m: int):
        self.grid = grid
        self.idx = [grid.mode_index(m), grid.mode_index(-m)]
        self.times = []
        self.values = []

    def snapshot(self, t, lam, psi):
        v = np.fft.fft(psi.values)[self.idx] * (self.grid.spacing / math.sqrt(self.grid.length))
        self.times.append(t)
        self.values.append(v)


def _basis(times, omega):
    return np.stack([np.exp(-1j * omega * times), np.exp(1j * np.conj(omega) * times)], axis=1)


def _prony_guess(times, series):
    """Two-pole linear prediction on uniformly sampled data."""
    dt = times[1] - times[0]
    rows, rhs = [], []
    for z in series:
        rows.append(np.stack([z[1:-1], z[:-2]], axis=1))
        rhs.append(z[2:])
    coef, *_ = np.linalg.lstsq(np.concatenate(rows), np.concatenate(rhs), rcond=None)
    poles = np.roots([1.0, -coef[0], -coef[1]])
    omegas = 1j * np.log(poles) / dt
    return complex(omegas[np.argmax(omegas.real)])


def fit_two_frequency(times: np.ndarray, series: np.ndarray, omega0: complex | None = None):
    """Least-squares fit of ``a exp(-i w t) + b exp(i conj(w) t)`` shared by
    every row of ``series``.  Amplitudes are eliminated linearly (variable
    projection); ``w`` is refined by nonlinear least squares."""
    times = np.asarray(times, dtype=float)
    series = np.atleast_2d(np.asarray(series, dtype=complex))
    t0 = times[0]
    tt = times - t0
    scale = np.sqrt(np.mean(np.abs(series) ** 2))
    data = series / scale
    if omega0 is None:
        omega0 = _prony_guess(tt, data)
    w_scale = max(abs(omega0), 1e-12)

    def amplitudes(w):
        basis = _basis(tt, w)
        amps, *_ = np.linalg.lstsq(basis, data.T, rcond=None)
        return basis, amps

    def residuals(x):
        w = complex(x[0], x[1]) * w_scale
        basis, amps = amplitudes(w)
        r = (basis @ amps - data.T).ravel()
        return np.concatenate([r.real, r.imag])

    x0 = np.array([omega0.real, omega0.imag]) / w_scale
    sol = scipy.optimize.least_squares(residuals, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                       method="lm")
    w = complex(sol.x[0], sol.x[1]) * w_scale
    basis, amps = amplitudes(w)
    misfit = basis @ amps - data.T
    rel = float(np.sqrt(np.mean(np.abs(misfit) ** 2)))
    # back to t = times[0] reference and physical scale
    shift = np.array([np.exp(1j * w * t0), np.exp(-1j * np.conj(w) * t0)])
    return DispersionFit(w, (amps * shift[:, None]).T * scale, rel, times, series)


def measure_dispersion(k_index: int, p: ModelParams, cfg: DispersionConfig = DispersionConfig(),
                       kind=DynamicsKind.METRIPLECTIC, return_fit: bool = False):
    """Evolve ``(1 + a cos(k x)) / sqrt(L)`` and fit the complex frequency of
    modes ``+-k_index``.

    The chemical potential is set to ``G / L`` so the background is at rest.
    """
    grid = Grid1D(cfg.n_points, cfg.length)
    m = int(k_index)
    if m == 0:
        raise ValueError("k_index must be non-zero")
    k = grid.wavenumber(m)
    grid.mode_index(m)
    n0 = 1.0 / grid.length
    gn0 = p.coupling * n0
    params = p.replace(mu_offset=gn0)
    psi0 = ComplexField(grid, (1 + cfg.amplitude * np.cos(k * grid.x)) / math.sqrt(grid.length))
    t_end = cfg.t_end
    if t_end is None:
        t_end = 2 * math.pi / max(bogoliubov_frequency(k, gn0), 1e-300)
    dt = cfg.dt if cfg.dt is not None else auto_dt(grid)
    n_steps = max(cfg.samples, math.ceil(t_end / dt))
    stride = max(1, n_steps // cfg.samples)
    n_steps = stride * cfg.samples
    dt = t_end / n_steps
    sink = _ModeSink(grid, m)
    evolve(psi0, params, kind, LambdaSchedule.constant(t_end, params.lam),
           EvolutionConfig(dt=dt, snapshot_stride=stride, observable_stride=n_steps + 1),
           [sink])
    times = np.array(sink.times)
    series = np.array(sink.values).T
    fit = fit_two_frequency(times, series)
    signal = cfg.amplitude / 2
    if not fit.residual * np.sqrt(np.mean(np.abs(series) ** 2)) <= cfg.fit_tolerance * signal:
        raise FitError(f"two-frequency fit residual {fit.residual:.3e} above tolerance",
                       series=(times, series), residual=fit.residual)
    m_mat = dispersion_matrix(k, gn0, params.lam)
    ratio = -m_mat[1, 0] / (m_mat[1, 1] - fit.omega)
    point = DispersionPoint(float(k), complex(fit.omega), complex(ratio))
    return (point, fit) if return_fit else point


def _second_derivative_matrix(grid: Grid1D) -> np.ndarray:
    n = grid.n_points
    k2 = grid.k ** 2
    eye = np.eye(n)
    return np.real(np.fft.ifft(-k2[:, None] * np.fft.fft(eye, axis=0), axis=0))


def linearized_operator(psi: ComplexField, p: ModelParams, kind=DynamicsKind.METRIPLECTIC):
    """Real ``2n x 2n`` Jacobian of the flow at ``psi`` on ``(Re, Im)`` pairs.

    The chemical potential is replaced by ``<psi, eta_0> / N`` so that ``psi``
    is a fixed point up to its stationarity residual.
    """
    kind = DynamicsKind.parse(kind)
    grid = psi.grid
    n = grid.n_points
    nrm = norm_sq(psi)
    if not nrm > 0:
        raise DegenerateStateError("linearization around the zero field")
    base = p.replace(mu_offset=0.0)
    mu = inner_product(psi, gp_operator(psi, base)).real / nrm
    v = psi.values
    w = np.zeros(n) if p.potential is None else p.shifted_potential(grid) + p.mu_offset
    kin = -0.5 * _second_derivative_matrix(grid)
    K = kin + np.diag(w - mu + 2 * p.coupling * np.abs(v) ** 2)
    D = np.diag(p.coupling * v * v)
    if kind is DynamicsKind.CONSERVATIVE or p.lam == 0:
        C = -1j * np.eye(n)
    elif kind is DynamicsKind.PITAEVSKII:
        C = -(1j + p.lam) * np.eye(n)
    else:
        Q = np.eye(n) - np.outer(v, np.conj(v)) * grid.spacing / nrm
        C = -1j * np.eye(n) - p.lam * Q
    P = C @ K
    R = C @ D
    S, T = P + R, P - R
    return np.block([[S.real, -T.imag], [S.imag, T.real]])


@dataclass
class StabilityReport:
    eigenvalues: np.ndarray
    max_growth_rate: float
    n_zero_modes: int
    all_decay: bool
    growth_tolerance: float


def linearized_stability_report(psi: ComplexField, p: ModelParams,
                                kind=DynamicsKind.METRIPLECTIC,
                                stationarity_tol: float = 1e-6,
                                growth_tol: float = 1e-8,
                                zero_tol: float | None = None) -> StabilityReport:
    """Spectrum of the linearized flow on the fixed-norm tangent space.

    Norm-changing perturbations are excluded (the flow cannot leave the
    sphere), leaving ``2n - 1`` eigenvalues.
    """
    grid = psi.grid
    if grid.n_points > 512:
        raise ResolutionError("dense linearization limited to n_points <= 512")
    res = stationarity_residual(psi, p)
    if not res < stationarity_tol:
        raise ValueError(f"state is not stationary: ||Q eta|| / ||psi|| = {res:.3e}")
    J = linearized_operator(psi, p, kind)
    v = psi.values
    normal = np.concatenate([v.real, v.imag])
    normal /= np.linalg.norm(normal)
    # orthonormal basis of the complement of the norm direction
    q, _ = np.linalg.qr(np.column_stack([normal, np.eye(normal.size)]))
    basis = q[:, 1:normal.size]
    Jt = basis.T @ J @ basis
    ev = np.linalg.eigvals(Jt)
    scale = np.abs(ev).max() if ev.size else 1.0
    zt = zero_tol if zero_tol is not None else 1e-9 * max(scale, 1.0)
    max_growth = float(ev.real.max())
    return StabilityReport(
        eigenvalues=ev,
        max_growth_rate=max_growth,
        n_zero_modes=int(np.sum(np.abs(ev) < zt)),
        all_decay=bool(max_growth <= growth_tol),
        growth_tolerance=growth_tol,
    )
