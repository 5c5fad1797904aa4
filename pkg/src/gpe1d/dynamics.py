"""Time evolution: right-hand sides, RK4 stepping, lambda schedules, ITE.

All three dynamics share one right-hand side::

    d psi / dt = -i eta              conservative
               = -i eta - lam eta    Pitaevskii damping
               = -i eta - lam Q eta  norm-conserving (metriplectic)

with ``eta`` the GP operator and ``Q`` the projection off ``psi``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.fft as sfft

from . import _kernels
from .errors import (ConvergenceError, DegenerateStateError, DivergenceError,
                     OutputError, StabilityError)
from .grid import ComplexField, Grid1D, inner_product, norm_sq
from .model import (DynamicsKind, ModelParams, free_energy, gp_operator,
                    observables, project_q)

__all__ = [
    "DynamicsKind",
    "LambdaSchedule",
    "EvolutionConfig",
    "RK4_STABILITY",
    "stability_bound",
    "auto_dt",
    "rhs",
    "step_rk4",
    "evolve",
    "MemorySink",
    "ite_direction",
    "ground_state_ite",
    "Propagator",
]

log = logging.getLogger(__name__)

# Extent of the RK4 stability region along the imaginary axis (2*sqrt(2)
# rounded down).
RK4_STABILITY = 2.8

_KIND_CODE = {
    DynamicsKind.CONSERVATIVE: _kernels.CONSERVATIVE,
    DynamicsKind.PITAEVSKII: _kernels.PITAEVSKII,
    DynamicsKind.METRIPLECTIC: _kernels.METRIPLECTIC,
}


def stability_bound(grid: Grid1D) -> float:
    """Largest stable RK4 step for the kinetic term, ``2.8 / (k_max^2 / 2)``."""
    return RK4_STABILITY / (0.5 * grid.k_max ** 2)


def auto_dt(grid: Grid1D, fraction: float = 0.4) -> float:
    return fraction * stability_bound(grid)


def check_dt(grid: Grid1D, dt: float):
    bound = stability_bound(grid)
    if not (dt > 0 and math.isfinite(dt)):
        raise StabilityError(f"dt must be positive, got {dt}")
    if dt > bound:
        raise StabilityError(f"dt={dt:.3e} exceeds the RK4 stability bound {bound:.3e}")
    if dt > 0.5 * bound:
        warnings.warn(f"dt={dt:.3e} is above half the RK4 stability bound {bound:.3e}",
                      RuntimeWarning, stacklevel=3)


@dataclass(frozen=True)
class LambdaSchedule:
    """Piecewise-constant dissipation: ordered ``(duration, lam)`` stages."""

    stages: tuple

    def __post_init__(self):
        stages = tuple((float(d), float(l)) for d, l in self.stages)
        if not stages:
            raise ValueError("schedule needs at least one stage")
        for d, l in stages:
            if not (d > 0 and math.isfinite(d)):
                raise ValueError(f"stage duration must be positive and finite, got {d}")
            if not (l >= 0 and math.isfinite(l)):
                raise ValueError(f"stage lambda must be >= 0, got {l}")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def constant(cls, duration: float, lam: float) -> "LambdaSchedule":
        return cls(((duration, lam),))

    @property
    def total_duration(self) -> float:
        return sum(d for d, _ in self.stages)


@dataclass(frozen=True)
class EvolutionConfig:
    dt: float
    snapshot_stride: int = 1000
    observable_stride: int = 100
    renormalize: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        for name in ("snapshot_stride", "observable_stride"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")


try:
    import pyfftw
except ImportError:  # pragma: no cover - optional accelerator
    pyfftw = None


class _KineticOperator:
    """``psi -> IFFT(k^2/2 * FFT(psi))`` with preplanned transforms.

    Plans use FFTW_ESTIMATE so the algorithm (and hence every rounding) is
    the same in every process.
    """

    def __init__(self, grid: Grid1D):
        n = grid.n_points
        self.half_k2 = 0.5 * grid.k ** 2
        if pyfftw is not None:
            self._in = pyfftw.empty_aligned(n, dtype="complex128")
            self._hat = pyfftw.empty_aligned(n, dtype="complex128")
            self._out = pyfftw.empty_aligned(n, dtype="complex128")
            flags = ("FFTW_ESTIMATE",)
            self._fwd = pyfftw.FFTW(self._in, self._hat, flags=flags, threads=1)
            self._bwd = pyfftw.FFTW(self._hat, self._out, direction="FFTW_BACKWARD",
                                    flags=flags, threads=1)
            # FFTW's backward transform is unnormalised
            self._mult = self.half_k2 / n
        else:
            self._fwd = None

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        if self._fwd is None:
            f = sfft.fft(psi)
            f *= self.half_k2
            return sfft.ifft(f, overwrite_x=True)
        self._in[:] = psi
        self._fwd.execute()
        self._hat *= self._mult
        self._bwd.execute()
        return self._out


class Propagator:
    """Array-level RK4 integrator for one trajectory.

    Holds scratch buffers, so instances must not be shared between threads.
    """

    def __init__(self, grid: Grid1D, p: ModelParams, kind=DynamicsKind.METRIPLECTIC):
        self.grid = grid
        self.kind = DynamicsKind.parse(kind)
        self.kinetic = _KineticOperator(grid)
        w = p.shifted_potential(grid)
        self.w = np.broadcast_to(np.asarray(w, dtype=np.float64), (grid.n_points,)).copy()
        self.coupling = float(p.coupling)
        self.lam = float(p.lam)
        n = grid.n_points
        self._eta = np.empty(n, dtype=np.complex128)
        self._k = [np.empty(n, dtype=np.complex128) for _ in range(4)]
        self._tmp = np.empty(n, dtype=np.complex128)

    def rhs_into(self, psi: np.ndarray, out: np.ndarray) -> np.ndarray:
        kin = self.kinetic(psi)
        overlap, nsum = _kernels.gp_eta(kin, psi, self.w, self.coupling, self._eta)
        if not (math.isfinite(nsum) and np.isfinite(overlap)):
            raise DivergenceError("non-finite field or GP operator")
        kind = _KIND_CODE[self.kind]
        if kind == _kernels.METRIPLECTIC and self.lam != 0.0:
            if nsum == 0.0:
                raise DegenerateStateError("norm-conserving dynamics of the zero field")
            c = overlap / nsum
        else:
            c = 0j
        _kernels.combine(psi, self._eta, c, self.lam, kind, out)
        return out

    def step(self, psi: np.ndarray, dt: float, out: np.ndarray | None = None) -> np.ndarray:
        k1, k2, k3, k4 = self._k
        tmp = self._tmp
        stage = 0
        try:
            self.rhs_into(psi, k1)
            stage = 1
            _kernels.axpy(psi, 0.5 * dt, k1, tmp)
            self.rhs_into(tmp, k2)
            stage = 2
            _kernels.axpy(psi, 0.5 * dt, k2, tmp)
            self.rhs_into(tmp, k3)
            stage = 3
            _kernels.axpy(psi, dt, k3, tmp)
            self.rhs_into(tmp, k4)
        except DivergenceError as exc:
            exc.stage = stage + 1
            raise
        if out is None:
            out = np.empty_like(psi)
        _kernels.rk4_finish(psi, dt, k1, k2, k3, k4, out)
        return out


def rhs(psi: ComplexField, p: ModelParams, kind=DynamicsKind.METRIPLECTIC) -> ComplexField:
    prop = Propagator(psi.grid, p, kind)
    out = np.empty(psi.grid.n_points, dtype=np.complex128)
    return ComplexField(psi.grid, prop.rhs_into(np.array(psi.values), out))


def step_rk4(psi: ComplexField, p: ModelParams, kind, dt: float) -> ComplexField:
    check_dt(psi.grid, dt)
    prop = Propagator(psi.grid, p, kind)
    try:
        out = prop.step(np.array(psi.values), dt)
    except DivergenceError as exc:
        exc.step = 1
        exc.time = dt
        raise DivergenceError(f"divergence in RK4 stage {exc.stage} of a step of size {dt}",
                              step=1, time=dt, stage=exc.stage) from None
    return ComplexField(psi.grid, out)


class MemorySink:
    """Collects observable records and field snapshots in lists."""

    def __init__(self):
        self.records = []
        self.snapshots = []

    def observe(self, record):
        self.records.append(record)

    def snapshot(self, t, lam, psi):
        self.snapshots.append((t, lam, psi))

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def _emit(sinks, method, *args):
    for sink in sinks:
        fn = getattr(sink, method, None)
        if fn is None:
            continue
        try:
            fn(*args)
        except OSError as exc:
            raise OutputError(f"sink write failed ({exc}); outputs up to t={args[0] if method == 'snapshot' else args[0].t} are partial") from exc


def evolve(psi0: ComplexField, p: ModelParams, kind, schedule: LambdaSchedule,
           cfg: EvolutionConfig, sinks: Sequence = (), t0: float = 0.0) -> ComplexField:
    """Integrate through every stage of ``schedule``.

    ``p.lam`` is overridden by each stage's value.  Observable records and
    snapshots are emitted at step 0, every stride, and at the final step
    (if it is not already on a stride).  Each stage uses the largest step
    ``<= cfg.dt`` that divides its duration exactly.
    """
    kind = DynamicsKind.parse(kind)
    grid = psi0.grid
    check_dt(grid, cfg.dt)
    if kind is DynamicsKind.METRIPLECTIC and not norm_sq(psi0) > 0:
        raise DegenerateStateError("norm-conserving dynamics of the zero field")
    sinks = list(sinks) if isinstance(sinks, Iterable) else [sinks]
    n0 = norm_sq(psi0)
    psi = np.array(psi0.values)
    buf = np.empty_like(psi)
    t = float(t0)
    step = 0
    obs_stride = int(cfg.observable_stride)
    snap_stride = int(cfg.snapshot_stride)
    last_obs = last_snap = -1

    def record(lam_now):
        nonlocal last_obs, last_snap
        field = ComplexField(grid, psi)
        pk = p.replace(lam=lam_now)
        if step % obs_stride == 0 and last_obs != step:
            _emit(sinks, "observe", observables(field, pk, t, kind))
            last_obs = step
        if step % snap_stride == 0 and last_snap != step:
            _emit(sinks, "snapshot", t, lam_now, field)
            last_snap = step

    record(schedule.stages[0][1])
    lam = schedule.stages[0][1]
    for duration, lam in schedule.stages:
        n_steps = max(1, math.ceil(duration / cfg.dt - 1e-9))
        dt = duration / n_steps
        prop = Propagator(grid, p.replace(lam=lam), kind)
        t_stage = t
        for i in range(1, n_steps + 1):
            try:
                prop.step(psi, dt, out=buf)
            except DivergenceError as exc:
                raise DivergenceError(
                    f"divergence in RK4 stage {exc.stage} of step {step + 1} (t={t:.6g}, dt={dt:.3e})",
                    step=step + 1, time=t, stage=exc.stage) from None
            psi, buf = buf, psi
            if cfg.renormalize:
                psi *= math.sqrt(n0 / (np.vdot(psi, psi).real * grid.spacing))
            step += 1
            t = t_stage + i * dt
            record(lam)
    # final state, if not on a stride
    field = ComplexField(grid, psi)
    if last_obs != step:
        _emit(sinks, "observe", observables(field, p.replace(lam=lam), t, kind))
    if last_snap != step:
        _emit(sinks, "snapshot", t, lam, field)
    return field


def ite_direction(psi: ComplexField, p: ModelParams) -> ComplexField:
    """Steepest-descent direction ``-Q eta`` on the fixed-norm sphere."""
    return -project_q(psi, gp_operator(psi, p))


def _normalized(values: np.ndarray, grid: Grid1D, target: float) -> np.ndarray:
    n = np.vdot(values, values).real * grid.spacing
    return values * math.sqrt(target / n)


def ground_state_ite(psi0: ComplexField, p: ModelParams, tol: float = 1e-9,
                     max_iters: int = 200_000, tau0: float | None = None,
                     norm: float = 1.0, callback=None):
    """Imaginary-time (projected gradient) relaxation to a minimum of F.

    Iterates ``psi <- normalize(psi - tau Q eta)`` at fixed ``norm``;
    ``tau`` grows after accepted steps and halves whenever F would increase.
    Returns ``(psi, mu)`` with ``mu = <psi, eta_{mu=0}> / N``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    grid = psi0.grid
    target = float(norm)
    if not norm_sq(psi0) > 0:
        raise DegenerateStateError("ground state search from the zero field")
    # Above 2 / (k_max^2 / 2) the shortest waves grow; F barely notices
    # them, so backtracking alone cannot enforce this.
    tau_max = 1.9 / (0.5 * grid.k_max ** 2)
    tau = min(tau0, tau_max) if tau0 is not None else tau_max
    psi = ComplexField(grid, _normalized(psi0.values, grid, target))
    f_cur = free_energy(psi, p)
    residual = math.inf
    for it in range(1, max_iters + 1):
        direction = ite_direction(psi, p)
        residual = math.sqrt(norm_sq(direction) / target)
        if callback is not None:
            callback(it, psi, direction, residual)
        if residual < tol:
            break
        while True:
            trial = ComplexField(grid, _normalized(psi.values + tau * direction.values, grid, target))
            f_trial = free_energy(trial, p)
            if f_trial <= f_cur + 1e-14 * abs(f_cur) or tau < 1e-30:
                break
            tau *= 0.5
        psi, f_cur = trial, f_trial
        tau = min(1.2 * tau, tau_max)
    else:
        raise ConvergenceError(
            f"ITE did not converge in {max_iters} iterations (residual {residual:.3e})",
            residual=residual, iterations=max_iters)
    eta0 = gp_operator(psi, p.replace(mu_offset=0.0))
    mu = inner_product(psi, eta0).real / norm_sq(psi)
    return psi, mu
