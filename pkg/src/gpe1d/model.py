"""Free-energy functional, GP operator, projection kernel and observables.

Box units throughout: hbar = m = 1, lengths in units of the box size, the
wave function normalised to one and the coupling carrying the particle
number (``coupling = g * N``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace, fields

import numpy as np
import scipy.fft as sfft

from .errors import DegenerateStateError, GridMismatchError
from .grid import ComplexField, Grid1D, gradient, inner_product, norm_sq

__all__ = [
    "DynamicsKind",
    "ModelParams",
    "ObservableRecord",
    "free_energy",
    "gp_operator",
    "project_q",
    "density",
    "current",
    "observables",
    "stationarity_residual",
]


class DynamicsKind(enum.Enum):
    CONSERVATIVE = "conservative"
    PITAEVSKII = "pitaevskii"
    METRIPLECTIC = "metriplectic"

    @classmethod
    def parse(cls, value) -> "DynamicsKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown dynamics kind {value!r}") from None


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Physical parameters.

    ``lam`` is the dissipation coefficient (``lambda`` is reserved in Python).
    ``potential`` is either ``None`` (V = 0) or a real array of grid samples.
    """

    coupling: float = 0.0
    potential: np.ndarray | None = field(default=None, repr=False)
    mu_offset: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.coupling) or self.coupling < 0:
            raise ValueError(f"coupling must be >= 0, got {self.coupling}")
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not np.isfinite(self.mu_offset):
            raise ValueError("mu_offset must be finite")
        if self.potential is not None:
            v = np.asarray(self.potential)
            if np.iscomplexobj(v):
                if np.any(v.imag != 0):
                    raise ValueError("potential must be real-valued")
                v = v.real
            v = np.array(v, dtype=np.float64, copy=True)
            if v.ndim != 1 or not np.all(np.isfinite(v)):
                raise ValueError("potential must be a finite 1D array")
            v.flags.writeable = False
            object.__setattr__(self, "potential", v)

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def shifted_potential(self, grid: Grid1D):
        """``V - mu`` as an array on ``grid`` (or a scalar when V = 0)."""
        if self.potential is None:
            return -float(self.mu_offset)
        if self.potential.shape != (grid.n_points,):
            raise GridMismatchError(
                f"potential has {self.potential.shape[0]} samples, grid has {grid.n_points}")
        return self.potential - self.mu_offset


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    norm: float
    free_energy: float
    mu_mean: float
    mu_var: float
    dissipation_rate: float
    ground_mode_occ: float

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]

    def as_tuple(self):
        return tuple(getattr(self, name) for name in self.field_names())


def _kinetic_half_k2(grid: Grid1D) -> np.ndarray:
    k = grid.k
    return 0.5 * k * k


def free_energy(psi: ComplexField, p: ModelParams) -> float:
    """``F = int [ |psi'|^2 / 2 + (V - mu) |psi|^2 + G |psi|^4 / 2 ] dx``."""
    g = psi.grid
    v = psi.values
    rho = v.real ** 2 + v.imag ** 2
    f_hat = sfft.fft(v)
    kinetic = np.dot(_kinetic_half_k2(g), f_hat.real ** 2 + f_hat.imag ** 2) / g.n_points
    local = np.sum(p.shifted_potential(g) * rho + 0.5 * p.coupling * rho * rho)
    return float((kinetic + local) * g.spacing)


def gp_operator(psi: ComplexField, p: ModelParams) -> ComplexField:
    """``eta = dF/dpsi* = -psi''/2 + (V - mu) psi + G |psi|^2 psi``."""
    g = psi.grid
    v = psi.values
    f_hat = sfft.fft(v)
    f_hat *= _kinetic_half_k2(g)
    eta = sfft.ifft(f_hat, overwrite_x=True)
    eta += (p.shifted_potential(g) + p.coupling * (v.real ** 2 + v.imag ** 2)) * v
    return ComplexField(g, eta)


def project_q(psi: ComplexField, v: ComplexField) -> ComplexField:
    """Remove the component of ``v`` along ``psi``: ``v - psi <psi, v> / |psi|^2``."""
    n = norm_sq(psi)
    if not n > 0:
        raise DegenerateStateError("projection onto the complement of the zero field")
    c = inner_product(psi, v) / n
    return ComplexField(psi.grid, v.values - c * psi.values)


def density(psi: ComplexField) -> np.ndarray:
    v = psi.values
    return v.real ** 2 + v.imag ** 2


def current(psi: ComplexField) -> np.ndarray:
    """Particle current ``Im(conj(psi) psi')``."""
    return np.imag(np.conj(psi.values) * gradient(psi).values)


def stationarity_residual(psi: ComplexField, p: ModelParams) -> float:
    """``||Q eta|| / ||psi||``, zero exactly at constrained extrema of F."""
    q_eta = project_q(psi, gp_operator(psi, p))
    return float(np.sqrt(norm_sq(q_eta) / norm_sq(psi)))


def observables(psi: ComplexField, p: ModelParams, t: float = 0.0,
                kind: DynamicsKind | str = DynamicsKind.METRIPLECTIC) -> ObservableRecord:
    """Scalar diagnostics of ``psi``.

    ``dissipation_rate`` is the exact instantaneous dF/dt of the chosen
    dynamics: ``-2 lam <eta, Q eta>`` for the norm-conserving flow,
    ``-2 lam ||eta||^2`` for Pitaevskii damping, zero when conservative.
    """
    kind = DynamicsKind.parse(kind)
    n = norm_sq(psi)
    if not n > 0:
        raise DegenerateStateError("observables of the zero field")
    eta = gp_operator(psi, p)
    overlap = inner_product(psi, eta)
    mu_mean = overlap.real / n
    # Subtract before squaring: ||eta||^2 and <psi,eta>^2/N nearly cancel.
    mu_var = norm_sq(eta - psi * mu_mean) / n
    if kind is DynamicsKind.METRIPLECTIC:
        rate = -2.0 * p.lam * norm_sq(eta - psi * (overlap / n))
    elif kind is DynamicsKind.PITAEVSKII:
        rate = -2.0 * p.lam * norm_sq(eta)
    else:
        rate = 0.0
    g = psi.grid
    a0 = np.sum(psi.values) * g.spacing / np.sqrt(g.length)
    return ObservableRecord(
        t=float(t),
        norm=n,
        free_energy=free_energy(psi, p),
        mu_mean=float(mu_mean),
        mu_var=float(mu_var),
        dissipation_rate=float(rate),
        ground_mode_occ=float(abs(a0) ** 2),
    )
