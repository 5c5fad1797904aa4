"""Fused pointwise loops for the time-stepping hot path."""
import numba
import numpy as np

CONSERVATIVE, PITAEVSKII, METRIPLECTIC = 0, 1, 2


@numba.njit(cache=True)
def gp_eta(kin, psi, w, coupling, eta):
    """eta = kin + (w + G|psi|^2) psi; returns (sum conj(psi) eta, sum |psi|^2)."""
    overlap = 0.0 + 0.0j
    nsum = 0.0
    for j in range(psi.size):
        p = psi[j]
        rho = p.real * p.real + p.imag * p.imag
        e = kin[j] + (w[j] + coupling * rho) * p
        eta[j] = e
        overlap += p.conjugate() * e
        nsum += rho
    return overlap, nsum


@numba.njit(cache=True)
def combine(psi, eta, c, lam, kind, out):
    if kind == CONSERVATIVE or lam == 0.0:
        for j in range(psi.size):
            e = eta[j]
            out[j] = complex(e.imag, -e.real)
    elif kind == PITAEVSKII:
        for j in range(psi.size):
            e = eta[j]
            out[j] = complex(e.imag - lam * e.real, -e.real - lam * e.imag)
    else:
        for j in range(psi.size):
            e = eta[j]
            q = e - c * psi[j]
            out[j] = complex(e.imag - lam * q.real, -e.real - lam * q.imag)


@numba.njit(cache=True)
def axpy(y, a, x, out):
    for j in range(y.size):
        out[j] = y[j] + a * x[j]


@numba.njit(cache=True)
def rk4_finish(psi, h, k1, k2, k3, k4, out):
    h6 = h / 6.0
    for j in range(psi.size):
        out[j] = psi[j] + h6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])


def warmup():
    n = 4
    z = np.zeros(n, dtype=np.complex128)
    w = np.zeros(n)
    gp_eta(z, z, w, 0.0, z.copy())
    for kind in (CONSERVATIVE, PITAEVSKII, METRIPLECTIC):
        combine(z, z, 0j, 0.1, kind, z.copy())
    axpy(z, 0.5, z, z.copy())
    rk4_finish(z, 0.1, z, z, z, z, z.copy())
