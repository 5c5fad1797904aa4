import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpe1d import (ComplexField, FitError, Grid1D, ModelParams, ResolutionError,
                   analytic_dispersion, bogoliubov_frequency, linearized_stability_report,
                   measure_dispersion, rhs, uniform_state)
from gpe1d.bogoliubov import DispersionConfig, fit_two_frequency, sound_wave_estimate
from gpe1d.states import SolitonSpec, soliton_background_density, two_soliton_state


def numerical_mode_matrix(k_index, G, lam, n=32):
    """2x2 matrix of i d/dt (a, b) for delta psi = a e^{ikx} + conj(b) e^{-ikx},
    from finite differences of the full right-hand side around the uniform state."""
    g = Grid1D(n)
    p = ModelParams(G, mu_offset=G, lam=lam)
    base = uniform_state(g)
    e = np.exp(1j * g.wavenumber(k_index) * g.x)
    h = 1e-7

    def coeffs(delta):
        plus = rhs(base + ComplexField(g, h * delta), p, "metriplectic").values
        minus = rhs(base - ComplexField(g, h * delta), p, "metriplectic").values
        d = (plus - minus) / (2 * h)
        da = np.vdot(e, d) / n
        dbbar = np.vdot(np.conj(e), d) / n
        return 1j * da, 1j * np.conj(dbbar)

    m = np.empty((2, 2), complex)
    m[0, 0], m[1, 0] = coeffs(e)            # a = 1, b = 0
    m[0, 1], m[1, 1] = coeffs(np.conj(e))   # a = 0, b = 1
    return m


def test_free_particle_limit():
    for k in (0.5, 2 * np.pi, 40.0):
        w = analytic_dispersion(k, ModelParams(0.0)).omega
        assert w == pytest.approx(0.5 * k * k, rel=1e-15)


def test_bogoliubov_branch_against_eigensolve():
    k = 2 * np.pi
    point = analytic_dispersion(k, ModelParams(1e4), n0=1.0)
    eig = np.linalg.eigvals(numerical_mode_matrix(1, 1e4, 0.0))
    w_num = eig[np.argmax(eig.real)]
    assert point.omega.real == pytest.approx(bogoliubov_frequency(k, 1e4), rel=1e-14)
    assert abs(point.omega.imag) < 1e-12
    assert point.omega == pytest.approx(w_num, rel=1e-8)


@pytest.mark.parametrize("m,lam", [(1, 0.01), (3, 0.01), (2, 0.3), (5, 1.0)])
def test_damped_branch_against_linearized_dynamics(m, lam):
    G = 500.0
    eig = np.linalg.eigvals(numerical_mode_matrix(m, G, lam))
    w_num = eig[np.argmax(eig.real)]
    w = analytic_dispersion(2 * np.pi * m, ModelParams(G, lam=lam)).omega
    assert w == pytest.approx(w_num, rel=1e-7)


def test_small_k_sound_and_damping():
    # phonon window lam c_s << k << 1/xi; c_s = sqrt(G n0) = 100, lam c_s = 1
    G = 1e4
    k = 2 * np.pi * 2
    w = analytic_dispersion(k, ModelParams(G, lam=0.01)).omega
    assert w.real == pytest.approx(math.sqrt(G) * k, rel=1e-2)
    assert w.imag < 0
    # damping carries the interaction energy: -lam (k^2/2 + G n0)
    assert w.imag == pytest.approx(-0.01 * (0.5 * k * k + G), rel=1e-12)
    # the long-wavelength estimate keeps only the kinetic part
    assert sound_wave_estimate(k, G, 0.01).imag == pytest.approx(-0.01 * 0.5 * k * k)


def test_longest_waves_are_overdamped():
    # below k ~ lam sqrt(G n0) the discriminant turns negative
    G, lam = 1e4, 0.01
    w = analytic_dispersion(0.2, ModelParams(G, lam=lam)).omega
    assert w.real == 0.0
    assert -2 * lam * (0.02 + G) < w.imag < 0


def test_zero_mode():
    point = analytic_dispersion(0.0, ModelParams(1e4, lam=0.1))
    assert point.omega == 0
    assert point.u_v_ratio == -1


@settings(max_examples=60, deadline=None)
@given(k=st.floats(1e-3, 500), G=st.floats(0, 1e5), lam=st.floats(0, 2))
def test_branch_is_decaying_and_symmetric(k, G, lam):
    p = ModelParams(G, lam=lam)
    w = analytic_dispersion(k, p).omega
    assert w.imag <= 1e-12 * max(abs(w), 1)
    assert w.real >= 0
    assert analytic_dispersion(-k, p).omega == w


def test_continuity_in_lambda():
    k, G = 4 * np.pi, 1e4
    w0 = analytic_dispersion(k, ModelParams(G)).omega
    for lam in (1e-4, 1e-6, 1e-8):
        assert abs(analytic_dispersion(k, ModelParams(G, lam=lam)).omega - w0) < 2 * lam * (G + k * k)


def test_amplitude_ratio_is_an_eigenvector():
    k, G, lam = 2 * np.pi, 1e4, 0.05
    pt = analytic_dispersion(k, ModelParams(G, lam=lam))
    m = numerical_mode_matrix(1, G, lam)
    vec = np.array([1.0, pt.u_v_ratio])
    np.testing.assert_allclose(m @ vec, pt.omega * vec, rtol=1e-6)


# ------------------------------------------------------------ measured frequencies

SMALL = DispersionConfig(n_points=256)


def test_measured_conservative_frequency():
    pt = measure_dispersion(1, ModelParams(1e4), SMALL)
    ref = analytic_dispersion(pt.k, ModelParams(1e4))
    assert pt.omega.real == pytest.approx(ref.omega.real, rel=1e-3)
    assert abs(pt.omega.imag) < 1e-3 * pt.omega.real


@pytest.mark.parametrize("m", [1, 3])
def test_measured_damped_frequency(m):
    p = ModelParams(1e4, lam=0.01)
    pt = measure_dispersion(m, p, SMALL)
    ref = analytic_dispersion(pt.k, p)
    assert abs(pt.omega - ref.omega) < 5e-3 * abs(ref.omega)


def test_measured_frequency_is_linear_in_amplitude():
    p = ModelParams(1e4, lam=0.01)
    a = measure_dispersion(2, p, SMALL).omega
    b = measure_dispersion(2, p, DispersionConfig(n_points=256, amplitude=5e-5)).omega
    assert abs(a - b) < 5e-4 * abs(a)


def test_fit_recovers_a_synthetic_signal():
    t = np.linspace(0, 0.01, 300)
    w = 600 - 80j
    series = np.array([2e-5 * np.exp(-1j * w * t) + 1e-5 * np.exp(1j * np.conj(w) * t),
                       (1 - 1j) * 1e-5 * np.exp(-1j * w * t)])
    fit = fit_two_frequency(t, series)
    assert fit.omega == pytest.approx(w, rel=1e-9)
    assert fit.residual < 1e-9


def test_fit_failure_is_reported():
    cfg = DispersionConfig(n_points=256, amplitude=0.2, fit_tolerance=1e-6)
    with pytest.raises(FitError) as info:
        measure_dispersion(1, ModelParams(1e4), cfg)
    assert info.value.residual > 0
    with pytest.raises(ValueError):
        measure_dispersion(0, ModelParams(1e4), SMALL)


# ------------------------------------------------------------ linear stability

def test_uniform_state_spectrum_without_damping():
    g = Grid1D(128)
    G = 1e4
    rep = linearized_stability_report(uniform_state(g), ModelParams(G, mu_offset=G))
    ev = rep.eigenvalues
    assert np.max(np.abs(ev.real)) < 1e-8 * np.max(np.abs(ev))
    assert rep.n_zero_modes == 1
    # each 0 < |m| < 64 gives +-omega_B twice (modes +m and -m); Nyquist once
    freqs = np.sort(np.abs(ev.imag))[1:]
    expected = []
    for m in range(1, 64):
        expected += [bogoliubov_frequency(2 * np.pi * m, G)] * 4
    expected += [bogoliubov_frequency(np.pi * 128, G)] * 2
    np.testing.assert_allclose(freqs, np.sort(expected), rtol=1e-8)


def test_uniform_state_decays_under_damping():
    g = Grid1D(128)
    rep = linearized_stability_report(uniform_state(g), ModelParams(1e4, mu_offset=1e4, lam=0.01))
    assert rep.all_decay
    assert rep.max_growth_rate <= 1e-8
    assert rep.n_zero_modes == 1


def test_black_soliton_pair_has_unstable_modes():
    # A dark soliton is a saddle of F on the fixed-norm sphere (its boost
    # direction lowers F), so damping makes it linearly unstable.
    g = Grid1D(256)
    G = 2000.0
    specs = [SolitonSpec(0.3), SolitonSpec(0.7)]
    p = ModelParams(G, lam=0.01)
    psi = two_soliton_state(g, p, *specs)
    n0 = soliton_background_density(g, p, specs)
    rep = linearized_stability_report(psi, p.replace(mu_offset=G * n0))
    growth = np.sort(rep.eigenvalues.real)[::-1]
    assert not rep.all_decay
    assert np.sum(growth > 1.0) == 2
    assert growth[2] < 1e-6
    # without damping the same state is neutrally stable
    rep0 = linearized_stability_report(psi, p.replace(mu_offset=G * n0, lam=0.0))
    assert rep0.max_growth_rate < 1e-6 * np.max(np.abs(rep0.eigenvalues))


def test_stability_report_preconditions():
    g = Grid1D(64)
    p = ModelParams(100.0)
    noisy = ComplexField(g, 1 + 0.1 * np.cos(2 * np.pi * g.x))
    with pytest.raises(ValueError):
        linearized_stability_report(noisy, p)
    with pytest.raises(ResolutionError):
        linearized_stability_report(uniform_state(Grid1D(1024)), p)
