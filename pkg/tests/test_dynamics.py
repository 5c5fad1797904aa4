import math

import numpy as np
import pytest

from gpe1d import (ComplexField, ConvergenceError, DegenerateStateError, DivergenceError,
                   DynamicsKind, EvolutionConfig, Grid1D, LambdaSchedule, MemorySink,
                   ModelParams, OutputError, StabilityError, auto_dt, evolve,
                   gp_operator, ground_state_ite, inner_product, ite_direction, norm_sq,
                   plane_wave, project_q, rhs, stability_bound, step_rk4, uniform_state)
from gpe1d.dynamics import Propagator

from conftest import smooth_field

KINDS = list(DynamicsKind)


def resolved(seed, n=128):
    """A state whose spectrum (and its nonlinear harmonics at G ~ 100) stays
    far below k_max, where RK4 at the default step is accurate to round-off."""
    return smooth_field(Grid1D(n), seed, modes=3)


def run(psi, p, kind, steps, dt=None, stride=100, lam=None, **kw):
    dt = auto_dt(psi.grid) if dt is None else dt
    lam = p.lam if lam is None else lam
    sink = MemorySink()
    out = evolve(psi, p, kind, LambdaSchedule.constant(steps * dt, lam),
                 EvolutionConfig(dt, snapshot_stride=10**9, observable_stride=stride, **kw), [sink])
    return out, sink


# ------------------------------------------------------------ step and stability

def test_auto_dt_and_bound():
    g = Grid1D(1024)
    assert stability_bound(g) == pytest.approx(2.8 / (0.5 * (math.pi * 1024) ** 2))
    assert auto_dt(g) == pytest.approx(0.4 * stability_bound(g))


def test_dt_guard():
    g = Grid1D(64)
    psi, p = uniform_state(g), ModelParams(1.0)
    sched = LambdaSchedule.constant(1e-3, 0.0)
    with pytest.raises(StabilityError):
        evolve(psi, p, "conservative", sched, EvolutionConfig(1.01 * stability_bound(g)))
    with pytest.warns(RuntimeWarning):
        evolve(psi, p, "conservative", LambdaSchedule.constant(stability_bound(g), 0.0),
               EvolutionConfig(0.6 * stability_bound(g)))


def test_schedule_and_config_validation():
    for bad in [(), ((0.0, 0.1),), ((1.0, -0.1),), ((np.inf, 0.0),)]:
        with pytest.raises(ValueError):
            LambdaSchedule(bad)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.0)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=1e-3, observable_stride=0)
    assert LambdaSchedule(((0.1, 0), (0.2, 0.01))).total_duration == pytest.approx(0.3)


@pytest.mark.parametrize("kind", KINDS)
def test_stationary_state_is_a_fixed_point(kind):
    g = Grid1D(64)
    p = ModelParams(100.0, mu_offset=100.0, lam=0.1)
    psi = uniform_state(g)
    out = step_rk4(psi, p, kind, auto_dt(g))
    assert np.max(np.abs(out.values - psi.values)) < 1e-14


def test_free_particle_phase():
    g = Grid1D(64)
    psi = plane_wave(g, 1)
    dt, t = 1e-5, 1e-2
    out, _ = run(psi, ModelParams(0.0), "conservative", round(t / dt), dt=dt)
    exact = psi.values * np.exp(-0.5j * (2 * np.pi) ** 2 * t)
    assert np.max(np.abs(out.values - exact)) < 1e-10


@pytest.mark.filterwarnings("ignore:dt=")
def test_fourth_order_convergence():
    # G = 100 uniform state with a perturbation; errors against a
    # Richardson-extrapolated reference
    g = Grid1D(32)
    p = ModelParams(100.0, mu_offset=100.0)
    psi = ComplexField(g, (1 + 0.1 * np.cos(2 * np.pi * g.x) + 0.05j * np.sin(4 * np.pi * g.x)))
    T = 2e-2

    def final(dt):
        return run(psi, p, "conservative", round(T / dt), dt=dt)[0].values

    dts = [T / 50, T / 100, T / 200]
    sols = [final(dt) for dt in dts]
    ref = sols[2] + (sols[2] - sols[1]) / 15
    e1 = np.linalg.norm(sols[0] - ref)
    e2 = np.linalg.norm(sols[1] - ref)
    assert 13 < e1 / e2 < 19


def test_rhs_forms():
    g = Grid1D(32)
    psi = smooth_field(g, 2)
    p = ModelParams(20.0, mu_offset=1.0, lam=0.3)
    eta = gp_operator(psi, p).values
    qeta = project_q(psi, gp_operator(psi, p)).values
    np.testing.assert_allclose(rhs(psi, p, "conservative").values, -1j * eta, atol=1e-12)
    np.testing.assert_allclose(rhs(psi, p, "pitaevskii").values, -1j * eta - 0.3 * eta, atol=1e-12)
    np.testing.assert_allclose(rhs(psi, p, "metriplectic").values, -1j * eta - 0.3 * qeta, atol=1e-12)


def test_metriplectic_at_zero_lambda_is_bitwise_conservative():
    g = Grid1D(64)
    psi = smooth_field(g, 5)
    p = ModelParams(200.0, mu_offset=3.0, lam=0.0)
    a, _ = run(psi, p, "metriplectic", 500)
    b, _ = run(psi, p, "conservative", 500)
    assert np.array_equal(a.values, b.values)


def test_divergence_is_reported_with_its_step():
    g = Grid1D(16)
    psi = smooth_field(g, 1, modes=4, offset=0.3) * 30.0
    with pytest.raises(DivergenceError) as info:
        run(psi, ModelParams(1e12), "conservative", 200)
    assert info.value.step is not None and info.value.step >= 1
    assert "step" in str(info.value)


def test_zero_field_is_rejected():
    g = Grid1D(8)
    with pytest.raises(DegenerateStateError):
        run(ComplexField(g, np.zeros(8)), ModelParams(1.0, lam=0.1), "metriplectic", 10)


# ------------------------------------------------------------ invariants

@pytest.mark.parametrize("lam", [0.0, 0.01, 0.1, 1.0])
def test_metriplectic_conserves_norm(lam):
    psi = resolved(7)
    _, sink = run(psi, ModelParams(100.0, lam=lam), "metriplectic", 10_000)
    n = sink.column("norm")
    assert np.max(np.abs(n - n[0])) / n[0] < 1e-9


@pytest.mark.parametrize("lam", [0.01, 0.1, 1.0])
def test_metriplectic_free_energy_monotone_and_rate(lam):
    psi = resolved(8)
    p = ModelParams(100.0, lam=lam)
    dt = auto_dt(psi.grid)
    _, sink = run(psi, p, "metriplectic", 4000, stride=1)
    f = sink.column("free_energy")
    assert np.all(np.diff(f) <= 1e-10 * np.abs(f[:-1]))
    rate = sink.column("dissipation_rate")
    fd = (f[2:] - f[:-2]) / (2 * dt)
    mask = np.abs(rate[1:-1]) > 1e-6
    assert mask.sum() > 100
    np.testing.assert_allclose(fd[mask], rate[1:-1][mask], rtol=1e-4)


def test_conservative_conserves_norm_and_energy():
    psi = resolved(9)
    _, sink = run(psi, ModelParams(100.0, mu_offset=2.0), "conservative", 10_000)
    for col in ("norm", "free_energy"):
        v = sink.column(col)
        assert np.max(np.abs(v - v[0])) / abs(v[0]) < 1e-10


def test_conservative_short_run_energy():
    psi = resolved(10)
    _, sink = run(psi, ModelParams(100.0), "conservative", 10, stride=1)
    f = sink.column("free_energy")
    assert abs(f[-1] - f[0]) / abs(f[0]) < 1e-10


def test_pitaevskii_loses_particles_at_the_predicted_rate():
    g = Grid1D(64)
    psi0 = uniform_state(g) + smooth_field(g, 11, offset=0.0) * 0.05
    psi0 = psi0 * (1 / math.sqrt(norm_sq(psi0)))
    p = ModelParams(100.0, lam=0.01)
    dt = auto_dt(g)
    _, sink = run(psi0, p, "pitaevskii", 3000, stride=1)
    n = sink.column("norm")
    assert np.all(np.diff(n) < 0)
    # dN/dt = -2 lam Re<psi, eta>; N(t) mu_mean(t) = Re<psi, eta>
    predicted = -2 * p.lam * n * sink.column("mu_mean")
    measured = (n[2:] - n[:-2]) / (2 * dt)
    np.testing.assert_allclose(measured, predicted[1:-1], rtol=1e-6)


@pytest.mark.parametrize("kind", KINDS)
def test_global_phase_equivariance(kind):
    g = Grid1D(64)
    psi = smooth_field(g, 12)
    p = ModelParams(200.0, mu_offset=1.0, lam=0.05)
    phase = np.exp(0.7j)
    a, _ = run(psi, p, kind, 300)
    b, _ = run(psi * phase, p, kind, 300)
    assert np.max(np.abs(b.values - phase * a.values)) < 1e-12


def test_evolution_is_deterministic():
    g = Grid1D(64)
    psi = smooth_field(g, 13)
    p = ModelParams(200.0, lam=0.05)
    a, sa = run(psi, p, "metriplectic", 500, stride=7)
    b, sb = run(psi, p, "metriplectic", 500, stride=7)
    assert np.array_equal(a.values, b.values)
    assert [r.as_tuple() for r in sa.records] == [r.as_tuple() for r in sb.records]


def test_renormalize_flag():
    g = Grid1D(64)
    psi = smooth_field(g, 14)
    _, sink = run(psi, ModelParams(100.0, lam=0.5), "pitaevskii", 500, renormalize=True)
    np.testing.assert_allclose(sink.column("norm"), 1.0, rtol=1e-13)


# ------------------------------------------------------------ recording

@pytest.mark.parametrize("steps,stride", [(100, 10), (105, 10), (7, 100)])
def test_record_cadence(steps, stride):
    g = Grid1D(16)
    _, sink = run(uniform_state(g), ModelParams(1.0), "conservative", steps, stride=stride)
    expected = 1 + steps // stride + (0 if steps % stride == 0 else 1)
    assert len(sink.records) == expected
    assert sink.records[-1].t == pytest.approx(steps * auto_dt(g))


def test_stages_override_lambda():
    g = Grid1D(32)
    psi = smooth_field(g, 15)
    dt = auto_dt(g)
    sink = MemorySink()
    sched = LambdaSchedule(((50 * dt, 0.0), (50 * dt, 0.2), (50 * dt, 0.0)))
    evolve(psi, ModelParams(100.0, lam=7.0), "metriplectic", sched,
           EvolutionConfig(dt, snapshot_stride=10, observable_stride=10), [sink])
    lams = [lam for _, lam, _ in sink.snapshots]
    assert lams[0] == 0.0 and 0.2 in lams and lams[-1] == 0.0
    rates = sink.column("dissipation_rate")
    t = sink.column("t")
    assert np.all(rates[t < 50 * dt - 1e-15] == 0.0)
    assert np.all(rates[(t > 50 * dt + 1e-15) & (t < 100 * dt - 1e-15)] < 0)
    f = sink.column("free_energy")
    assert f[-1] < f[0]


def test_sink_failure_becomes_output_error():
    class Broken:
        def observe(self, record):
            raise OSError("disk full")

    g = Grid1D(16)
    with pytest.raises(OutputError, match="partial"):
        evolve(uniform_state(g), ModelParams(1.0), "conservative",
               LambdaSchedule.constant(10 * auto_dt(g), 0.0), EvolutionConfig(auto_dt(g)), [Broken()])


# ------------------------------------------------------------ imaginary time

def test_ite_free_particle_from_noise():
    g = Grid1D(32)
    rng = np.random.default_rng(0)
    noise = ComplexField(g, 1 + 0.5 * (rng.normal(size=32) + 1j * rng.normal(size=32)))
    psi, mu = ground_state_ite(noise, ModelParams(0.0), tol=1e-9)
    assert abs(mu) < 1e-9
    dens = np.abs(psi.values) ** 2
    np.testing.assert_allclose(dens, 1.0, atol=1e-8)


def test_ite_interacting_uniform():
    g = Grid1D(64)
    psi, mu = ground_state_ite(smooth_field(g, 3), ModelParams(100.0), tol=1e-10)
    assert mu == pytest.approx(100.0, abs=1e-6)
    np.testing.assert_allclose(np.abs(psi.values) ** 2, 1.0, atol=1e-8)


def test_ite_direction_is_the_dissipative_flow_direction():
    g = Grid1D(64)
    # a large lambda keeps the subtraction below from cancelling digits
    p = ModelParams(100.0, potential=0.1 * np.cos(2 * np.pi * g.x), lam=1e8)
    cosines = []

    def check(it, psi, direction, residual):
        if it % 50 == 1:
            diss = (rhs(psi, p, "metriplectic").values - rhs(psi, p, "conservative").values) / p.lam
            c = np.vdot(diss, direction.values).real / (np.linalg.norm(diss) * np.linalg.norm(direction.values))
            cosines.append(c)

    ground_state_ite(smooth_field(g, 4), p, tol=1e-6, callback=check)
    assert cosines and min(cosines) > 1 - 1e-12


def test_ite_reports_non_convergence():
    g = Grid1D(32)
    with pytest.raises(ConvergenceError) as info:
        ground_state_ite(smooth_field(g, 5), ModelParams(100.0), max_iters=3)
    assert info.value.residual > 0
    with pytest.raises(DegenerateStateError):
        ground_state_ite(ComplexField(g, np.zeros(32)), ModelParams(1.0))


def test_ite_direction_is_tangent():
    g = Grid1D(32)
    psi = smooth_field(g, 6)
    d = ite_direction(psi, ModelParams(10.0))
    assert abs(inner_product(psi, d)) < 1e-12
