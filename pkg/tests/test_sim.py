import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import mfcair.sim as sim
from mfcair.mfc import ControllerConfig
from mfcair.plant import NoiseConfig, PlantDomainError, PlantState, plant_dynamics
from mfcair.scenario import CurrentProfile, ReferenceSpec
from mfcair.sim import (
    TRACE_COLUMNS,
    RunAborted,
    SimConfig,
    Trace,
    compute_metrics,
    integrate,
    restoration_times,
    rk4_step,
    run_closed_loop,
    run_surrogate_loop,
)

CTRL = ControllerConfig(alpha=0.06, kp=1.5, tau=0.3, ts=0.01, u_min=0.0, u_max=400.0, u_warmup=None)


def synthetic_trace(t, xi, lam, lam_ref):
    cols = {name: np.zeros(len(t)) for name in TRACE_COLUMNS}
    cols.update(t=np.asarray(t, float), xi=np.asarray(xi, float), lambda_ref=np.asarray(lam_ref, float))
    cols["lambda"] = np.asarray(lam, float)
    cols["e"] = cols["lambda"] - cols["lambda_ref"]
    return Trace(cols)


def test_rk4_zero_rhs():
    assert rk4_step(lambda x: 0.0, 3.25, 0.1) == 3.25
    assert rk4_step(lambda x: (0.0, 0.0), (1.0, 2.0), 0.1) == (1.0, 2.0)


def test_rk4_constant_rate_is_exact():
    y = integrate(lambda y: 1.0, 2.0, 0.125, 8)
    assert y == 3.0


def test_rk4_fourth_order_on_decay():
    errs = [abs(integrate(lambda y: -y, 1.0, 1.0 / n, n) - math.exp(-1)) for n in (10, 20, 40)]
    assert 15.0 < errs[0] / errs[1] < 17.0
    assert 15.0 < errs[1] / errs[2] < 17.0


def test_rk4_vector_forms_agree():
    f = lambda x: (x[1], -x[0])
    a = integrate(f, (1.0, 0.0), 0.01, 100)
    b = integrate(lambda x: np.array([x[1], -x[0]]), np.array([1.0, 0.0]), 0.01, 100)
    assert np.allclose(a, b, rtol=0, atol=1e-15)
    assert a[0] == pytest.approx(math.cos(1.0), abs=1e-10)


def test_rk4_keeps_named_tuples():
    x = PlantState(1.0, 2.0, 3.0, 4.0)
    out = rk4_step(lambda s: (0.0, 0.0, 0.0, 0.0), x, 0.1)
    assert isinstance(out, PlantState)


def test_domain_error_halves_step_in_lenient_mode():
    calls = []

    def f(y):
        calls.append(y)
        if len(calls) == 1:
            raise PlantDomainError("transient", None)
        return 1.0

    assert integrate(f, 0.0, 0.1, 1, h_floor=0.01) == pytest.approx(0.1, abs=1e-15)
    assert len(calls) == 1 + 8


def test_domain_error_propagates_in_strict_mode():
    def f(y):
        raise PlantDomainError("always", None)

    with pytest.raises(PlantDomainError):
        integrate(f, 0.0, 0.1, 1)
    with pytest.raises(PlantDomainError):
        integrate(f, 0.0, 0.1, 1, h_floor=0.01)


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(h=0.003, ts=0.01)
    with pytest.raises(ValueError):
        SimConfig(h=0.0)
    with pytest.raises(ValueError):
        SimConfig(band=0.0)
    assert SimConfig().substeps == 10


def test_no_flow_equilibrium_energy_free(constants):
    x1 = 0.21 * (constants.c11 - constants.c2)
    x0 = PlantState(x1, constants.c11 - constants.c2 - x1, 0.0, constants.c11)
    x = integrate(plant_dynamics, x0, 1e-3, 10_000, 0.0, 0.0, constants)
    for a, b in zip(x, x0):
        assert abs(a - b) <= 1e-12 * max(abs(b), 1.0)


def test_equilibrium_hold_keeps_error_small(constants):
    profile = CurrentProfile([(0, 200.0)], 5.0)
    trace, metrics = run_closed_loop(constants, profile, ReferenceSpec(), CTRL, SimConfig())
    # the only offset is the trapezoid bias on the held input, balanced by kp * e
    bias = CTRL.alpha * trace["u_applied"][0] * (CTRL.ts / CTRL.tau) ** 2 / CTRL.kp
    assert metrics.max_abs_error <= 1.1 * bias
    assert abs(trace["e"][-1]) == pytest.approx(bias, rel=0.05)
    assert metrics.restoration == []
    assert np.all(np.isfinite(np.column_stack([trace[c] for c in TRACE_COLUMNS])))


def test_trace_is_uniform_and_complete(constants):
    profile = CurrentProfile([(0, 200.0), (1.0, 230.0)], 3.0)
    trace, _ = run_closed_loop(constants, profile, ReferenceSpec("polynomial"), CTRL,
                               SimConfig(noise=NoiseConfig(20.0, 20.0, 5)))
    t = np.asarray(trace["t"])
    assert len(trace) == 301
    assert np.allclose(np.diff(t), 0.01, rtol=0, atol=1e-12)
    assert set(TRACE_COLUMNS) == set(trace.columns)


def test_zero_order_hold_of_the_current(constants, monkeypatch):
    seen = []

    def spy(x, u, xi, c, *rest):
        seen.append(u)
        return plant_dynamics(x, u, xi, c, *rest)

    profile = CurrentProfile([(0, 200.0), (0.5, 240.0)], 1.0)
    ctrl = ControllerConfig(alpha=0.06, kp=1.5, tau=0.1, ts=0.01, u_min=0.0, u_max=400.0, u_warmup=None)
    monkeypatch.setattr(sim, "plant_dynamics", spy)
    trace, _ = run_closed_loop(constants, profile, ReferenceSpec(), ctrl,
                               SimConfig(noise=NoiseConfig(20.0, 20.0, 1)))
    per_tick = 4 * SimConfig().substeps
    n = len(trace) - 1
    loop_calls = seen[-n * per_tick:]
    for k in range(n):
        block = set(loop_calls[k * per_tick:(k + 1) * per_tick])
        assert block == {trace["u_applied"][k]}


def test_runs_are_bit_identical(constants):
    profile = CurrentProfile([(0, 200.0), (1.0, 240.0)], 2.0)
    cfg = SimConfig(noise=NoiseConfig(20.0, 20.0, 3))
    a, _ = run_closed_loop(constants, profile, ReferenceSpec(), CTRL, cfg)
    b, _ = run_closed_loop(constants, profile, ReferenceSpec(), CTRL, cfg)
    for name in TRACE_COLUMNS:
        assert np.array_equal(a[name], b[name]), name
    c, _ = run_closed_loop(constants, profile, ReferenceSpec(), CTRL,
                           SimConfig(noise=NoiseConfig(20.0, 20.0, 4)))
    assert not np.array_equal(a["y1"], c["y1"])


def test_abort_carries_partial_trace(constants, monkeypatch):
    def failing(x, u, xi, c, *rest):
        if xi == 250.0:
            raise PlantDomainError("injected", x)
        return plant_dynamics(x, u, xi, c, *rest)

    monkeypatch.setattr(sim, "plant_dynamics", failing)
    profile = CurrentProfile([(0, 200.0), (1.0, 250.0)], 2.0)
    with pytest.raises(RunAborted) as info:
        run_closed_loop(constants, profile, ReferenceSpec(), CTRL, SimConfig())
    assert info.value.t == pytest.approx(1.0)
    assert len(info.value.trace) == 101
    assert info.value.trace["xi"][-1] == 250.0


def test_controller_and_simulator_periods_must_agree(constants):
    with pytest.raises(ValueError):
        run_closed_loop(constants, CurrentProfile([(0, 200.0)], 2.0), ReferenceSpec(), CTRL,
                        SimConfig(h=0.001, ts=0.02))


def test_restoration_of_exponential_decay():
    t = np.round(np.arange(-100, 1001) * 0.01, 10)
    xi = np.where(t < 0, 100.0, 200.0)
    lam = np.where(t < 0, 2.2, 2.2 + 0.5 * np.exp(-np.maximum(t, 0)))
    (t0, d), = restoration_times(synthetic_trace(t, xi, lam, np.full(t.size, 2.2)), 0.02)
    assert t0 == 0.0
    assert abs(d - math.log(0.5 / (0.02 * 2.2))) <= 0.01


def test_restoration_zero_when_already_settled():
    t = np.arange(0, 200) * 0.01
    xi = np.where(t < 1.0, 100.0, 150.0)
    [(t0, d)] = restoration_times(synthetic_trace(t, xi, np.full(t.size, 2.2), np.full(t.size, 2.2)))
    assert (t0, d) == (pytest.approx(1.0), 0.0)


def test_restoration_unsettled():
    t = np.arange(0, 200) * 0.01
    xi = np.where(t < 1.0, 100.0, 150.0)
    m = compute_metrics(synthetic_trace(t, xi, np.full(t.size, 3.0), np.full(t.size, 2.2)))
    assert m.restoration[0][1] is None
    assert not m.all_settled and m.max_restoration is None


def test_metrics_values():
    t = np.arange(0, 5) * 1.0
    lam = np.array([2.2, 2.3, 2.2, 0.9, 2.2])
    m = compute_metrics(synthetic_trace(t, np.full(5, 100.0), lam, np.full(5, 2.2)))
    assert m.max_abs_error == pytest.approx(1.3)
    assert m.integral_abs_error == pytest.approx(0.05 + 0.05 + 0.65 + 0.65)
    assert m.lambda_min == 0.9 and m.starvation


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), b1=st.floats(0.001, 0.2), b2=st.floats(0.001, 0.2))
def test_wider_band_never_lengthens_restoration(seed, b1, b2):
    lo, hi = sorted((b1, b2))
    rng = np.random.default_rng(seed)
    n = 400
    t = np.arange(n) * 0.01
    xi = np.repeat(rng.uniform(50, 300, size=4), n // 4)
    lam = 2.2 + rng.normal(scale=0.1, size=n) * np.exp(-np.tile(np.arange(n // 4), 4) * 0.05)
    trace = synthetic_trace(t, xi, lam, np.full(n, 2.2))
    inf = float("inf")
    for (_, d_lo), (_, d_hi) in zip(restoration_times(trace, lo), restoration_times(trace, hi)):
        assert (inf if d_hi is None else d_hi) <= (inf if d_lo is None else d_lo)


def test_surrogate_sine_tracking():
    ctrl = ControllerConfig(alpha=1.0, kp=5.0, tau=0.1, ts=0.002)
    r = run_surrogate_loop(math.sin, 1.0, ctrl, 6.0, 0.0005)
    ready = r["ready"]
    assert np.max(np.abs(r["f"][ready] - r["f_est"][ready])) < 0.1
    # |e| settles near max|F - F_est| / kp
    late = r["t"] > 2.0
    assert np.max(np.abs(r["e"][late])) < 0.1 / 5.0
