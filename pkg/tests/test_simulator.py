import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import mutualism.noise as noise
from mutualism.model import JumpMeasure, beta, constant_model, drift_bracket
from mutualism.noise import JumpEvent, NoisePath, _refine, generate_noise_path
from mutualism.simulator import (NumericOverflow, Scheme, log_drift, record_path, simulate,
                                 simulate_direct_euler, simulate_log_euler)
from oracles import random_jump_model


def hand_path(horizon, n_steps, events=()):
    """A noise path with zero Wiener increments and the given events."""
    base = np.linspace(0.0, horizon, n_steps + 1)
    times, steps = _refine(base, list(events))
    return NoisePath(horizon, base, times, np.zeros((len(times) - 1, 2)), tuple(events), steps)


def test_log_drift_without_noise_is_bracket():
    m = constant_model(a1=0.7, a2=1.3, c=0.4)
    assert log_drift(m, 0, 0.0, 2.0, 3.0) == drift_bracket(m, 0, 0.0, 2.0, 3.0)
    m = constant_model(a1=0.7, a2=1.3, c=0.4, sigma=0.4)
    assert log_drift(m, 1, 0.0, 2.0, 3.0) == pytest.approx(drift_bracket(m, 1, 0.0, 3.0, 2.0) - 0.08)


def test_log_drift_compensator_identity_example():
    m = constant_model(a1=0.5, pi1=JumpMeasure((0.0,), (1.0,)), gamma=(1.0,))
    br = drift_bracket(m, 0, 0.0, 1.5, 0.5)
    assert log_drift(m, 0, 0.0, 1.5, 0.5) == pytest.approx(br - 1.0)
    log_space = br - beta(m, 0, 0.0)  # drift of ln x with compensated jumps
    assert log_space == pytest.approx(br - (1 - math.log(2)))
    assert log_space - log_drift(m, 0, 0.0, 1.5, 0.5) == pytest.approx(math.log(2))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0, 10), st.floats(0.01, 10), st.floats(0.01, 10))
def test_log_drift_reconciles_with_compensated_form(seed, t, x1, x2):
    m = random_jump_model(np.random.default_rng(seed))
    for i, (xs, xo) in enumerate(((x1, x2), (x2, x1))):
        sp = m.species[i]
        eq3 = drift_bracket(m, i, t, xs, xo) - beta(m, i, t)
        logs = (sum(w * math.log1p(float(g(t))) for w, g in zip(m.pi1.weights, sp.gamma))
                + sum(w * math.log1p(float(d(t))) for w, d in zip(m.pi2.weights, sp.delta)))
        # raw events carry the jump logs that the compensated form keeps in its drift
        assert log_drift(m, i, t, x1, x2) == pytest.approx(eq3 - logs, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_logistic_limit(scheme):
    m = constant_model(a1=1.0, c=0.5, x0=(0.25, 3.0))
    traj = simulate(m, generate_noise_path(m, 40.0, 40_000, 0, 0), scheme)
    assert np.all(np.abs(traj.final - 2.0) < 1e-3)
    assert traj.breaches == 0


@pytest.mark.parametrize("scheme", list(Scheme))
def test_zero_coefficients_keep_initial_state(scheme):
    m = constant_model(a1=0.0, c=0.0, x0=(0.7, 3.0))
    traj = simulate(m, generate_noise_path(m, 5.0, 500, 1, 0), scheme)
    assert np.array_equal(traj.states, np.broadcast_to([0.7, 3.0], traj.states.shape))
    assert traj.breaches == 0


@pytest.mark.parametrize("scheme", list(Scheme))
def test_single_multiplicative_jump(scheme):
    m = constant_model(a1=0.0, c=0.0, pi2=JumpMeasure((0.0,), (1.0,)), delta=(0.5,))
    path = hand_path(2.0, 20, [JumpEvent(0.73, 2, 0, 0.0)])
    traj = simulate(m, path, scheme)
    j = int(path.event_steps[0])
    assert np.allclose(traj.states[:j], 1.0, rtol=0, atol=0)
    assert np.allclose(traj.states[j:], 1.5, rtol=1e-15)


def test_jump_shift_is_exact_in_log_space():
    d = 0.37
    m = constant_model(a1=0.0, c=0.0, x0=(0.3, 2.0), pi2=JumpMeasure((0.0,), (1.0,)), delta=(d,))
    path = hand_path(1.0, 10, [JumpEvent(0.25, 2, 0, 0.0), JumpEvent(0.61, 2, 0, 0.0)])
    v = simulate_log_euler(m, path).log_states
    for j in path.event_steps:
        assert np.array_equal(v[j], v[j - 1] + np.log1p(d))


def test_jump_at_time_zero_is_applied_first():
    m = constant_model(a1=0.0, c=0.0, pi1=JumpMeasure((0.0,), (1.0,)), gamma=(-0.5,))
    path = hand_path(1.0, 4, [JumpEvent(0.0, 1, 0, 0.0)])
    for scheme in Scheme:
        traj = simulate(m, path, scheme)
        # the compensator of the centred measure acts as drift +0.5 on ln x and on x
        assert traj.states[0, 0] == pytest.approx(0.5)


def test_schemes_agree_on_shared_noise():
    m = constant_model(a1=0.9, a2=1.2, c=0.5, sigma=0.3, pi1=JumpMeasure((0.0,), (1.0,)),
                       gamma=(-0.2,), pi2=JumpMeasure((1.0,), (0.5,)), delta=(0.3,))
    path = generate_noise_path(m, 1.0, 1000, 2, 0)
    a = simulate_log_euler(m, path).states
    b = simulate_direct_euler(m, path).states
    assert np.max(np.abs(a - b) / a) < 0.01


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_log_euler_states_positive(seed):
    m = random_jump_model(np.random.default_rng(seed))
    traj = simulate_log_euler(m, generate_noise_path(m, 20.0, 400, seed, 0))
    assert np.all(traj.states > 0) and np.all(np.isfinite(traj.states))
    assert np.array_equal(traj.times, generate_noise_path(m, 20.0, 400, seed, 0).times)


def test_overflow_is_reported():
    m = constant_model(a1=1.0, c=0.5, sigma=30.0)
    with pytest.raises(NumericOverflow) as info:
        simulate_log_euler(m, generate_noise_path(m, 10.0, 100, 0, 0), bound=5.0)
    assert 0.0 < info.value.time <= 10.0


def test_direct_euler_counts_breaches():
    m = constant_model(a1=1.0, c=0.5, sigma=3.0)
    traj = simulate_direct_euler(m, generate_noise_path(m, 10.0, 20, 0, 0), floor=1e-12)
    assert traj.breaches > 0
    assert np.all(traj.states > 0) and np.min(traj.states) <= 1e-11


def test_jump_free_output_ignores_event_streams(monkeypatch):
    m = constant_model(a1=0.8, c=0.5, sigma=0.5)
    ref = simulate(m, generate_noise_path(m, 5.0, 200, 3, 1))
    original = noise.stream

    def scrambled(seed, path_index, role):
        if role in (noise.StreamRole.EVENTS_1, noise.StreamRole.EVENTS_2):
            return np.random.default_rng(999)
        return original(seed, path_index, role)

    monkeypatch.setattr(noise, "stream", scrambled)
    other = simulate(m, generate_noise_path(m, 5.0, 200, 3, 1))
    assert np.array_equal(ref.states, other.states)


@pytest.mark.parametrize("scheme", list(Scheme))
def test_record_path_matches_full_trajectory(scheme):
    m = constant_model(a1=0.8, a2=1.1, c=0.5, sigma=0.3, pi2=JumpMeasure((0.0,), (0.8,)),
                       delta=(0.4,))
    path = generate_noise_path(m, 10.0, 1000, 5, 0)
    traj = simulate(m, path, scheme)
    cps = np.array([0, 17, len(path.times) // 2, len(path.times) - 1])
    rec = record_path(m, path, scheme, cps)
    assert np.array_equal(rec.checkpoint_states, traj.states[cps])
    # trapezoid with the pre-jump left limit at the right end of each step
    x = traj.states
    left_limit = x[1:].copy()
    factor = 1.0 + np.array([[0.4, 0.4]])
    for j in path.event_steps:
        left_limit[j - 1] = left_limit[j - 1] / factor[0]
    integral = np.sum(0.5 * (x[:-1] + left_limit) * np.diff(path.times)[:, None], axis=0)
    assert rec.integral == pytest.approx(integral, rel=1e-12)
    assert rec.checkpoint_integrals[0] == pytest.approx([0.0, 0.0])
