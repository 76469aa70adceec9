import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mutualism.analysis import (THETA_GRID, NotPermanent, Regime, UnboundedBound,
                                classify_regime, find_theta, golden_section_max, k0,
                                moment_bound, permanence_bounds, permanence_constants,
                                permanence_margin)
from mutualism.functions import Constant, Periodic
from mutualism.model import (JumpMeasure, MutualismModel, SpeciesCoefficients, constant_model,
                             model_from_raw, model_to_raw)
from oracles import (k0_oracle, k0_precise, moment_closed_form, moment_oracle, random_jump_model,
                     window, zoom_max_1d)

MARGIN_MODEL = constant_model(a1=0.6, c=0.5, sigma=0.4)
EXTINCT_MODEL = constant_model(a1=0.1, c=0.5, sigma=1.0)
JUMP_MODEL = constant_model(a1=0.5, c=0.5, pi1=JumpMeasure((0.0,), (1.0,)), gamma=(1.0,))


def test_golden_section_max_vectorized():
    x, v = golden_section_max(lambda x: -(x - np.array([0.3, 2.0])) ** 2, [0.0, 0.0], [1.0, 5.0])
    assert np.allclose(x, [0.3, 2.0], atol=1e-9)
    assert np.allclose(v, 0.0, atol=1e-15)


def test_permanence_margin_examples():
    assert permanence_margin(MARGIN_MODEL) == pytest.approx(0.52)
    assert permanence_margin(EXTINCT_MODEL) == pytest.approx(-0.4)
    m = constant_model(a1=0.1, pi2=JumpMeasure((0.0,), (2.0,)), delta=(0.5,))
    assert permanence_margin(m) == pytest.approx(0.1 + 2 * math.log(1.5))


def test_find_theta_no_jumps_closed_form():
    theta, value = find_theta(MARGIN_MODEL)
    assert theta == 0.5
    assert value == pytest.approx(0.52 - 0.08 * 0.5, abs=1e-15)


def test_find_theta_absent_when_margin_negative():
    assert find_theta(EXTINCT_MODEL) is None
    # every grid value is nonpositive, checked independently
    assert all(k0_precise(EXTINCT_MODEL, 0, th, 0.0) <= 0 for th in THETA_GRID)


def test_k0_jump_example():
    expected = 0.5 - 1.0 - 2.0 * (2.0 ** -0.5 - 1.0)
    assert expected == pytest.approx(0.0858, abs=1e-4)
    assert k0(JUMP_MODEL, 0.5) == pytest.approx(expected, rel=1e-13)
    assert find_theta(JUMP_MODEL)[0] == 0.5


def test_k0_small_theta_is_accurate():
    # near theta = 0 the jump terms cancel to about 1e-9; plain powers lose them
    for theta in (2.0 ** -20, 2.0 ** -30):
        assert k0(JUMP_MODEL, theta) == pytest.approx(k0_precise(JUMP_MODEL, 0, theta, 0.0),
                                                      abs=1e-13)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_positive_margin_implies_theta(seed):
    m = random_jump_model(np.random.default_rng(seed), permanent=True)
    if permanence_margin(m) <= 0.01:
        return
    theta, value = find_theta(m)
    assert value > 0
    # reproduced by an independent evaluation at the minimizing time
    assert value == pytest.approx(k0_oracle(m, theta), rel=1e-6)


def test_k0_constant_model_matches_scalar_reevaluation():
    m = constant_model(a1=1.2, a2=0.9, c=0.5, sigma=0.3, pi1=JumpMeasure((0.0,), (0.6,)),
                       gamma=(-0.3,), pi2=JumpMeasure((1.0,), (0.4,)), delta=(0.2,))
    theta, value = find_theta(m)
    assert value == pytest.approx(k0_precise(m, 0, theta, 0.0), abs=1e-12)


# -- moment bound ----------------------------------------------------------------

def test_moment_bound_examples():
    assert moment_bound(constant_model(a1=0.0, c=0.5), 0, 1.0) == pytest.approx(0.5, rel=1e-12)
    assert moment_bound(constant_model(a1=1.0, c=0.5), 0, 1.0) == pytest.approx(2.0, rel=1e-12)


def test_moment_bound_mixed_jump_model_p2():
    m = random_jump_model(np.random.default_rng(4))
    assert len(m.pi1) and len(m.pi2)
    for i in (0, 1):
        assert moment_bound(m, i, 2.0) == pytest.approx(moment_oracle(m, i, 2.0), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.01, 3), c=st.floats(0.05, 3), sigma=st.floats(0, 1.5), p=st.floats(0.2, 4),
       g=st.floats(-0.8, 2), d=st.floats(-0.5, 2))
def test_moment_bound_closed_form_constant(a, c, sigma, p, g, d):
    m = constant_model(a1=a, a2=a / 2, c=c, sigma=sigma, pi1=JumpMeasure((0.0,), (0.5,)),
                       gamma=(g,), pi2=JumpMeasure((0.0,), (0.3,)), delta=(d,))
    cc = (1 + p * a + 0.5 * p * (p - 1) * sigma ** 2 + 0.5 * ((1 + g) ** p - 1 - p * g)
          + 0.3 * ((1 + d) ** p - 1))
    ref = moment_closed_form(cc, c, p)
    assert moment_bound(m, 0, p) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def _shift_raw(fn, d):
    if fn["kind"] == "constant":
        return {**fn, "value": fn["value"] + d}
    if fn["kind"] == "periodic":
        return {**fn, "mean": fn["mean"] + d}
    return {**fn, "values": [v + d for v in fn["values"]]}


def test_moment_bound_monotone_in_shifts():
    base = random_jump_model(np.random.default_rng(4))
    raw = model_to_raw(base)

    def shifted(keys, d):
        r = copy.deepcopy(raw)
        for k in keys:
            r["species"][0][k] = _shift_raw(r["species"][0][k], d)
        return model_from_raw(r)

    k = moment_bound(base, 0, 1.5)
    assert moment_bound(shifted(("a1", "a2"), 0.2), 0, 1.5) > k
    assert moment_bound(shifted(("c",), 0.2), 0, 1.5) < k


def test_unbounded_moment():
    with pytest.raises(UnboundedBound):
        moment_bound(constant_model(c=0.0), 0)
    with pytest.raises(ValueError):
        moment_bound(MARGIN_MODEL, 0, 0.0)


# -- permanence constants ---------------------------------------------------------

def generator_of_v(model, i, theta, t, u):
    """``L (1 + 1/x)^theta`` at ``x = 1/u`` with the partner term at its worst, ``a_min``."""
    sp = model.species[i]
    a_min = min(float(sp.a1(t)), float(sp.a2(t)))
    c, s2 = float(sp.c(t)), float(sp.sigma(t)) ** 2
    comp = sum(w * float(g(t)) for w, g in zip(model.pi1.weights, sp.gamma))
    v = (1 + u) ** theta
    # drift of x is x (a - c x - comp); V'(x) x = -theta (1+U)^(theta-1) U
    out = -theta * (1 + u) ** (theta - 1) * u * (a_min - c / u - comp)
    out += 0.5 * s2 * (theta * (theta - 1) * (1 + u) ** (theta - 2) * u ** 2
                       + 2 * theta * (1 + u) ** (theta - 1) * u)
    for w, g in zip(model.pi1.weights, sp.gamma):
        out += w * ((1 + u / (1 + float(g(t)))) ** theta - v)
    for w, d in zip(model.pi2.weights, sp.delta):
        out += w * ((1 + u / (1 + float(d(t)))) ** theta - v)
    return out


@pytest.mark.parametrize("seed", [1, 2, 3, 4])
def test_k1_k2_dominate_the_generator(seed):
    m = random_jump_model(np.random.default_rng(seed), permanent=True)
    found = find_theta(m)
    assert found is not None
    theta, k0v = found
    _, consts = permanence_constants(m, theta, k0v)
    lo, hi = window(m)
    ts = np.linspace(lo, hi, 97)
    us = np.concatenate([np.logspace(-5, 7, 301), np.linspace(0.01, 20, 211)])
    for i, (k1, k2, _) in enumerate(consts):
        for t in ts:
            lv = generator_of_v(m, i, theta, t, us)
            bound = theta * (1 + us) ** (theta - 2) * (-k0v * us ** 2 + k1 * us + k2)
            assert np.all(lv <= bound + 1e-9 * (1 + np.abs(bound)))


def test_big_k_is_the_profile_supremum():
    theta, k0v = find_theta(MARGIN_MODEL)
    lam, consts = permanence_constants(MARGIN_MODEL, theta, k0v)
    k1, k2, big_k = consts[0]
    a, b, c = k0v - lam / theta, k1 + 2 * lam / theta, k2 + lam / theta
    _, ref = zoom_max_1d(lambda u: (1 + u) ** (theta - 2) * (-a * u * u + b * u + c), 0.0, 1e3)
    assert big_k == pytest.approx(ref, rel=1e-9)


def test_permanence_bounds_margin_model():
    b = permanence_bounds(MARGIN_MODEL, 0.05, 1.0)
    assert b.theta == 0.5 and b.lam == pytest.approx(0.5 * 0.48 / 2)
    assert b.H == pytest.approx([moment_bound(MARGIN_MODEL, i, 1.0) / 0.05 for i in (0, 1)])
    assert b.H[0] == pytest.approx(1.28 / 0.05)
    for k, h in zip(b.big_k, b.h):
        assert h == pytest.approx((0.05 * b.lam / (b.theta * k)) ** (1 / b.theta))


def test_permanence_bounds_monotone_in_epsilon():
    eps = [0.01, 0.05, 0.2, 0.5, 0.9]
    bounds = [permanence_bounds(MARGIN_MODEL, e) for e in eps]
    for b1, b2 in zip(bounds, bounds[1:]):
        assert all(x > y for x, y in zip(b1.H, b2.H))
        assert all(x < y for x, y in zip(b1.h, b2.h))
    assert all(all(h < H for h, H in zip(b.h, b.H)) for b in bounds if b.epsilon <= 0.5)


def test_permanence_bounds_errors():
    with pytest.raises(NotPermanent):
        permanence_bounds(EXTINCT_MODEL)
    with pytest.raises(ValueError):
        permanence_bounds(MARGIN_MODEL, 1.0)


# -- classification ----------------------------------------------------------------

def test_classify_examples():
    r = classify_regime(EXTINCT_MODEL)
    assert r.classification is Regime.EXTINCT
    assert r.summary().startswith("Extinct, p̄* = (-0.4, -0.4)")
    r = classify_regime(MARGIN_MODEL)
    assert r.classification is Regime.STOCHASTICALLY_PERMANENT
    assert r.persistence_floor == pytest.approx((1.04, 1.04))
    assert r.summary().startswith("StochasticallyPermanent, margin = 0.52, θ = 0.5")
    # a1 = 0.2, a2 = 0.8 and beta = 0.5
    r = classify_regime(constant_model(a1=0.2, a2=0.8, sigma=1.0))
    assert r.classification is Regime.INDETERMINATE
    assert r.p_bar_lower == pytest.approx((-0.3, -0.3))
    assert r.p_bar_star == pytest.approx((0.3, 0.3))
    assert "-0.3 <= 0 <= p̄* = 0.3" in r.summary()


def test_classify_strong_persistence_and_nonpersistence():
    # periodic growth dipping below beta: margin < 0 but positive averages
    sp = SpeciesCoefficients(Periodic(0.6, 0.55, 1.0), Periodic(0.6, 0.55, 1.0), Constant(0.5),
                             Constant(0.4))
    r = classify_regime(MutualismModel((sp, sp), JumpMeasure(), JumpMeasure(), (1.0, 1.0)))
    assert r.classification is Regime.STRONGLY_PERSISTENT_MEAN
    assert r.theta is None
    assert r.persistence_floor == pytest.approx((0.52 / 0.5, 0.52 / 0.5), rel=1e-9)
    r = classify_regime(constant_model(a1=0.5, sigma=1.0))
    assert r.classification is Regime.NONPERSISTENT_MEAN
    assert r.persistence_floor is None


def test_unresolvable_margin_is_not_permanent():
    # margin 1e-12: K0 stays negative on the whole theta grid
    m = constant_model(a1=0.08 + 1e-12, sigma=0.4)
    assert 0 < permanence_margin(m) < 1e-11
    r = classify_regime(m)
    assert find_theta(m) is None and r.theta is None
    assert r.classification is Regime.STRONGLY_PERSISTENT_MEAN


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_classification_invariant_under_relabeling(seed, permanent):
    m = random_jump_model(np.random.default_rng(seed), permanent=permanent)
    r, s = classify_regime(m), classify_regime(m.relabeled())
    assert r.classification is s.classification
    assert r.p_bar_star == pytest.approx(s.p_bar_star[::-1], rel=1e-12, abs=1e-12)
    assert r.p_bar_lower == pytest.approx(s.p_bar_lower[::-1], rel=1e-12, abs=1e-12)
    assert (r.theta is None) == (s.theta is None)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_report_invariants(seed):
    m = random_jump_model(np.random.default_rng(seed))
    r = classify_regime(m)
    assert all(lo <= hi + 1e-12 for lo, hi in zip(r.p_bar_lower, r.p_bar_star))
    assert (r.theta is not None) == (r.classification is Regime.STOCHASTICALLY_PERMANENT)
    if r.permanence_margin > 0.01:
        assert r.theta is not None
    for i, sp in enumerate(m.species):
        if sp.a1 == sp.a2:
            assert r.p_bar_lower[i] == pytest.approx(r.p_bar_star[i], abs=1e-12)
    d = r.to_dict()
    assert d["classification"] == r.classification.value
