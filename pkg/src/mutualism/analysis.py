"""Threshold quantities and regime classification.

All quantities are deterministic functionals of the model coefficients:

* long-run averages of ``p_max = a_max - beta`` and ``p_min = a_min - beta``
  (extinction, nonpersistence and strong persistence conditions);
* the permanence margin ``min_i inf_t (a_min_i(t) - beta_i(t))`` and the exponent
  ``theta`` with ``K0(theta) > 0`` that the permanence estimate is built on;
* the moment bound ``K_i(p)`` with ``limsup E[x_i^p] <= K_i(p)``;
* Chebyshev occupancy bounds ``(h, H)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .functions import DEFAULT_NODES, inspection_times, long_run_average
from .model import (MutualismModel, SPECIES, p_max_function, p_min_function)

__all__ = [
    "Regime", "RegimeReport", "PermanenceBounds", "NotPermanent", "UnboundedBound",
    "long_run_average", "permanence_margin", "k0", "find_theta", "moment_bound",
    "permanence_constants", "permanence_bounds", "classify_regime", "golden_section_max",
    "THETA_GRID", "ZERO_TOL",
]

THETA_GRID = tuple(2.0 ** -k for k in range(1, 31))
ZERO_TOL = 1e-9
# t-resolution of the two-dimensional (t, U) residual maximization
RESIDUAL_T_NODES = 2000
RESIDUAL_U_GRID = np.concatenate([[0.0], np.logspace(-6, 10, 641)])


class Regime(str, Enum):
    EXTINCT = "Extinct"
    NONPERSISTENT_MEAN = "NonpersistentMean"
    STRONGLY_PERSISTENT_MEAN = "StronglyPersistentMean"
    STOCHASTICALLY_PERMANENT = "StochasticallyPermanent"
    INDETERMINATE = "Indeterminate"


class NotPermanent(ValueError):
    """No exponent ``theta`` with ``K0(theta) > 0`` exists on the search grid."""


class UnboundedBound(ValueError):
    """The moment bound is infinite (the crowding coefficient has zero infimum)."""


def golden_section_max(f, lo, hi, iters: int = 90):
    """Vectorized golden-section search for the maximum of unimodal ``f`` on ``[lo, hi]``.

    ``lo``/``hi`` may be arrays; ``f`` is applied elementwise to arrays of the
    same shape.  Returns ``(argmax, max)``.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    for _ in range(iters):
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        left = f(c) >= f(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    x = 0.5 * (a + b)
    return x, f(x)


# -- per-species coefficient samples -----------------------------------------

@dataclass
class _Samples:
    """Coefficients of one species sampled at inspection times ``t``."""

    t: np.ndarray
    a_min: np.ndarray
    a_max: np.ndarray
    c: np.ndarray
    sig2: np.ndarray
    w1: np.ndarray
    gamma: np.ndarray  # (atoms1, len(t))
    w2: np.ndarray
    delta: np.ndarray  # (atoms2, len(t))

    @classmethod
    def build(cls, model: MutualismModel, i: int, nodes: int = DEFAULT_NODES) -> "_Samples":
        sp = model.species[i]
        t = inspection_times(sp.functions, nodes)

        def ev(f):
            return np.broadcast_to(np.asarray(f(t), dtype=float), t.shape)

        a1, a2 = ev(sp.a1), ev(sp.a2)
        sig = ev(sp.sigma)
        gam = np.array([ev(f) for f in sp.gamma]).reshape(len(sp.gamma), len(t))
        dlt = np.array([ev(f) for f in sp.delta]).reshape(len(sp.delta), len(t))
        return cls(t, np.minimum(a1, a2), np.maximum(a1, a2), ev(sp.c), sig * sig,
                   model.pi1.weight_array, gam, model.pi2.weight_array, dlt)

    def k0_terms(self, theta: float) -> np.ndarray:
        # (1/theta) * [(1+g)^-theta - 1] computed as expm1(-theta*log1p(g))/theta,
        # which stays accurate down to theta ~ 1e-9
        jump1 = self.w1 @ (self.gamma + np.expm1(-theta * np.log1p(self.gamma)) / theta)
        jump2 = self.w2 @ (np.expm1(-theta * np.log1p(self.delta)) / theta)
        return self.a_min - 0.5 * (1.0 + theta) * self.sig2 - jump1 - jump2

    def residual(self, theta: float, u: np.ndarray) -> np.ndarray:
        """``R(t, U)``: the part of the drift estimate not absorbed by ``-K0 U^2``.

        ``u`` broadcasts against a trailing time axis; returns ``(len(u), len(t))``.
        """
        u = np.asarray(u, dtype=float)[:, None]
        s = 1.0 / (1.0 + u)
        g2 = self.w1 @ (self.gamma ** 2 / (1.0 + self.gamma))
        g_ratio = self.w1 @ (self.gamma / (1.0 + self.gamma))
        out = u * (-self.a_min + self.sig2 + g2 + self.c + g_ratio) + self.c
        for weights, values in ((self.w1, self.gamma), (self.w2, self.delta)):
            for w, jump in zip(weights, values):
                inv = 1.0 / (1.0 + jump)  # shape (len(t),)
                log_inv = -np.log1p(jump)
                # (1+U)^2 [(inv + s)^theta - 1] - U^2 [inv^theta - 1], divided by theta,
                # with the U^2 terms cancelled analytically
                phi = ((1.0 + u) ** 2 * np.exp(theta * log_inv)
                       * np.expm1(theta * np.log1p(s / inv)) / theta
                       + (2.0 * u + 1.0) * np.expm1(theta * log_inv) / theta)
                out = out + w * phi
        return out

    def residual_slope_limit(self, theta: float) -> np.ndarray:
        """``lim_{U -> inf} R(t, U) / U``."""
        g2 = self.w1 @ (self.gamma ** 2 / (1.0 + self.gamma))
        g_ratio = self.w1 @ (self.gamma / (1.0 + self.gamma))
        out = -self.a_min + self.sig2 + g2 + self.c + g_ratio
        for weights, values in ((self.w1, self.gamma), (self.w2, self.delta)):
            for w, jump in zip(weights, values):
                log_inv = -np.log1p(jump)
                out = out + w * (np.exp((theta - 1.0) * log_inv)
                                 + 2.0 * np.expm1(theta * log_inv) / theta)
        return out

    def moment_constant(self, p: float) -> np.ndarray:
        """``C(t)`` in the profile ``x^p (C(t) - p c(t) x)`` of the moment estimate."""
        jump1 = self.w1 @ (np.expm1(p * np.log1p(self.gamma)) - p * self.gamma)
        jump2 = self.w2 @ np.expm1(p * np.log1p(self.delta))
        return 1.0 + p * self.a_max + 0.5 * p * (p - 1.0) * self.sig2 + jump1 + jump2


def _samples(model, nodes=DEFAULT_NODES):
    return [_Samples.build(model, i, nodes) for i in SPECIES]


# -- permanence --------------------------------------------------------------

def permanence_margin(model: MutualismModel, nodes: int = DEFAULT_NODES) -> float:
    """``min_i inf_t (min_j a_ij(t) - beta_i(t))``."""
    return min(float(np.min(p_min_function(model, i)(
        inspection_times(model.species[i].functions, nodes)))) for i in SPECIES)


def k0(model: MutualismModel, theta: float, nodes: int = DEFAULT_NODES, _cache=None) -> float:
    """``K0(theta)``, the quadratic decay rate in the estimate for ``(1 + 1/x)^theta``."""
    samples = _cache if _cache is not None else _samples(model, nodes)
    return min(float(np.min(s.k0_terms(theta))) for s in samples)


def find_theta(model: MutualismModel, nodes: int = DEFAULT_NODES):
    """Largest ``theta`` in ``THETA_GRID`` with ``K0(theta) > 0``.

    Returns ``(theta, K0(theta))`` or ``None``.  A positive permanence margin
    guarantees success for small enough ``theta``.
    """
    samples = _samples(model, nodes)
    for theta in THETA_GRID:
        value = k0(model, theta, _cache=samples)
        if value > 0.0:
            return theta, value
    return None


@dataclass(frozen=True)
class PermanenceBounds:
    epsilon: float
    p: float
    theta: float
    k0: float
    lam: float
    k1: tuple[float, float]
    k2: tuple[float, float]
    big_k: tuple[float, float]
    moment: tuple[float, float]
    h: tuple[float, float]
    H: tuple[float, float]


def permanence_constants(model: MutualismModel, theta: float, k0_value: float,
                         lam: float | None = None, t_nodes: int = RESIDUAL_T_NODES):
    """Per-species ``(K1, K2, K)`` of the permanence estimate.

    ``K2 = sup_t R(t, 0)`` and ``K1 = sup_{t, U > 0} (R(t, U) - K2) / U`` make
    ``R <= K1 U + K2`` hold on the sampled grid;
    ``K = sup_u (1+u)^(theta-2) [-(K0 - lam/theta) u^2 + (K1 + 2 lam/theta) u + K2 + lam/theta]``.
    """
    lam = theta * k0_value / 2.0 if lam is None else lam
    if not k0_value - lam / theta > 0.0:
        raise ValueError("lambda must satisfy K0(theta) - lambda/theta > 0")
    out = []
    for s in _samples(model, t_nodes):
        r = s.residual(theta, RESIDUAL_U_GRID)
        k2 = float(np.max(r[0]))
        u = RESIDUAL_U_GRID[1:, None]
        slopes = (r[1:] - k2) / u
        k1 = float(max(np.max(slopes), np.max(s.residual_slope_limit(theta))))
        big_k = _quadratic_profile_sup(theta, k0_value - lam / theta, k1 + 2 * lam / theta,
                                       k2 + lam / theta)
        out.append((k1, k2, big_k))
    return lam, out


def _quadratic_profile_sup(theta, a, b, c):
    """``sup_{u >= 0} (1+u)^(theta-2) (-a u^2 + b u + c)`` for ``a > 0``."""
    def f(u):
        return (1.0 + u) ** (theta - 2.0) * (-a * u * u + b * u + c)

    grid = np.concatenate([[0.0], np.logspace(-6, 8, 2801)])
    vals = f(grid)
    j = int(np.argmax(vals))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    _, best = golden_section_max(f, lo, hi)
    return float(max(best, vals[j]))


def moment_bound(model: MutualismModel, i: int, p: float = 1.0,
                 nodes: int = DEFAULT_NODES) -> float:
    """``K_i(p)``: sup over t and x >= 0 of ``x^p (C(t) - p c_i(t) x)``.

    ``C(t) = 1 + p a_max + p(p-1) sigma^2/2 + jump terms`` collects everything
    that does not depend on ``x``; the rational term is bounded by its larger
    extreme ``max(a_i1, a_i2)``.  For each t the profile is positive exactly
    on ``(0, C/(p c))`` and unimodal there, so a golden-section search on that
    bracket finds its maximum.
    """
    if not p > 0.0:
        raise ValueError("p must be positive")
    s = _Samples.build(model, i, nodes)
    if not np.min(s.c) > 0.0:
        raise UnboundedBound(f"c_{i + 1} has nonpositive infimum; K_{i + 1}(p) is infinite")
    big_c = s.moment_constant(p)
    positive = big_c > 0.0
    if not np.any(positive):
        return 0.0
    cc, cp = big_c[positive], s.c[positive]

    def profile(x):
        return x ** p * (cc - p * cp * x)

    _, best = golden_section_max(profile, np.zeros_like(cc), cc / (p * cp))
    return float(np.max(best))


def permanence_bounds(model: MutualismModel, epsilon: float = 0.05, p: float = 1.0,
                      nodes: int = DEFAULT_NODES) -> PermanenceBounds:
    """Occupancy bounds with ``liminf P{h <= x_i(t) <= H} >= 1 - epsilon`` each side.

    ``H_i = (K_i(p)/epsilon)^(1/p)`` from the moment bound and
    ``h_i = (epsilon lam / (theta K_i))^(1/theta)`` from the bound on
    ``E[(1 + 1/x_i)^theta]``, with ``lam = theta K0(theta) / 2``.

    Raises:
        NotPermanent: if no admissible ``theta`` exists.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    found = find_theta(model, nodes)
    if found is None:
        raise NotPermanent("K0(theta) <= 0 on the whole theta grid")
    theta, k0_value = found
    lam, consts = permanence_constants(model, theta, k0_value)
    moments = tuple(moment_bound(model, i, p, nodes) for i in SPECIES)
    H = tuple((m / epsilon) ** (1.0 / p) for m in moments)
    h = tuple((epsilon * lam / (theta * k)) ** (1.0 / theta) for _, _, k in consts)
    return PermanenceBounds(epsilon, p, theta, k0_value, lam,
                            tuple(k1 for k1, _, _ in consts), tuple(k2 for _, k2, _ in consts),
                            tuple(k for _, _, k in consts), moments, h, H)


# -- classification ----------------------------------------------------------

@dataclass(frozen=True)
class RegimeReport:
    model_hash: str
    p_bar_star: tuple[float, float]
    p_bar_lower: tuple[float, float]
    permanence_margin: float
    theta: float | None
    k0: float | None
    c_sup: tuple[float, float]
    classification: Regime
    persistence_floor: tuple[float, float] | None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classification"] = self.classification.value
        return d

    def summary(self) -> str:
        def fmt(v):
            return "(" + ", ".join(f"{x:.6g}" for x in v) + ")"

        cls = self.classification
        if cls is Regime.EXTINCT or cls is Regime.NONPERSISTENT_MEAN:
            return f"{cls.value}, p̄* = {fmt(self.p_bar_star)}"
        if cls is Regime.STOCHASTICALLY_PERMANENT:
            return (f"{cls.value}, margin = {self.permanence_margin:.6g}, θ = {self.theta:.6g}, "
                    f"floor = {fmt(self.persistence_floor)}")
        if cls is Regime.STRONGLY_PERSISTENT_MEAN:
            return f"{cls.value}, floor = {fmt(self.persistence_floor)}"
        gaps = ", ".join(f"species {i + 1}: p̄_lower = {lo:.6g} <= 0 <= p̄* = {hi:.6g}"
                         for i, (lo, hi) in enumerate(zip(self.p_bar_lower, self.p_bar_star)))
        return f"{cls.value} (no theorem applies; {gaps})"


def classify_regime(model: MutualismModel, nodes: int = DEFAULT_NODES) -> RegimeReport:
    """Strongest conclusion whose hypotheses hold, checked in order:
    permanence, strong persistence in the mean, extinction, nonpersistence
    in the mean; otherwise ``Indeterminate``."""
    p_star = tuple(long_run_average(p_max_function(model, i), nodes) for i in SPECIES)
    p_lower = tuple(long_run_average(p_min_function(model, i), nodes) for i in SPECIES)
    margin = permanence_margin(model, nodes)
    found = find_theta(model, nodes) if margin > 0.0 else None
    c_sup = tuple(model.c_sup(i) for i in SPECIES)
    floor = None
    if found is not None:
        # margin > 0 but below what theta = 2^-30 resolves falls through
        regime = Regime.STOCHASTICALLY_PERMANENT
    elif min(p_lower) > 0.0:
        regime = Regime.STRONGLY_PERSISTENT_MEAN
    elif max(p_star) < 0.0:
        regime = Regime.EXTINCT
    elif all(abs(v) <= ZERO_TOL for v in p_star):
        regime = Regime.NONPERSISTENT_MEAN
    else:
        regime = Regime.INDETERMINATE
    if regime in (Regime.STOCHASTICALLY_PERMANENT, Regime.STRONGLY_PERSISTENT_MEAN):
        floor = tuple(lo / cs for lo, cs in zip(p_lower, c_sup))
    return RegimeReport(
        model_hash=model.fingerprint(), p_bar_star=p_star, p_bar_lower=p_lower,
        permanence_margin=margin, theta=found[0] if found else None,
        k0=found[1] if found else None, c_sup=c_sup, classification=regime,
        persistence_floor=floor)
