"""Bounded time-dependent coefficient functions.

Three parametrized families are supported, each with closed-form extremes and
an exact long-run average:

    Constant(value)
    Periodic(mean, amplitude, period, phase)   mean + amplitude*sin(2*pi*t/period + phase)
    PiecewiseConstant(breakpoints, values)     values[j] on [b[j-1], b[j]), last value forever

Expressions built from these (sums, products, ``maximum``/``minimum`` and
other pointwise maps) are represented by :class:`Derived`, which remembers the
primitive components it depends on.  That is enough to know when an
expression is eventually constant or eventually periodic, and hence how to
average it or bound it over ``t >= 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Callable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi

# finest grid used when an expression has to be bounded numerically
DEFAULT_NODES = 100_000
# common period search gives up beyond this many multiples of the base period
MAX_PERIOD_MULTIPLE = 1000
LONG_WINDOW = 1.0e4
LONG_WINDOW_NODES = 1_000_000


class NoCommonPeriodWarning(UserWarning):
    """Periodic components have (numerically) incommensurate periods.

    The affected average or extreme is computed over a long finite window and
    carries the attached ``tolerance`` (a conservative error estimate)."""

    def __init__(self, message, tolerance):
        super().__init__(message)
        self.tolerance = tolerance


class _Arithmetic:
    """Pointwise arithmetic producing :class:`Derived` expressions."""

    def __add__(self, other):
        return combine(np.add, self, other)

    def __radd__(self, other):
        return combine(np.add, other, self)

    def __sub__(self, other):
        return combine(np.subtract, self, other)

    def __rsub__(self, other):
        return combine(np.subtract, other, self)

    def __mul__(self, other):
        return combine(np.multiply, self, other)

    def __rmul__(self, other):
        return combine(np.multiply, other, self)

    def __neg__(self):
        return combine(np.negative, self)


class TimeFunction(_Arithmetic):
    """Base class for the primitive coefficient functions."""

    @property
    def sup(self) -> float:
        raise NotImplementedError

    @property
    def inf(self) -> float:
        raise NotImplementedError

    @property
    def average(self) -> float:
        """Exact long-run average (1/t) * integral over [0, t] as t -> inf."""
        raise NotImplementedError

    @property
    def components(self) -> tuple["TimeFunction", ...]:
        return (self,)

    def __call__(self, t):
        raise NotImplementedError

    def extreme_candidates(self, lo: float, hi: float) -> np.ndarray:
        """Times in [lo, hi] where this function attains a local extreme."""
        return np.empty(0)


@dataclass(frozen=True, eq=True)
class Constant(TimeFunction):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def __call__(self, t):
        if np.ndim(t) == 0:
            return self.value
        return np.full(np.shape(t), self.value)

    @property
    def sup(self):
        return self.value

    @property
    def inf(self):
        return self.value

    @property
    def average(self):
        return self.value


@dataclass(frozen=True, eq=True)
class Periodic(TimeFunction):
    mean: float
    amplitude: float
    period: float
    phase: float = 0.0

    def __post_init__(self):
        for name in ("mean", "amplitude", "period", "phase"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.period > 0.0 or not math.isfinite(self.period):
            raise ValueError(f"period must be positive and finite, got {self.period}")

    def __call__(self, t):
        return self.mean + self.amplitude * np.sin(TWO_PI * np.asarray(t) / self.period + self.phase)

    @property
    def sup(self):
        return self.mean + abs(self.amplitude)

    @property
    def inf(self):
        return self.mean - abs(self.amplitude)

    @property
    def average(self):
        return self.mean

    def extreme_candidates(self, lo, hi):
        if self.amplitude == 0.0:
            return np.empty(0)
        # sin(2 pi t / P + phase) = +-1  <=>  t = P/(2 pi) * (pi/2 - phase + k pi)
        half = self.period / 2.0
        t0 = self.period / TWO_PI * (math.pi / 2.0 - self.phase)
        k_lo = math.ceil((lo - t0) / half)
        k_hi = math.floor((hi - t0) / half)
        if k_hi < k_lo:
            return np.empty(0)
        return t0 + half * np.arange(k_lo, k_hi + 1)


@dataclass(frozen=True, eq=True)
class PiecewiseConstant(TimeFunction):
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(bp) + 1:
            raise ValueError(
                f"need len(values) == len(breakpoints) + 1, got {len(vals)} values "
                f"for {len(bp)} breakpoints")
        if any(b <= 0.0 for b in bp[:1]) or any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError(f"breakpoints must be strictly ascending and positive: {bp}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __call__(self, t):
        idx = np.searchsorted(np.asarray(self.breakpoints), t, side="right")
        out = np.asarray(self.values)[idx]
        return float(out) if np.ndim(out) == 0 else out

    @property
    def sup(self):
        return max(self.values)

    @property
    def inf(self):
        return min(self.values)

    @property
    def average(self):
        return self.values[-1]


@dataclass(frozen=True, eq=False)
class Derived(_Arithmetic):
    """A pointwise expression of primitive time functions.

    ``fn`` maps an array of times to an array of values; ``components`` are the
    primitives it depends on (used only for period/breakpoint bookkeeping).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    components: tuple[TimeFunction, ...] = field(default=())

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        out = np.broadcast_to(np.asarray(self.fn(np.atleast_1d(t_arr)), dtype=float),
                              np.atleast_1d(t_arr).shape)
        return float(out[0]) if t_arr.ndim == 0 else np.array(out)


def _as_callable(f):
    if isinstance(f, (TimeFunction, Derived)):
        return f, f.components
    value = float(f)
    return (lambda t: np.full(np.shape(t), value)), ()


def combine(op: Callable, *args) -> Derived:
    """Pointwise ``op(f1(t), f2(t), ...)`` over time functions and scalars."""
    parts = [_as_callable(a) for a in args]
    comps = _unique(c for _, cs in parts for c in cs)
    fns = [p for p, _ in parts]
    return Derived(lambda t: op(*(fn(t) for fn in fns)), comps)


def maximum(f, g) -> Derived:
    return combine(np.maximum, f, g)


def minimum(f, g) -> Derived:
    return combine(np.minimum, f, g)


def period_of(f: TimeFunction) -> float | None:
    return getattr(f, "period", None)


def breakpoints_of(f: TimeFunction) -> tuple[float, ...]:
    return getattr(f, "breakpoints", ())


def _unique(items) -> tuple:
    seen: list = []
    for it in items:
        if not any(it is s or it == s for s in seen):
            seen.append(it)
    return tuple(seen)


def components_of(f) -> tuple[TimeFunction, ...]:
    return tuple(f.components) if isinstance(f, (TimeFunction, Derived)) else ()


def settle_time(components: Sequence[TimeFunction]) -> float:
    """Time after which every piecewise component has reached its final value."""
    bps = [b for c in components for b in breakpoints_of(c)]
    return max(bps, default=0.0)


def common_period(components: Sequence[TimeFunction]) -> float | None:
    """Smallest common period of the periodic components.

    Returns ``0.0`` when there are no periodic components (eventually
    constant) and ``None`` when the periods are incommensurate within
    ``MAX_PERIOD_MULTIPLE`` multiples of the shortest one.
    """
    periods = sorted({period_of(c) for c in components if period_of(c) is not None})
    if not periods:
        return 0.0
    base = periods[0]
    multiples = []
    for p in periods:
        ratio = Fraction(p / base).limit_denominator(MAX_PERIOD_MULTIPLE)
        if abs(float(ratio) - p / base) > 1e-12 * (p / base):
            return None
        multiples.append(ratio.numerator)
    m = reduce(lambda a, b: a * b // math.gcd(a, b), multiples, 1)
    if m > MAX_PERIOD_MULTIPLE:
        return None
    return base * m


def _pieces(components, t_end_extra):
    """Half-open time intervals on which all piecewise components are constant.

    The last interval starts at the settle time and has length ``t_end_extra``.
    """
    cuts = sorted({0.0, *(b for c in components for b in breakpoints_of(c))})
    edges = cuts + [cuts[-1] + t_end_extra]
    return list(zip(edges[:-1], edges[1:]))


def inspection_times(components: Sequence[TimeFunction], nodes: int = DEFAULT_NODES) -> np.ndarray:
    """Times at which to evaluate an expression to bound it over ``t >= 0``.

    Each stretch on which the piecewise components are constant is covered by
    a uniform grid spanning at most one common period of the periodic
    components, plus every analytic extreme of every periodic component in
    that stretch.  Eventually-constant expressions get one point per piece.
    """
    period = common_period(components)
    periodic = [c for c in components if period_of(c) is not None]
    if period == 0.0:
        return np.array([lo for lo, _ in _pieces(components, 1.0)])
    if period is None:
        warnings.warn(NoCommonPeriodWarning(
            "incommensurate periods; bounding over a long window", tolerance=float("nan")))
        period = LONG_WINDOW
        nodes = max(nodes, LONG_WINDOW_NODES)
    chunks = []
    for lo, hi in _pieces(components, period):
        hi = min(hi, lo + period)
        chunks.append(np.linspace(lo, hi, nodes, endpoint=False))
        for c in periodic:
            cand = c.extreme_candidates(lo, hi)
            chunks.append(cand[cand < hi])
    return np.concatenate(chunks)


def infimum(f, nodes: int = DEFAULT_NODES) -> float:
    if isinstance(f, TimeFunction):
        return f.inf
    ts = inspection_times(components_of(f), nodes)
    return float(np.min(f(ts)))


def supremum(f, nodes: int = DEFAULT_NODES) -> float:
    if isinstance(f, TimeFunction):
        return f.sup
    ts = inspection_times(components_of(f), nodes)
    return float(np.max(f(ts)))


def long_run_average(f, nodes: int = DEFAULT_NODES) -> float:
    """Long-run time average lim (1/t) * integral_0^t f(s) ds.

    Exact for primitives and for eventually-constant expressions.  For
    eventually-periodic expressions the average over one common period is
    taken with a ``nodes``-point rectangle rule (spectrally accurate for
    smooth periodic integrands).  Incommensurate periods fall back to a long
    window and emit :class:`NoCommonPeriodWarning`.
    """
    if isinstance(f, TimeFunction):
        return f.average
    if not isinstance(f, Derived):
        return float(f)
    comps = f.components
    t0 = settle_time(comps)
    period = common_period(comps)
    if period == 0.0:
        return float(f(t0 + 1.0))
    if period is None:
        sup = float(np.max(np.abs(f(inspection_times(comps, 2000)))))
        longest = max(period_of(c) for c in comps if period_of(c) is not None)
        tol = 2.0 * sup * longest / LONG_WINDOW
        warnings.warn(NoCommonPeriodWarning(
            f"incommensurate periods; averaging over [{t0}, {t0 + LONG_WINDOW}] "
            f"(tolerance {tol:.3g})", tolerance=tol))
        period, nodes = LONG_WINDOW, max(nodes, LONG_WINDOW_NODES)
    ts = t0 + period * np.arange(nodes) / nodes
    return float(np.mean(f(ts)))


# -- raw (JSON-ready) form ---------------------------------------------------

def function_from_raw(raw) -> TimeFunction:
    """Build a primitive from its raw form; a bare number means ``Constant``."""
    if isinstance(raw, bool):
        raise ValueError("booleans are not time functions")
    if isinstance(raw, (int, float)):
        return Constant(raw)
    if not isinstance(raw, dict):
        raise ValueError(f"cannot interpret {raw!r} as a time function")
    kind = raw.get("kind")
    fields_by_kind = {
        "constant": ({"value"}, set()),
        "periodic": ({"mean", "amplitude", "period"}, {"phase"}),
        "piecewise": ({"breakpoints", "values"}, set()),
    }
    if kind not in fields_by_kind:
        raise ValueError(f"unknown time function kind {kind!r}")
    required, optional = fields_by_kind[kind]
    keys = set(raw) - {"kind"}
    if not required <= keys or not keys <= required | optional:
        raise ValueError(
            f"{kind} function needs keys {sorted(required)} (optional {sorted(optional)}), "
            f"got {sorted(keys)}")
    if kind == "constant":
        return Constant(raw["value"])
    if kind == "periodic":
        return Periodic(raw["mean"], raw["amplitude"], raw["period"], raw.get("phase", 0.0))
    return PiecewiseConstant(tuple(raw["breakpoints"]), tuple(raw["values"]))


def function_to_raw(f: TimeFunction) -> dict:
    if isinstance(f, Constant):
        return {"kind": "constant", "value": f.value}
    if isinstance(f, Periodic):
        return {"kind": "periodic", "mean": f.mean, "amplitude": f.amplitude,
                "period": f.period, "phase": f.phase}
    if isinstance(f, PiecewiseConstant):
        return {"kind": "piecewise", "breakpoints": list(f.breakpoints), "values": list(f.values)}
    raise TypeError(f"not a primitive time function: {f!r}")
