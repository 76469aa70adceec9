"""Wiener increments and exact compound-Poisson jump events.

Every path is generated from four independent Philox (counter-based) streams
keyed by ``(seed, path_index, role)``, so a path depends only on its own key
and never on how many other paths were generated before it or on which
thread generated it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .model import JumpMeasure, MutualismModel


class StreamRole(IntEnum):
    WIENER_1 = 0
    WIENER_2 = 1
    EVENTS_1 = 2
    EVENTS_2 = 3


def stream(seed: int, path_index: int, role: StreamRole) -> np.random.Generator:
    """Independent generator for one noise source of one path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(path_index), int(role)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class JumpEvent:
    time: float
    measure_id: int  # 1 or 2
    atom_index: int
    mark: float


def sample_jump_events(measure: JumpMeasure, measure_id: int, horizon: float,
                       rng: np.random.Generator) -> list[JumpEvent]:
    """Points of a Poisson random measure with intensity ``dt x measure`` on [0, horizon].

    The count is Poisson(total_mass * horizon), times are i.i.d. uniform and
    each event picks atom ``k`` with probability ``w_k / total_mass``.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    lam = measure.total_mass
    if lam == 0.0:
        return []
    n = int(rng.poisson(lam * horizon))
    times = np.sort(rng.uniform(0.0, horizon, size=n))
    atoms = rng.choice(len(measure), size=n, p=measure.weight_array / lam)
    return [JumpEvent(float(t), measure_id, int(k), measure.marks[k]) for t, k in zip(times, atoms)]


@dataclass(frozen=True, eq=False)
class NoisePath:
    """One realization of all randomness, independent of any scheme.

    ``times`` is the jump-adapted grid (base grid plus event times) and
    ``wiener[n, i]`` is the increment of ``w_i`` over ``[times[n], times[n+1]]``.
    ``event_steps[e]`` is the index into ``times`` of ``events[e]``.
    """

    horizon: float
    base_grid: np.ndarray
    times: np.ndarray
    wiener: np.ndarray
    events: tuple[JumpEvent, ...]
    event_steps: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def equals(self, other: "NoisePath") -> bool:
        return (self.horizon == other.horizon and self.events == other.events
                and np.array_equal(self.base_grid, other.base_grid)
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.wiener, other.wiener)
                and np.array_equal(self.event_steps, other.event_steps))


def _freeze(*arrays):
    for a in arrays:
        a.setflags(write=False)


def _order_events(ev1, ev2):
    # ties at identical float times: measure 1 first
    return tuple(sorted(ev1 + ev2, key=lambda e: (e.time, e.measure_id)))


def _refine(base_grid, events):
    ev_times = np.array([e.time for e in events], dtype=float)
    times = np.union1d(base_grid, ev_times)
    steps = np.searchsorted(times, ev_times)
    return times, steps.astype(np.int64)


def _bridge(base_grid, base_incr, times, rng):
    """Split base-grid increments at the extra points of ``times`` (Brownian bridge)."""
    if len(times) == len(base_grid):
        return base_incr.copy()
    owner = np.searchsorted(base_grid, times[:-1], side="right") - 1
    out = base_incr[owner]
    split = np.flatnonzero(np.diff(owner) == 0)  # refined step n shares its base step with n+1
    starts = split[np.r_[True, np.diff(split) > 1]] if len(split) else split
    for first in starts:
        j = owner[first]
        b = base_grid[j + 1]
        left, remaining = base_grid[j], base_incr[j]
        n = first
        while n + 1 < len(owner) and owner[n + 1] == j:
            s = times[n + 1]
            step = (remaining * (s - left) / (b - left)
                    + np.sqrt((s - left) * (b - s) / (b - left)) * rng.standard_normal())
            out[n] = step
            remaining -= step
            left = s
            n += 1
        out[n] = remaining
    return out


def generate_noise_path(model: MutualismModel, horizon: float, n_steps: int, seed: int,
                        path_index: int) -> NoisePath:
    """Build the noise for path ``path_index`` on a uniform grid of ``n_steps`` steps.

    Wiener increments are drawn on the base grid and then split at event
    times by Brownian bridges drawn from the same stream, so the base-grid
    Brownian path does not depend on the jump samples.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    base = np.linspace(0.0, float(horizon), int(n_steps) + 1)
    ev1 = sample_jump_events(model.pi1, 1, horizon, stream(seed, path_index, StreamRole.EVENTS_1))
    ev2 = sample_jump_events(model.pi2, 2, horizon, stream(seed, path_index, StreamRole.EVENTS_2))
    events = _order_events(ev1, ev2)
    times, steps = _refine(base, events)
    sqrt_dt = np.sqrt(np.diff(base))
    wiener = np.empty((len(times) - 1, 2))
    for i, role in enumerate((StreamRole.WIENER_1, StreamRole.WIENER_2)):
        rng = stream(seed, path_index, role)
        base_incr = sqrt_dt * rng.standard_normal(n_steps)
        wiener[:, i] = _bridge(base, base_incr, times, rng)
    _freeze(base, times, wiener, steps)
    return NoisePath(float(horizon), base, times, wiener, events, steps)


def coarsen(path: NoisePath, factor: int) -> NoisePath:
    """The same realization on a base grid ``factor`` times coarser.

    Increments over the coarse jump-adapted grid are sums of the fine ones,
    so strong-error studies can compare step sizes on a single Brownian path.
    """
    n = len(path.base_grid) - 1
    if factor < 1 or n % factor:
        raise ValueError(f"factor {factor} does not divide {n} base steps")
    if factor == 1:
        return path
    base = path.base_grid[::factor].copy()
    times, steps = _refine(base, path.events)
    w_fine = np.vstack([np.zeros((1, 2)), np.cumsum(path.wiener, axis=0)])
    keep = np.searchsorted(path.times, times)
    if not np.array_equal(path.times[keep], times):
        raise AssertionError("coarse grid is not a subset of the fine grid")
    wiener = np.diff(w_fine[keep], axis=0)
    _freeze(base, times, wiener, steps)
    return NoisePath(path.horizon, base, times, wiener, path.events, steps)
