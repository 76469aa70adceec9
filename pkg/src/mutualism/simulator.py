"""Path integration on a fixed noise realization.

``simulate_log_euler`` integrates ``v_i = ln x_i`` and is positive by
construction.  ``simulate_direct_euler`` steps ``x_i`` itself and exists as an
independent cross-check; it clamps non-positive updates and counts them.

Both schemes are explicit (coefficients at the left end of each step, Ito
convention) and apply a jump after the diffusion sub-step ending at its time.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .model import MutualismModel, compensator, drift_bracket
from .noise import JumpEvent, NoisePath

OVERFLOW_BOUND = 700.0
POSITIVITY_FLOOR = 1e-12


class Scheme(str, Enum):
    LOG_EULER = "log_euler"
    DIRECT_EULER = "direct_euler"


class NumericOverflow(ArithmeticError):
    """The log-state left ``[-bound, bound]``: step size or parameters are pathological."""

    def __init__(self, time: float, bound: float):
        super().__init__(f"|ln x| exceeded {bound:g} at t = {time:.17g}")
        self.time = time
        self.bound = bound


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), 2), strictly positive for LOG_EULER
    events: tuple[JumpEvent, ...]
    event_steps: np.ndarray
    scheme: Scheme
    log_states: np.ndarray | None = None
    breaches: int = 0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def log_drift(model: MutualismModel, i: int, t, x_1, x_2):
    """Drift of ``ln x_i`` between jumps, for raw (uncompensated) jump events.

    Equals ``bracket - sigma_i^2 / 2 - sum_k w1_k gamma_i(t, z_k)``.
    """
    x = (x_1, x_2)
    sig = np.asarray(model.species[i].sigma(t), dtype=float)
    return drift_bracket(model, i, t, x[i], x[1 - i]) - 0.5 * sig * sig - compensator(model, i, t)


@dataclass(frozen=True)
class _Prepared:
    dt: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    c: np.ndarray
    sig: np.ndarray
    comp: np.ndarray
    ev_steps: np.ndarray
    ev_raw: np.ndarray  # gamma or delta value at each event, per species


def _columns(fns, t):
    return np.ascontiguousarray(np.column_stack([np.broadcast_to(f(t), t.shape) for f in fns]),
                                dtype=float)


def _prepare(model: MutualismModel, path: NoisePath) -> _Prepared:
    t = path.times[:-1]
    sp = model.species
    comp = np.column_stack([np.broadcast_to(compensator(model, i, t), t.shape) for i in (0, 1)])
    ev_raw = np.empty((len(path.events), 2))
    for e, ev in enumerate(path.events):
        for i in (0, 1):
            fns = sp[i].gamma if ev.measure_id == 1 else sp[i].delta
            ev_raw[e, i] = fns[ev.atom_index](ev.time)
    return _Prepared(
        dt=np.diff(path.times),
        a1=_columns([s.a1 for s in sp], t),
        a2=_columns([s.a2 for s in sp], t),
        c=_columns([s.c for s in sp], t),
        sig=_columns([s.sigma for s in sp], t),
        comp=np.ascontiguousarray(comp, dtype=float),
        ev_steps=np.ascontiguousarray(path.event_steps, dtype=np.int64),
        ev_raw=ev_raw,
    )


@dataclass(frozen=True)
class PathRecord:
    """What an ensemble keeps from one path."""

    checkpoint_states: np.ndarray   # (K, 2)
    checkpoint_integrals: np.ndarray  # (K, 2) integral of x over [0, checkpoint]
    integral: np.ndarray            # (2,) integral over [0, horizon]
    breaches: int


def _run(model, path, scheme, checkpoints, store, bound, floor):
    prep = _prepare(model, path)
    cps = np.ascontiguousarray(checkpoints, dtype=np.int64)
    cp_x = np.zeros((len(cps), 2))
    cp_int = np.zeros((len(cps), 2))
    full = np.empty((len(path.times) if store else 1, 2))
    if scheme is Scheme.LOG_EULER:
        shift = -0.5 * prep.sig ** 2 - prep.comp
        status, bad, i0, i1 = _kernels.log_euler(
            np.asarray(model.x0, dtype=float), prep.dt, path.wiener, prep.a1, prep.a2,
            prep.c, prep.sig, shift, prep.ev_steps, np.log1p(prep.ev_raw), cps, store,
            float(bound), full, cp_x, cp_int)
        if status != _kernels.OK:
            raise NumericOverflow(float(path.times[bad]), bound)
        breaches = 0
    else:
        breaches, i0, i1 = _kernels.direct_euler(
            np.asarray(model.x0, dtype=float), prep.dt, path.wiener, prep.a1, prep.a2,
            prep.c, prep.sig, -prep.comp, prep.ev_steps, 1.0 + prep.ev_raw, cps, store,
            float(floor), full, cp_x, cp_int)
    return full, PathRecord(cp_x, cp_int, np.array([i0, i1]), int(breaches))


def simulate_log_euler(model: MutualismModel, path: NoisePath,
                       bound: float = OVERFLOW_BOUND) -> Trajectory:
    """Integrate ``ln x`` along ``path``; states are ``exp`` of the log-states.

    Raises:
        NumericOverflow: if ``|ln x_i|`` exceeds ``bound``.
    """
    v, _ = _run(model, path, Scheme.LOG_EULER, [], True, bound, POSITIVITY_FLOOR)
    v.setflags(write=False)
    x0 = np.asarray(model.x0, dtype=float)
    states = x0 * np.exp(v - np.log(x0))
    if not np.all(states > 0.0):
        raise AssertionError("log-Euler produced a non-positive state")
    states.setflags(write=False)
    return Trajectory(path.times, states, path.events, path.event_steps, Scheme.LOG_EULER,
                      log_states=v)


def simulate_direct_euler(model: MutualismModel, path: NoisePath,
                          floor: float = POSITIVITY_FLOOR) -> Trajectory:
    """Multiplicative Euler directly on ``x``.  Breaches of positivity are
    clamped to ``floor`` and counted in ``Trajectory.breaches``."""
    x, rec = _run(model, path, Scheme.DIRECT_EULER, [], True, OVERFLOW_BOUND, floor)
    x.setflags(write=False)
    return Trajectory(path.times, x, path.events, path.event_steps, Scheme.DIRECT_EULER,
                      breaches=rec.breaches)


def simulate(model: MutualismModel, path: NoisePath, scheme: Scheme | str = Scheme.LOG_EULER,
             **kwargs) -> Trajectory:
    scheme = Scheme(scheme)
    if scheme is Scheme.LOG_EULER:
        return simulate_log_euler(model, path, **kwargs)
    return simulate_direct_euler(model, path, **kwargs)


def record_path(model: MutualismModel, path: NoisePath, scheme: Scheme, checkpoints,
                bound: float = OVERFLOW_BOUND, floor: float = POSITIVITY_FLOOR) -> PathRecord:
    """Integrate without storing the path, keeping only checkpoint data."""
    _, rec = _run(model, path, Scheme(scheme), checkpoints, False, bound, floor)
    return rec
