"""Path ensembles and empirical checks of the predicted regime.

The asymptotic statements (limsup/liminf as t -> inf) are proxied at a finite
horizon: terminal values, time averages over [0, T], and a late window (the
last ``late_fraction`` of the horizon) sampled at ``n_checkpoints`` base-grid
times.  Empirical quantities are compared with their predictions up to
``n_se`` standard errors across paths.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import Regime, RegimeReport, moment_bound, permanence_bounds
from .model import MutualismModel, SPECIES
from .noise import generate_noise_path
from .simulator import NumericOverflow, Scheme, record_path

log = logging.getLogger(__name__)

MAX_EXCLUDED_FRACTION = 0.01
# time-average trace checkpoints, as fractions of the horizon
AVERAGE_FRACTIONS = (0.125, 0.25, 0.5)


class EnsembleFailure(RuntimeError):
    """Too many paths hit a numerical overflow."""


class MismatchedInputs(ValueError):
    """Statistics and report do not describe the same model."""


def mean_se(samples: np.ndarray, axis: int = 0):
    """Mean and standard error along ``axis``, ignoring NaN (excluded paths)."""
    n = np.sum(~np.isnan(samples), axis=axis)
    mean = np.nanmean(samples, axis=axis)
    sd = np.nanstd(samples, axis=axis, ddof=1) if np.all(n > 1) else np.zeros_like(mean)
    return mean, sd / np.sqrt(n)


@dataclass(frozen=True, eq=False)
class EnsembleStats:
    model_hash: str
    scheme: Scheme
    horizon: float
    n_steps: int
    n_paths: int
    seed: int
    checkpoint_times: np.ndarray      # (K,)
    late: np.ndarray                  # (K,) bool, checkpoint inside the late window
    terminal: np.ndarray              # (n, 2)
    time_average: np.ndarray          # (n, 2)
    log_slope: np.ndarray             # (n, 2) ln x_i(T) / T
    checkpoint_states: np.ndarray     # (n, K, 2)
    checkpoint_averages: np.ndarray   # (n, K, 2)
    breaches: np.ndarray              # (n,)
    excluded: tuple[int, ...] = field(default=())

    def moment(self, p: float, late_only: bool = True):
        """Empirical ``E[x_i^p]`` per checkpoint, with standard errors: ``(K, 2)`` each."""
        x = self.checkpoint_states[:, self.late] if late_only else self.checkpoint_states
        return mean_se(x ** p)

    def occupancy_below(self, level):
        """Late-window frequency of ``x_i <= level`` per species, with standard errors."""
        return self._occupancy(lambda x, lv: x <= lv, level)

    def occupancy_above(self, level):
        return self._occupancy(lambda x, lv: x >= lv, level)

    def _occupancy(self, cmp, level):
        level = np.broadcast_to(np.asarray(level, dtype=float), (2,))
        x = self.checkpoint_states[:, self.late]
        hits = cmp(x, level).astype(float)
        hits[np.isnan(x)] = np.nan
        return mean_se(np.nanmean(hits, axis=1))

    def summary(self) -> dict:
        def pair(a):
            m, s = mean_se(a)
            return {"mean": m.tolist(), "se": s.tolist()}

        return {
            "model_hash": self.model_hash, "scheme": self.scheme.value,
            "horizon": self.horizon, "n_steps": self.n_steps, "n_paths": self.n_paths,
            "seed": self.seed, "excluded": list(self.excluded),
            "breaches": int(np.nansum(self.breaches)),
            "terminal": pair(self.terminal), "time_average": pair(self.time_average),
            "log_slope": pair(self.log_slope),
            "checkpoint_times": self.checkpoint_times.tolist(),
        }


def _checkpoint_indices(n_steps, late_fraction, n_checkpoints):
    first_late = math.ceil((1.0 - late_fraction) * n_steps)
    late = np.unique(np.linspace(first_late, n_steps, n_checkpoints).round().astype(int))
    avg = np.array([int(f * n_steps) for f in AVERAGE_FRACTIONS])
    idx = np.unique(np.concatenate([avg, late]))
    return idx, np.isin(idx, late)


def run_ensemble(model: MutualismModel, scheme: Scheme | str = Scheme.LOG_EULER,
                 horizon: float = 200.0, n_steps: int = 200_000, n_paths: int = 1000,
                 seed: int = 0, n_checkpoints: int = 10, late_fraction: float = 0.2,
                 n_workers: int = 1) -> EnsembleStats:
    """Simulate ``n_paths`` independent paths and collect their statistics.

    Path ``k`` uses the noise substreams of ``(seed, k)``; results are reduced
    in path order, so the output does not depend on ``n_workers``.  Paths that
    overflow are excluded (NaN rows); more than 1% exclusions raise
    :class:`EnsembleFailure`.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    scheme = Scheme(scheme)
    base_idx, late = _checkpoint_indices(n_steps, late_fraction, n_checkpoints)
    base_grid = np.linspace(0.0, float(horizon), n_steps + 1)
    cp_times = base_grid[base_idx]

    def one(k):
        path = generate_noise_path(model, horizon, n_steps, seed, k)
        cps = np.searchsorted(path.times, cp_times)
        cps[-1] = len(path.times) - 1  # steady against rounding at T
        try:
            return record_path(model, path, scheme, cps)
        except NumericOverflow as exc:
            log.warning("path %d excluded: %s", k, exc)
            return None

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            records = list(pool.map(one, range(n_paths)))
    else:
        records = [one(k) for k in range(n_paths)]

    excluded = tuple(k for k, r in enumerate(records) if r is None)
    if len(excluded) > MAX_EXCLUDED_FRACTION * n_paths:
        raise EnsembleFailure(f"{len(excluded)} of {n_paths} paths overflowed")
    n_cp = len(cp_times)
    nan_rec = np.full((n_cp, 2), np.nan)
    states = np.stack([r.checkpoint_states if r else nan_rec for r in records])
    integrals = np.stack([r.checkpoint_integrals if r else nan_rec for r in records])
    breaches = np.array([r.breaches if r else np.nan for r in records], dtype=float)
    terminal = states[:, -1, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        cp_avg = integrals / np.where(cp_times > 0, cp_times, np.nan)[None, :, None]
    return EnsembleStats(
        model_hash=model.fingerprint(), scheme=scheme, horizon=float(horizon),
        n_steps=int(n_steps), n_paths=int(n_paths), seed=int(seed),
        checkpoint_times=cp_times, late=late, terminal=terminal,
        time_average=cp_avg[:, -1, :], log_slope=np.log(terminal) / horizon,
        checkpoint_states=states, checkpoint_averages=cp_avg, breaches=breaches,
        excluded=excluded)


# -- verification ------------------------------------------------------------

@dataclass(frozen=True)
class Tolerances:
    n_se: float = 3.0
    epsilon: float = 0.05
    p: float = 1.0
    extinction_level: float = 1e-4
    extinction_fraction: float = 0.99
    nonpersistence_band: float = 0.05


@dataclass(frozen=True)
class Check:
    name: str
    theorem: str
    species: int
    predicted: str
    empirical: float
    threshold: float
    se: float
    passed: bool


@dataclass(frozen=True)
class VerificationVerdict:
    classification: Regime
    checks: tuple[Check, ...]
    note: str = ""

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def informational(self) -> bool:
        return not self.checks

    def to_dict(self) -> dict:
        return {
            "classification": self.classification.value,
            "passed": self.passed,
            "note": self.note,
            "checks": [dict(c.__dict__) for c in self.checks],
        }

    def table(self) -> str:
        if not self.checks:
            return self.note
        rows = [f"{'check':<28} {'sp':>2} {'empirical':>13} {'threshold':>13} {'se':>10}  result"]
        for c in self.checks:
            rows.append(f"{c.name:<28} {c.species + 1:>2} {c.empirical:>13.6g} "
                        f"{c.threshold:>13.6g} {c.se:>10.3g}  {'PASS' if c.passed else 'FAIL'}"
                        f"  [{c.predicted}]")
        if self.note:
            rows.append(self.note)
        return "\n".join(rows)


def verify_regime(model: MutualismModel, report: RegimeReport, stats: EnsembleStats,
                  tolerances: Tolerances = Tolerances()) -> VerificationVerdict:
    """Compare ensemble statistics with the conclusions the report predicts.

    Raises:
        MismatchedInputs: if ``model``, ``report`` and ``stats`` disagree on the model.
    """
    fp = model.fingerprint()
    if report.model_hash != fp or stats.model_hash != fp:
        raise MismatchedInputs(
            f"model {fp}, report {report.model_hash}, statistics {stats.model_hash}")
    z = tolerances.n_se
    cls = report.classification
    checks: list[Check] = []

    if cls is Regime.INDETERMINATE:
        return VerificationVerdict(cls, (), note="no theorem applies at this parameter point")

    if cls is Regime.EXTINCT:
        slope_m, slope_se = mean_se(stats.log_slope)
        for i in SPECIES:
            thr = report.p_bar_star[i] + z * slope_se[i]
            checks.append(Check("log-slope", "extinction", i,
                                "limsup ln x(t)/t <= p̄*", float(slope_m[i]), float(thr),
                                float(slope_se[i]), bool(slope_m[i] <= thr)))
            frac = float(np.nanmean(stats.terminal[:, i] < tolerances.extinction_level))
            checks.append(Check("extinct fraction", "extinction", i,
                                f"x(T) < {tolerances.extinction_level:g}", frac,
                                tolerances.extinction_fraction, 0.0,
                                frac >= tolerances.extinction_fraction))

    if cls is Regime.NONPERSISTENT_MEAN:
        avg_m, avg_se = mean_se(stats.checkpoint_averages)
        half = int(np.argmin(np.abs(stats.checkpoint_times - stats.horizon / 2)))
        for i in SPECIES:
            m_end, se_end = float(avg_m[-1, i]), float(avg_se[-1, i])
            checks.append(Check("time-average band", "nonpersistence in the mean", i,
                                "(1/t) int x -> 0", m_end, tolerances.nonpersistence_band,
                                se_end, m_end <= tolerances.nonpersistence_band))
            thr = float(avg_m[half, i] + z * avg_se[half, i])
            checks.append(Check("time-average declining", "nonpersistence in the mean", i,
                                "average at T <= average at T/2", m_end, thr, se_end,
                                m_end <= thr))

    if cls in (Regime.STRONGLY_PERSISTENT_MEAN, Regime.STOCHASTICALLY_PERMANENT):
        avg_m, avg_se = mean_se(stats.time_average)
        for i in SPECIES:
            thr = report.persistence_floor[i] - z * avg_se[i]
            checks.append(Check("time-average floor", "strong persistence in the mean", i,
                                "liminf (1/t) int x >= p̄_lower / c_sup", float(avg_m[i]),
                                float(thr), float(avg_se[i]), bool(avg_m[i] >= thr)))

    if cls is Regime.STOCHASTICALLY_PERMANENT:
        bounds = permanence_bounds(model, tolerances.epsilon, tolerances.p)
        target = 1.0 - tolerances.epsilon
        below, below_se = stats.occupancy_below(bounds.H)
        above, above_se = stats.occupancy_above(bounds.h)
        for i in SPECIES:
            thr = target - z * below_se[i]
            checks.append(Check("occupancy x <= H", "stochastic permanence", i,
                                f"liminf P(x <= {bounds.H[i]:.6g}) >= {target:g}",
                                float(below[i]), float(thr), float(below_se[i]),
                                bool(below[i] >= thr)))
            thr = target - z * above_se[i]
            checks.append(Check("occupancy x >= h", "stochastic permanence", i,
                                f"liminf P(x >= {bounds.h[i]:.6g}) >= {target:g}",
                                float(above[i]), float(thr), float(above_se[i]),
                                bool(above[i] >= thr)))

    # ultimate boundedness holds whenever the model assumptions do
    mom, mom_se = stats.moment(tolerances.p)
    for i in SPECIES:
        bound = moment_bound(model, i, tolerances.p)
        worst = int(np.argmin(bound + z * mom_se[:, i] - mom[:, i]))
        thr = bound + z * mom_se[worst, i]
        checks.append(Check("moment bound", "ultimate boundedness", i,
                            f"limsup E[x^{tolerances.p:g}] <= K(p) = {bound:.6g}",
                            float(mom[worst, i]), float(thr), float(mom_se[worst, i]),
                            bool(mom[worst, i] <= thr)))
    return VerificationVerdict(cls, tuple(checks))
