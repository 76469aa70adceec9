"""Parameter space of the two-species mutualism model with Poisson jumps.

Each species ``i`` (0 or 1 here) follows

    dx_i = x_i [ (a_i1 + a_i2 x_j) / (1 + x_j) - c_i x_i ] dt + sigma_i x_i dw_i
           + int gamma_i(t, z) x_i nu1~(dt, dz) + int delta_i(t, z) x_i nu2(dt, dz)

with ``j = 1 - i``, ``nu1~`` the compensated and ``nu2`` the raw Poisson
random measure.  Jump measures are finite sums of weighted atoms, so every
integral against them is a finite sum.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .functions import (Constant, Derived, TimeFunction, combine, function_from_raw,
                        function_to_raw, inspection_times)

SPECIES = (0, 1)
# grid density of the redundant positivity guard in validation
VALIDATION_NODES = 10_000


@dataclass(frozen=True)
class Violation:
    code: str
    where: str
    message: str

    def __str__(self):
        return f"{self.code} at {self.where}: {self.message}"


class ModelValidationError(ValueError):
    """Raised by :func:`validate_model`; carries every violated invariant."""

    def __init__(self, violations: Sequence[Violation]):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))

    @property
    def codes(self) -> set[str]:
        return {v.code for v in self.violations}


def _merge_atoms(marks, weights):
    """Merge duplicate marks; returns (marks, weights, groups of original indices)."""
    order: dict[float, int] = {}
    merged_w: list[float] = []
    groups: list[list[int]] = []
    for k, (z, w) in enumerate(zip(marks, weights)):
        z = float(z)
        if z in order:
            j = order[z]
            merged_w[j] += float(w)
            groups[j].append(k)
        else:
            order[z] = len(merged_w)
            merged_w.append(float(w))
            groups.append([k])
    return tuple(order), tuple(merged_w), groups


@dataclass(frozen=True)
class JumpMeasure:
    """Finite atomic measure ``sum_k w_k * delta_{z_k}`` on the real line."""

    marks: tuple[float, ...] = ()
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if len(self.marks) != len(self.weights):
            raise ValueError("marks and weights must have equal length")
        if any(not float(w) > 0.0 for w in self.weights):
            raise ValueError(f"atom weights must be strictly positive: {self.weights}")
        marks, weights, _ = _merge_atoms(self.marks, self.weights)
        object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_atoms(cls, atoms: Sequence[tuple[float, float]]) -> "JumpMeasure":
        return cls(tuple(z for z, _ in atoms), tuple(w for _, w in atoms))

    @property
    def total_mass(self) -> float:
        return float(sum(self.weights))

    def __len__(self):
        return len(self.marks)

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


NO_JUMPS = JumpMeasure()


@dataclass(frozen=True)
class SpeciesCoefficients:
    """Coefficients of one species.  ``gamma``/``delta`` hold one time function
    per atom of the first/second jump measure, in atom order."""

    a1: TimeFunction
    a2: TimeFunction
    c: TimeFunction
    sigma: TimeFunction
    gamma: tuple[TimeFunction, ...] = ()
    delta: tuple[TimeFunction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(self.gamma))
        object.__setattr__(self, "delta", tuple(self.delta))

    @property
    def functions(self) -> tuple[TimeFunction, ...]:
        return (self.a1, self.a2, self.c, self.sigma, *self.gamma, *self.delta)


@dataclass(frozen=True)
class MutualismModel:
    species: tuple[SpeciesCoefficients, SpeciesCoefficients]
    pi1: JumpMeasure = NO_JUMPS
    pi2: JumpMeasure = NO_JUMPS
    x0: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))

    @property
    def c_min(self) -> float:
        return min(s.c.inf for s in self.species)

    def c_sup(self, i: int) -> float:
        return self.species[i].c.sup

    @property
    def has_jumps(self) -> bool:
        return len(self.pi1) > 0 or len(self.pi2) > 0

    def relabeled(self) -> "MutualismModel":
        """The same system with species 1 and 2 exchanged."""
        return MutualismModel(self.species[::-1], self.pi1, self.pi2, self.x0[::-1])

    def to_raw(self) -> dict:
        return model_to_raw(self)

    def fingerprint(self) -> str:
        """Stable hash of the canonical raw form."""
        blob = json.dumps(model_to_raw(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def constant_model(a1=0.5, a2=None, c=0.5, sigma=0.0, x0=(1.0, 1.0),
                   pi1=NO_JUMPS, pi2=NO_JUMPS, gamma=(), delta=()) -> MutualismModel:
    """Symmetric model with constant coefficients; convenient for experiments.

    ``gamma``/``delta`` give one constant per atom, shared by both species.
    """
    a2 = a1 if a2 is None else a2
    sp = SpeciesCoefficients(Constant(a1), Constant(a2), Constant(c), Constant(sigma),
                             tuple(Constant(g) for g in gamma), tuple(Constant(d) for d in delta))
    return MutualismModel((sp, sp), pi1, pi2, x0)


# -- validation --------------------------------------------------------------

def _grid_inf(f: TimeFunction) -> float:
    ts = inspection_times(f.components, VALIDATION_NODES)
    return min(float(np.min(f(ts))), f.inf)


def _check_model(model: MutualismModel) -> list[Violation]:
    out: list[Violation] = []
    for i, sp in enumerate(model.species):
        tag = f"species[{i}]"
        for name in ("a1", "a2"):
            lo = _grid_inf(getattr(sp, name))
            if not lo > 0.0:
                out.append(Violation("NonPositiveCoefficient", f"{tag}.{name}",
                                     f"infimum {lo:g} is not > 0"))
        lo = _grid_inf(sp.c)
        if not lo > 0.0:
            out.append(Violation("NonPositiveCMin", f"{tag}.c", f"infimum {lo:g} is not > 0"))
        lo = _grid_inf(sp.sigma)
        if lo < 0.0:
            out.append(Violation("NegativeSigma", f"{tag}.sigma", f"infimum {lo:g} is < 0"))
        for name, measure in (("gamma", model.pi1), ("delta", model.pi2)):
            transform = getattr(sp, name)
            if len(transform) != len(measure):
                out.append(Violation("MisalignedTransform", f"{tag}.{name}",
                                     f"{len(transform)} functions for {len(measure)} atoms"))
                continue
            for k, f in enumerate(transform):
                lo = _grid_inf(f)
                if not lo > -1.0:
                    out.append(Violation("JumpBelowMinusOne", f"{tag}.{name}[{k}]",
                                         f"1 + {name} reaches {1.0 + lo:g} <= 0"))
    for i, x in enumerate(model.x0):
        if not x > 0.0:
            out.append(Violation("NonPositiveInitial", f"x0[{i}]", f"{x:g} is not > 0"))
    return out


def validate_model(candidate) -> MutualismModel:
    """Check the model assumptions and return a validated model.

    ``candidate`` is either a :class:`MutualismModel` or its raw dict form (see
    :func:`model_from_raw`).  Raises :class:`ModelValidationError` listing every
    violation found.
    """
    if isinstance(candidate, MutualismModel):
        model = candidate
    else:
        model, problems = _parse_raw(candidate)
        if problems:
            raise ModelValidationError(problems)
    problems = _check_model(model)
    if problems:
        raise ModelValidationError(problems)
    return model


# -- raw form ----------------------------------------------------------------

_MODEL_KEYS = {"species", "pi1", "pi2", "x0"}
_SPECIES_KEYS = {"a1", "a2", "c", "sigma", "gamma", "delta"}


def _parse_measure(raw, where, problems):
    if raw is None:
        return (), ()
    if not isinstance(raw, list):
        problems.append(Violation("Malformed", where, "expected a list of atoms"))
        return (), ()
    marks, weights = [], []
    for k, atom in enumerate(raw):
        if not isinstance(atom, dict) or set(atom) != {"mark", "weight"}:
            problems.append(Violation("Malformed", f"{where}[{k}]",
                                      "atom must be {\"mark\": z, \"weight\": w}"))
            continue
        try:
            z, w = float(atom["mark"]), float(atom["weight"])
        except (TypeError, ValueError):
            problems.append(Violation("Malformed", f"{where}[{k}]", "mark and weight must be numbers"))
            continue
        if not w > 0.0:
            problems.append(Violation("NonPositiveWeight", f"{where}[{k}]", f"weight {w:g}"))
        marks.append(z)
        weights.append(w)
    return marks, weights


def _parse_function(raw, where, problems):
    try:
        return function_from_raw(raw)
    except (ValueError, TypeError) as exc:
        problems.append(Violation("InvalidTimeFunction", where, str(exc)))
        return None


def _parse_raw(raw):
    problems: list[Violation] = []
    if not isinstance(raw, dict):
        return None, [Violation("Malformed", "model", "expected an object")]
    unknown = set(raw) - _MODEL_KEYS
    if unknown:
        problems.append(Violation("Malformed", "model", f"unknown keys {sorted(unknown)}"))
    if "species" not in raw or not isinstance(raw["species"], list) or len(raw["species"]) != 2:
        return None, problems + [Violation("Malformed", "model.species",
                                           "expected a list of two species")]
    m1, w1 = _parse_measure(raw.get("pi1"), "pi1", problems)
    m2, w2 = _parse_measure(raw.get("pi2"), "pi2", problems)
    species = []
    for i, rs in enumerate(raw["species"]):
        tag = f"species[{i}]"
        if not isinstance(rs, dict):
            problems.append(Violation("Malformed", tag, "expected an object"))
            continue
        missing = {"a1", "a2", "c", "sigma"} - set(rs)
        unknown = set(rs) - _SPECIES_KEYS
        if missing or unknown:
            problems.append(Violation("Malformed", tag,
                                      f"missing {sorted(missing)}, unknown {sorted(unknown)}"))
            continue
        fns = {k: _parse_function(rs[k], f"{tag}.{k}", problems) for k in ("a1", "a2", "c", "sigma")}
        jumps = {}
        for name, marks in (("gamma", m1), ("delta", m2)):
            lst = rs.get(name, [])
            if not isinstance(lst, list):
                problems.append(Violation("Malformed", f"{tag}.{name}", "expected a list"))
                lst = []
            if len(lst) != len(marks):
                problems.append(Violation("MisalignedTransform", f"{tag}.{name}",
                                          f"{len(lst)} functions for {len(marks)} atoms"))
            jumps[name] = [_parse_function(f, f"{tag}.{name}[{k}]", problems)
                           for k, f in enumerate(lst)]
        species.append((fns, jumps))
    x0 = raw.get("x0")
    if (not isinstance(x0, list) or len(x0) != 2
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in x0)):
        problems.append(Violation("Malformed", "x0", "expected two initial values"))
    if problems:
        return None, problems

    # merge duplicate atoms; the per-atom functions must agree across duplicates
    merged = {}
    for key, marks, weights, name in (("pi1", m1, w1, "gamma"), ("pi2", m2, w2, "delta")):
        mk, wt, groups = _merge_atoms(marks, weights)
        merged[key] = JumpMeasure(mk, wt)
        for i, (_, jumps) in enumerate(species):
            fns = jumps[name]
            for g in groups:
                if any(fns[k] != fns[g[0]] for k in g):
                    problems.append(Violation("InconsistentDuplicateAtom", f"species[{i}].{name}",
                                              f"atoms {g} share a mark but differ"))
            jumps[name] = [fns[g[0]] for g in groups]
    if problems:
        return None, problems
    sps = tuple(SpeciesCoefficients(f["a1"], f["a2"], f["c"], f["sigma"],
                                    tuple(j["gamma"]), tuple(j["delta"])) for f, j in species)
    return MutualismModel(sps, merged["pi1"], merged["pi2"], (float(x0[0]), float(x0[1]))), []


def model_from_raw(raw) -> MutualismModel:
    """Parse the raw dict form without checking the model assumptions."""
    model, problems = _parse_raw(raw)
    if problems:
        raise ModelValidationError(problems)
    return model


def model_to_raw(model: MutualismModel) -> dict:
    def measure(m):
        return [{"mark": z, "weight": w} for z, w in zip(m.marks, m.weights)]

    return {
        "species": [
            {"a1": function_to_raw(s.a1), "a2": function_to_raw(s.a2),
             "c": function_to_raw(s.c), "sigma": function_to_raw(s.sigma),
             "gamma": [function_to_raw(f) for f in s.gamma],
             "delta": [function_to_raw(f) for f in s.delta]}
            for s in model.species
        ],
        "pi1": measure(model.pi1),
        "pi2": measure(model.pi2),
        "x0": list(model.x0),
    }


# -- deterministic parts of the dynamics -------------------------------------

def drift_bracket(model: MutualismModel, i: int, t, x_self, x_other):
    """Per-capita drift ``(a_i1 + a_i2 x_j)/(1 + x_j) - c_i x_i`` at time ``t``."""
    sp = model.species[i]
    x_other = np.asarray(x_other, dtype=float)
    a1, a2 = sp.a1(t), sp.a2(t)
    # a2 + (a1 - a2)/(1 + x) is the same rational term, stable as x -> inf
    ratio = a2 + (a1 - a2) / (1.0 + x_other)
    return ratio - sp.c(t) * x_self


def _jump_sum(weights, fns, t, term):
    total = 0.0
    for w, f in zip(weights, fns):
        total = total + w * term(np.asarray(f(t), dtype=float))
    return total


def beta(model: MutualismModel, i: int, t):
    """Noise penalty ``sigma^2/2 + sum w1 [g - ln(1+g)] - sum w2 ln(1+d)``."""
    sp = model.species[i]
    sig = np.asarray(sp.sigma(t), dtype=float)
    out = 0.5 * sig * sig
    out = out + _jump_sum(model.pi1.weights, sp.gamma, t, lambda g: g - np.log1p(g))
    out = out - _jump_sum(model.pi2.weights, sp.delta, t, np.log1p)
    return float(out) if np.ndim(out) == 0 else out


def compensator(model: MutualismModel, i: int, t):
    """Drift correction ``sum_k w1_k gamma_i(t, z_k)`` of the centred measure."""
    sp = model.species[i]
    out = _jump_sum(model.pi1.weights, sp.gamma, t, lambda g: g)
    return float(out) if np.ndim(out) == 0 else out + np.zeros(np.shape(t))


def p_extremes(model: MutualismModel, i: int, t):
    """``(min_j a_ij(t) - beta_i(t), max_j a_ij(t) - beta_i(t))``."""
    sp = model.species[i]
    a1, a2 = np.asarray(sp.a1(t)), np.asarray(sp.a2(t))
    b = beta(model, i, t)
    lo, hi = np.minimum(a1, a2) - b, np.maximum(a1, a2) - b
    if np.ndim(lo) == 0:
        return float(lo), float(hi)
    return lo, hi


# expression forms, for averaging and bounding over t >= 0

def beta_function(model: MutualismModel, i: int) -> Derived:
    sp = model.species[i]
    return Derived(lambda t: beta(model, i, t) + np.zeros(np.shape(t)), sp.functions)


def p_max_function(model: MutualismModel, i: int) -> Derived:
    sp = model.species[i]
    return combine(np.maximum, sp.a1, sp.a2) - beta_function(model, i)


def p_min_function(model: MutualismModel, i: int) -> Derived:
    sp = model.species[i]
    return combine(np.minimum, sp.a1, sp.a2) - beta_function(model, i)
