"""Command-line entry point: ``mutualism <command> scenario.json``.

Commands are ``validate``, ``classify``, ``simulate``, ``ensemble`` and
``verify``.  Exit codes: 0 success, 1 unreadable or ill-formed input (or a
numerical failure), 2 model assumptions violated, 3 verification failed.

A scenario file is a JSON object with a strict schema::

    {
      "model":  <raw model form, see mutualism.model.model_to_raw>,
      "run":    {"scheme", "horizon", "n_steps", "n_paths", "seed"},
      "verify": {"epsilon", "p", "tolerances": {"n_se", "extinction_level",
                 "extinction_fraction", "nonpersistence_band"}},
      "output": {"directory", "formats"}
    }

Only ``model`` is required.  Unknown keys anywhere are an error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .analysis import Regime, classify_regime, moment_bound, permanence_bounds
from .model import (SPECIES, ModelValidationError, MutualismModel, Violation, model_from_raw,
                    model_to_raw, validate_model)
from .montecarlo import EnsembleFailure, Tolerances, run_ensemble, verify_regime
from .noise import generate_noise_path
from .simulator import NumericOverflow, Scheme, simulate

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_INVALID_MODEL = 2
EXIT_VERIFY_FAILED = 3

FORMATS = ("csv", "json")


class ScenarioError(ValueError):
    """The scenario file cannot be read or does not follow the schema."""


@dataclass(frozen=True)
class RunConfig:
    scheme: str = Scheme.LOG_EULER.value
    horizon: float = 200.0
    n_steps: int = 20_000
    n_paths: int = 1000
    seed: int = 0


@dataclass(frozen=True)
class TolerancesConfig:
    n_se: float = 3.0
    extinction_level: float = 1e-4
    extinction_fraction: float = 0.99
    nonpersistence_band: float = 0.05


@dataclass(frozen=True)
class VerifyConfig:
    epsilon: float = 0.05
    p: float = 1.0
    tolerances: TolerancesConfig = field(default_factory=TolerancesConfig)

    def to_tolerances(self) -> Tolerances:
        return Tolerances(epsilon=self.epsilon, p=self.p, **asdict(self.tolerances))


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    formats: tuple[str, ...] = FORMATS


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario.  ``model`` is parsed but not yet validated."""

    model: MutualismModel
    run: RunConfig = RunConfig()
    verify: VerifyConfig = VerifyConfig()
    output: OutputConfig = OutputConfig()


# -- parsing -----------------------------------------------------------------

def _number(value, where, integer=False, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{where}: expected a number, got {value!r}")
    if integer:
        if isinstance(value, float) and not value.is_integer():
            raise ScenarioError(f"{where}: expected an integer, got {value!r}")
        value = int(value)
    elif not math.isfinite(value):
        raise ScenarioError(f"{where}: must be finite")
    if positive and not value > 0:
        raise ScenarioError(f"{where}: must be positive, got {value!r}")
    return value


def _section(raw, cls, where, converters):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ScenarioError(f"{where}: expected an object")
    unknown = set(raw) - set(converters)
    if unknown:
        raise ScenarioError(f"{where}: unknown keys {sorted(unknown)}")
    return cls(**{k: converters[k](v, f"{where}.{k}") for k, v in raw.items()})


def _scheme(value, where):
    try:
        return Scheme(value).value
    except ValueError:
        raise ScenarioError(f"{where}: unknown scheme {value!r}; "
                            f"use one of {[s.value for s in Scheme]}") from None


def _formats(value, where):
    if not isinstance(value, list) or not all(v in FORMATS for v in value):
        raise ScenarioError(f"{where}: expected a list drawn from {list(FORMATS)}")
    return tuple(value)


def _string(value, where):
    if not isinstance(value, str) or not value:
        raise ScenarioError(f"{where}: expected a non-empty string")
    return value


def _num(**kw):
    return lambda v, w: _number(v, w, **kw)


def _tolerances(raw, where):
    return _section(raw, TolerancesConfig, where, {
        "n_se": _num(positive=True), "extinction_level": _num(positive=True),
        "extinction_fraction": _num(positive=True), "nonpersistence_band": _num(positive=True)})


def _fraction(value, where):
    value = _number(value, where, positive=True)
    if not value < 1:
        raise ScenarioError(f"{where}: must lie in (0, 1)")
    return value


def scenario_from_raw(raw) -> Scenario:
    """Parse a scenario object.

    Raises:
        ScenarioError: on schema errors.
        ModelValidationError: if the model part cannot be parsed.
    """
    if not isinstance(raw, dict):
        raise ScenarioError("scenario: expected an object")
    unknown = set(raw) - {"model", "run", "verify", "output"}
    if unknown:
        raise ScenarioError(f"scenario: unknown keys {sorted(unknown)}")
    if "model" not in raw:
        raise ScenarioError("scenario: missing 'model'")
    model = model_from_raw(raw["model"])
    run = _section(raw.get("run"), RunConfig, "run", {
        "scheme": _scheme, "horizon": _num(positive=True),
        "n_steps": _num(integer=True, positive=True),
        "n_paths": _num(integer=True, positive=True), "seed": _num(integer=True)})
    if run.seed < 0:
        raise ScenarioError("run.seed: must be >= 0")
    verify = _section(raw.get("verify"), VerifyConfig, "verify", {
        "epsilon": _fraction, "p": _num(positive=True), "tolerances": _tolerances})
    output = _section(raw.get("output"), OutputConfig, "output",
                      {"directory": _string, "formats": _formats})
    return Scenario(model, run, verify, output)


def scenario_to_raw(scenario: Scenario) -> dict:
    """Full raw form, with every default written out."""
    return {
        "model": model_to_raw(scenario.model),
        "run": asdict(scenario.run),
        "verify": asdict(scenario.verify),
        "output": {"directory": scenario.output.directory,
                   "formats": list(scenario.output.formats)},
    }


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path} is not valid JSON: {exc}") from None
    return scenario_from_raw(raw)


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_raw(scenario), indent=2) + "\n",
                          encoding="utf-8")


def apply_overrides(scenario: Scenario, output_dir=None, seed=None, paths=None,
                    horizon=None) -> Scenario:
    """Command-line overrides.  A new horizon keeps the step size of the file."""
    run = scenario.run
    if seed is not None:
        run = replace(run, seed=int(seed))
    if paths is not None:
        run = replace(run, n_paths=int(paths))
    if horizon is not None:
        dt = run.horizon / run.n_steps
        run = replace(run, horizon=float(horizon), n_steps=max(1, round(horizon / dt)))
    out = scenario.output if output_dir is None else replace(scenario.output,
                                                             directory=str(output_dir))
    return replace(scenario, run=run, output=out)


# -- output helpers ----------------------------------------------------------

def _fmt(x) -> str:
    return "%.17g" % x


def _short(x) -> str:
    # shortest text that round-trips, for console output
    return repr(float(x))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(directory: Path, name: str, payload: dict) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    target = directory / name
    target.write_text(json.dumps(payload, indent=2, default=_json_default, ensure_ascii=False)
                      + "\n", encoding="utf-8")
    return target


def trajectory_csv(traj) -> str:
    """CSV text of one path: ``t,x1,x2,event`` with the post-jump state on event rows."""
    labels: dict[int, list[str]] = {}
    for ev, step in zip(traj.events, traj.event_steps):
        labels.setdefault(int(step), []).append(f"nu{ev.measure_id}:{ev.atom_index}")
    lines = ["t,x1,x2,event"]
    for j, (t, (x1, x2)) in enumerate(zip(traj.times, traj.states)):
        lines.append(f"{_fmt(t)},{_fmt(x1)},{_fmt(x2)},{';'.join(labels.get(j, ()))}")
    return "\n".join(lines) + "\n"


def _report_lines(report, scenario: Scenario, model) -> list[str]:
    def pair(v):
        return "n/a" if v is None else "(" + ", ".join(_short(x) for x in v) + ")"

    lines = [report.summary(),
             f"  p̄*         = {pair(report.p_bar_star)}",
             f"  p̄_lower    = {pair(report.p_bar_lower)}",
             f"  c_sup       = {pair(report.c_sup)}",
             f"  margin      = {_short(report.permanence_margin)}",
             f"  theta       = {'n/a' if report.theta is None else _short(report.theta)}",
             f"  K0(theta)   = {'n/a' if report.k0 is None else _short(report.k0)}",
             f"  floor       = {pair(report.persistence_floor)}"]
    p = scenario.verify.p
    lines.append(f"  K(p={p:g})      = {pair([moment_bound(model, i, p) for i in SPECIES])}")
    return lines


def _bounds_dict(model, scenario: Scenario):
    b = permanence_bounds(model, scenario.verify.epsilon, scenario.verify.p)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(b).items()}


# -- commands ----------------------------------------------------------------

def _prepare(path, overrides, err):
    """Load and validate; returns ``(scenario, model, None)`` or ``(None, None, exit_code)``."""
    try:
        scenario = apply_overrides(load_scenario(path), **overrides)
    except ScenarioError as exc:
        print(f"error: {exc}", file=err)
        return None, None, EXIT_BAD_INPUT
    except ModelValidationError as exc:
        return None, None, _report_violations(exc.violations, err)
    try:
        model = validate_model(scenario.model)
    except ModelValidationError as exc:
        return None, None, _report_violations(exc.violations, err)
    return scenario, model, None


def _report_violations(violations: list[Violation], err) -> int:
    malformed = all(v.code in ("Malformed", "InvalidTimeFunction") for v in violations)
    print("invalid model:" if not malformed else "ill-formed model:", file=err)
    for v in violations:
        print(f"  {v}", file=err)
    return EXIT_BAD_INPUT if malformed else EXIT_INVALID_MODEL


def cmd_validate(path, out=None, err=None, **overrides) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    scenario, model, code = _prepare(path, overrides, err)
    if code is not None:
        return code
    print(f"valid: model {model.fingerprint()}", file=out)
    return EXIT_OK


def cmd_classify(path, out=None, err=None, **overrides) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    scenario, model, code = _prepare(path, overrides, err)
    if code is not None:
        return code
    report = classify_regime(model)
    for line in _report_lines(report, scenario, model):
        print(line, file=out)
    payload = {"report": report.to_dict(),
               "moment_bound": {"p": scenario.verify.p,
                                "K": [moment_bound(model, i, scenario.verify.p)
                                      for i in SPECIES]}}
    if report.classification is Regime.STOCHASTICALLY_PERMANENT:
        payload["permanence_bounds"] = _bounds_dict(model, scenario)
        b = payload["permanence_bounds"]
        print(f"  (h, H)      = ({', '.join(map(_short, b['h']))}; "
              f"{', '.join(map(_short, b['H']))}) at epsilon = {scenario.verify.epsilon:g}",
              file=out)
    if "json" in scenario.output.formats:
        _write_json(Path(scenario.output.directory), "classify.json", payload)
    return EXIT_OK


def cmd_simulate(path, out=None, err=None, workers: int = 1, **overrides) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    scenario, model, code = _prepare(path, overrides, err)
    if code is not None:
        return code
    run = scenario.run
    directory = Path(scenario.output.directory)

    def one(k):
        noise = generate_noise_path(model, run.horizon, run.n_steps, run.seed, k)
        try:
            return simulate(model, noise, run.scheme)
        except NumericOverflow as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(one, range(run.n_paths)))
    else:
        trajs = [one(k) for k in range(run.n_paths)]
    for k, traj in enumerate(trajs):
        if isinstance(traj, NumericOverflow):
            print(f"error: numeric overflow on path {k}: {traj}", file=err)
            return EXIT_BAD_INPUT
    directory.mkdir(parents=True, exist_ok=True)
    width = max(4, len(str(run.n_paths - 1)))
    summary = []
    for k, traj in enumerate(trajs):
        name = f"path_{k:0{width}d}.csv"
        if "csv" in scenario.output.formats:
            (directory / name).write_text(trajectory_csv(traj), encoding="utf-8")
        summary.append({"path": k, "file": name, "final": traj.final.tolist(),
                        "events": len(traj.events), "breaches": traj.breaches})
        print(f"path {k}: x(T) = ({_short(traj.final[0])}, {_short(traj.final[1])}), "
              f"{len(traj.events)} events", file=out)
    if "json" in scenario.output.formats:
        _write_json(directory, "simulate.json", {
            "model_hash": model.fingerprint(), "run": asdict(run), "paths": summary})
    return EXIT_OK


def _ensemble(scenario, model, workers, err):
    run = scenario.run
    try:
        return run_ensemble(model, run.scheme, run.horizon, run.n_steps, run.n_paths,
                            run.seed, n_workers=workers)
    except EnsembleFailure as exc:
        print(f"error: {exc}", file=err)
        return None


def cmd_ensemble(path, out=None, err=None, workers: int = 1, **overrides) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    scenario, model, code = _prepare(path, overrides, err)
    if code is not None:
        return code
    stats = _ensemble(scenario, model, workers, err)
    if stats is None:
        return EXIT_BAD_INPUT
    summary = stats.summary()
    for key in ("terminal", "time_average", "log_slope"):
        m, s = summary[key]["mean"], summary[key]["se"]
        print(f"{key:<13} mean = ({_short(m[0])}, {_short(m[1])})  "
              f"se = ({_short(s[0])}, {_short(s[1])})", file=out)
    print(f"excluded paths: {len(stats.excluded)}, breaches: {summary['breaches']}", file=out)
    if "json" in scenario.output.formats:
        _write_json(Path(scenario.output.directory), "ensemble.json", summary)
    return EXIT_OK


def cmd_verify(path, out=None, err=None, workers: int = 1, **overrides) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    scenario, model, code = _prepare(path, overrides, err)
    if code is not None:
        return code
    report = classify_regime(model)
    print(report.summary(), file=out)
    stats = _ensemble(scenario, model, workers, err)
    if stats is None:
        return EXIT_BAD_INPUT
    verdict = verify_regime(model, report, stats, scenario.verify.to_tolerances())
    print(verdict.table(), file=out)
    print("verdict: " + ("informational" if verdict.informational
                         else "PASS" if verdict.passed else "FAIL"), file=out)
    if "json" in scenario.output.formats:
        _write_json(Path(scenario.output.directory), "verify.json", {
            "report": report.to_dict(), "verdict": verdict.to_dict(),
            "ensemble": stats.summary()})
    return EXIT_OK if verdict.passed else EXIT_VERIFY_FAILED


COMMANDS = {"validate": cmd_validate, "classify": cmd_classify, "simulate": cmd_simulate,
            "ensemble": cmd_ensemble, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mutualism", description="Stochastic mutualism models: classify, simulate, verify.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("scenario", help="scenario JSON file")
    parser.add_argument("--output-dir", help="directory for CSV and JSON output")
    parser.add_argument("--seed", type=int, help="override run.seed")
    parser.add_argument("--paths", type=int, help="override run.n_paths")
    parser.add_argument("--horizon", type=float, help="override run.horizon (step size kept)")
    parser.add_argument("--workers", type=int, default=1,
                        help="threads for path simulation (results do not depend on it)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.paths is not None and args.paths < 1:
        print("error: --paths must be >= 1", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.horizon is not None and not args.horizon > 0:
        print("error: --horizon must be positive", file=sys.stderr)
        return EXIT_BAD_INPUT
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be >= 0", file=sys.stderr)
        return EXIT_BAD_INPUT
    overrides = {"output_dir": args.output_dir, "seed": args.seed, "paths": args.paths,
                 "horizon": args.horizon}
    cmd = COMMANDS[args.command]
    if args.command in ("simulate", "ensemble", "verify"):
        return cmd(args.scenario, workers=max(1, args.workers), **overrides)
    return cmd(args.scenario, **overrides)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
