"""Two-species stochastic mutualism with Lévy jumps: regime analysis and simulation."""

from .analysis import (PermanenceBounds, Regime, RegimeReport, classify_regime, find_theta,
                       k0, moment_bound, permanence_bounds, permanence_margin)
from .functions import Constant, Periodic, PiecewiseConstant, long_run_average
from .model import (JumpMeasure, ModelValidationError, MutualismModel, SpeciesCoefficients,
                    Violation, beta, constant_model, model_from_raw, model_to_raw,
                    validate_model)
from .montecarlo import (EnsembleStats, Tolerances, VerificationVerdict, run_ensemble,
                         verify_regime)
from .noise import NoisePath, coarsen, generate_noise_path
from .simulator import (NumericOverflow, Scheme, Trajectory, simulate, simulate_direct_euler,
                        simulate_log_euler)

__all__ = [
    "Constant", "EnsembleStats", "JumpMeasure", "ModelValidationError", "MutualismModel",
    "NoisePath", "NumericOverflow", "PermanenceBounds", "Periodic", "PiecewiseConstant",
    "Regime", "RegimeReport", "Scheme", "SpeciesCoefficients", "Tolerances", "Trajectory",
    "VerificationVerdict", "Violation", "beta", "classify_regime", "coarsen", "constant_model",
    "find_theta", "generate_noise_path", "k0", "long_run_average", "model_from_raw",
    "model_to_raw", "moment_bound", "permanence_bounds", "permanence_margin", "run_ensemble",
    "simulate", "simulate_direct_euler", "simulate_log_euler", "validate_model",
    "verify_regime",
]
