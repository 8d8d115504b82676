"""Critical points of spherical mixed p-spin models with an external field."""

from .errors import DomainError, RegimeError, ResourceError, ToleranceError
from .model import (MaximizerReport, MixedModel, Regime, SystemCoefficients,
                    TrivialPredictions, annealed_rate, big_f, classify,
                    classify_and_maximize, hessian_f_at_max, phi,
                    solve_system_numeric, threshold_hc, tilde_f,
                    trivial_predictions)
from .scaled import ScaledValue

__all__ = [
    "DomainError", "RegimeError", "ResourceError", "ToleranceError",
    "MaximizerReport", "MixedModel", "Regime", "SystemCoefficients",
    "TrivialPredictions", "annealed_rate", "big_f", "classify",
    "classify_and_maximize", "hessian_f_at_max", "phi", "solve_system_numeric",
    "threshold_hc", "tilde_f", "trivial_predictions", "ScaledValue",
]
