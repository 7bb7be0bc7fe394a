"""Invariant, mixing, fully supported measures for chaotic C0-semigroups.

Random spike functions are pushed through a semigroup-equivariant factor
map; the resulting measure is checked statistically.
"""

from .banach import StateVector, distance, linear_combine, norm, quad_integral
from .modelspace import MeasureParams, ModelFunction, default_measure_params, sample_model, shift_model
from .pushforward import TruncationPlan, calibrate_truncation, equivariance_residual, phi, sample_invariant
from .reports import ExperimentReport
from .semigroups import FHCSystem, INSTANCES, make_instance

__version__ = "0.1.0"

__all__ = [
    "StateVector", "distance", "linear_combine", "norm", "quad_integral",
    "MeasureParams", "ModelFunction", "default_measure_params", "sample_model", "shift_model",
    "TruncationPlan", "calibrate_truncation", "equivariance_residual", "phi", "sample_invariant",
    "ExperimentReport", "FHCSystem", "INSTANCES", "make_instance",
]
