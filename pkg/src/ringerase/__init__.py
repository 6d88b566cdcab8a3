"""Ring-cavity storage and squeezing generation protected by homodyne erasing."""

from .analytic import (
    ProtocolConfig,
    Scenario,
    Strategy,
    VariancePair,
    generation_variances,
    min_cycles_to_var_p,
    saturation_limit,
    storage_fidelity,
    storage_variances,
    target_fidelity,
)
from .gaussian import Axis, JointState, MeterSpec, QuadratureState, make_squeezed, make_vacuum
from .trajectory import EnsembleStats, cross_validate, run_ensemble, run_trajectory

__version__ = "0.1.0"

__all__ = [
    "Axis",
    "EnsembleStats",
    "JointState",
    "MeterSpec",
    "ProtocolConfig",
    "QuadratureState",
    "Scenario",
    "Strategy",
    "VariancePair",
    "cross_validate",
    "generation_variances",
    "make_squeezed",
    "make_vacuum",
    "min_cycles_to_var_p",
    "run_ensemble",
    "run_trajectory",
    "saturation_limit",
    "storage_fidelity",
    "storage_variances",
    "target_fidelity",
]
