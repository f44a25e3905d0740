"""Squeezed-light generation in microcavity-coupled quantum-dot ensembles.

Core workflow: build :class:`ModelParams`/:class:`EnsembleSpec`, discretize
the ensemble, evolve the correlation hierarchy to steady state, and read off
quadrature variances, photon statistics and the squeeze factor.  The
``sweeps`` module drives the parameter studies; ``oracle`` provides the
exact master-equation reference for small systems; ``cli`` is the command
line surface.
"""

from .ensemble import Ensemble, build_ensemble
from .errors import (
    ConfigError,
    InvalidParameterError,
    NumericalBlowupError,
    NumericalError,
    QdsqueezeError,
    StiffnessError,
    SymmetryDriftError,
    TruncationError,
    UndefinedObservableError,
)
from .dynamics import coupling_constant, rhs
from .integrator import (
    Trajectory,
    evolve_to_steady,
    integrate_transient,
    step,
)
from .observables import (
    Observables,
    compute_observables,
    g2_zero,
    injection_amplitude,
    output_power,
    photon_stats,
    quadrature_variances,
    squeeze_factor,
)
from .params import EnsembleSpec, IntegrationConfig, ModelParams
from .state import SystemState, enforce_symmetries, vacuum_state

__version__ = "0.1.0"

__all__ = [
    "Ensemble",
    "EnsembleSpec",
    "IntegrationConfig",
    "ModelParams",
    "Observables",
    "SystemState",
    "Trajectory",
    "build_ensemble",
    "compute_observables",
    "coupling_constant",
    "enforce_symmetries",
    "evolve_to_steady",
    "g2_zero",
    "injection_amplitude",
    "integrate_transient",
    "output_power",
    "photon_stats",
    "quadrature_variances",
    "rhs",
    "squeeze_factor",
    "step",
    "vacuum_state",
    "ConfigError",
    "InvalidParameterError",
    "NumericalBlowupError",
    "NumericalError",
    "QdsqueezeError",
    "StiffnessError",
    "SymmetryDriftError",
    "TruncationError",
    "UndefinedObservableError",
    "__version__",
]
