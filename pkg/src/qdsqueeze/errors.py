"""Exception hierarchy.

Two families matter to callers: validation problems (bad parameters or
config files, CLI exit code 1) and numerical failures (blow-up, stiffness,
symmetry drift, CLI exit code 2).
"""


class QdsqueezeError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(QdsqueezeError):
    """A parameter or specification violates its invariants."""


class ConfigError(InvalidParameterError):
    """A configuration document could not be parsed or validated."""


class GridMismatchError(InvalidParameterError):
    """Two trajectories do not share a sample grid."""


class UndefinedObservableError(QdsqueezeError):
    """An observable was requested where it is not defined (e.g. g2 at n=0)."""


class NumericalError(QdsqueezeError):
    """Base class for runtime numerical failures."""


class NumericalBlowupError(NumericalError):
    """NaN/Inf appeared during evaluation; ``field`` names the culprit."""

    def __init__(self, field: str, message: str | None = None):
        self.field = field
        super().__init__(message or f"non-finite values in field '{field}'")


class StiffnessError(NumericalError):
    """The adaptive step size underflowed; the problem is too stiff."""


class SymmetryDriftError(NumericalError):
    """Matrix symmetry/Hermiticity or population bounds drifted past tolerance."""


class TruncationError(NumericalError):
    """The oracle Fock cutoff is too small for the requested evolution."""
