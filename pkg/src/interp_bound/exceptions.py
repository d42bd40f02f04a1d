"""Exception hierarchy.

The CLI maps each family to an exit code, see :mod:`interp_bound.cli`.
"""


class InterpBoundError(Exception):
    """Base class for all package errors."""


class DimensionError(InterpBoundError, ValueError):
    pass


class SymmetryError(InterpBoundError, ValueError):
    pass


class ConditioningError(InterpBoundError, ValueError):
    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class DegenerateSpectrumError(InterpBoundError, ValueError):
    pass


class AssumptionViolation(InterpBoundError):
    """A runtime-checkable modelling assumption (A)-(G) failed.

    ``letter`` identifies the assumption; the message carries the numbers
    that triggered the failure.
    """

    def __init__(self, letter, message):
        self.letter = letter
        super().__init__(f"assumption ({letter}) violated: {message}")


class DegenerateDeltaRError(InterpBoundError, ValueError):
    """R(theta*) - R(theta_0) is numerically zero, so log(delta_R) diverges."""


class NotAConstrainedMinimizerError(InterpBoundError, ValueError):
    pass


class SolverError(InterpBoundError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class QuadratureError(InterpBoundError, ValueError):
    pass


class ConfigError(InterpBoundError, ValueError):
    pass


class InvariantFailure(InterpBoundError):
    pass
