"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
numerical or validity failures exit 2, anything unexpected exits 3.
"""


class BeamwanderError(Exception):
    """Base class for all package-specific errors."""


class ParameterDomainError(BeamwanderError, ValueError):
    """A physical parameter is outside its admissible domain."""


class ResolutionError(BeamwanderError, ValueError):
    """A grid is too coarse to represent the requested physical feature."""


class StepSizeError(BeamwanderError, ValueError):
    """A propagation step or plan violates a sampling/validity limit.

    ``suggested_max`` carries the largest admissible value of the
    offending quantity when one exists (e.g. a maximum step length).
    """

    def __init__(self, message: str, suggested_max: float | None = None):
        super().__init__(message)
        self.suggested_max = suggested_max


class NumericalAccuracyError(BeamwanderError, ArithmeticError):
    """A numerical routine failed to reach its accuracy target.

    ``achieved`` reports the tolerance actually reached, ``target`` the
    one requested.
    """

    def __init__(self, message: str, achieved: float | None = None,
                 target: float | None = None):
        super().__init__(message)
        self.achieved = achieved
        self.target = target


class InputMismatchError(BeamwanderError, ValueError):
    """Operands live on different grids or have inconsistent shapes."""


class DegenerateInputError(BeamwanderError, ValueError):
    """Input is structurally valid but statistically unusable."""


class ConfigError(BeamwanderError, ValueError):
    """Configuration file or flag problem. ``key`` names the offender."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


class ResolutionWarning(UserWarning):
    """Grid pitch exceeds the inner scale; sub-l0 content is absent.

    Structured so callers can inspect ``dx`` and ``l0`` rather than
    parse text.
    """

    def __init__(self, message: str, dx: float | None = None,
                 l0: float | None = None):
        super().__init__(message)
        self.dx = dx
        self.l0 = l0
