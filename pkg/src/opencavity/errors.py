"""Exception and warning classes raised by opencavity."""


class OpenCavityError(Exception):
    """Base class for all library errors."""


class InvalidSpectrum(OpenCavityError, ValueError):
    pass


class InvalidCoupling(OpenCavityError, ValueError):
    pass


class DimensionError(OpenCavityError, ValueError):
    pass


class QuadratureError(OpenCavityError):
    """Principal-value quadrature did not reach the requested tolerance."""

    def __init__(self, message, error_estimate=float("nan")):
        super().__init__(message)
        self.error_estimate = error_estimate


class SingularResponse(OpenCavityError):
    """The response matrix D(omega) cannot be inverted reliably."""

    def __init__(self, message, condition=float("inf"), omega=None):
        super().__init__(message)
        self.condition = condition
        self.omega = omega


class PoleRefinementError(OpenCavityError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class NoSteadyState(OpenCavityError):
    pass


class StepSizeError(OpenCavityError, ValueError):
    pass


class BathTooCoarse(OpenCavityError):
    pass


class FitRejected(OpenCavityError):
    """Exponential fit of the atomic population failed its quality check."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(OpenCavityError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class DegeneratePoleWarning(UserWarning):
    pass


class GrowthWarning(RuntimeWarning):
    pass


class TruncationWarning(UserWarning):
    pass
