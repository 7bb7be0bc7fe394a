"""Exception hierarchy shared by all modules."""


class ErgomixError(Exception):
    """Base class for every error raised by the package."""


class ConfigurationError(ErgomixError):
    pass


class ParameterError(ErgomixError):
    pass


class NumericError(ErgomixError):
    pass


class QuadratureError(ErgomixError):
    """Adaptive quadrature did not converge; carries the last two estimates."""

    def __init__(self, message, previous=None, current=None):
        super().__init__(message)
        self.previous = previous
        self.current = current


class DomainOverflowError(ErgomixError):
    pass


class TruncationError(ErgomixError):
    pass


class SpectralRangeError(ErgomixError):
    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


class CoverageError(ErgomixError):
    pass


class CalibrationError(ErgomixError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class SupportTestError(ErgomixError):
    pass


class RangeError(ErgomixError, ValueError):
    pass
