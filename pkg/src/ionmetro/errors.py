"""Exception hierarchy shared by the simulator, fitting and CLI layers."""


class IonMetroError(Exception):
    """Base class for all package errors."""

    #: process exit status used by the command-line front end
    exit_code = 1


class ConfigError(IonMetroError, ValueError):
    exit_code = 2


class DimensionError(IonMetroError, ValueError):
    exit_code = 2


class TruncationLeakError(IonMetroError):
    """Probability pushed past the Fock cutoff exceeds the allowed budget."""

    exit_code = 3

    def __init__(self, message, leak=None, suggested_n_max=None):
        super().__init__(message)
        self.leak = leak
        self.suggested_n_max = suggested_n_max


class InvalidStateError(IonMetroError):
    exit_code = 3


class FitError(IonMetroError):
    exit_code = 4


class ConvergenceError(FitError):
    pass


class RankDeficientError(FitError):
    pass


class UnderResolvedError(FitError):
    pass


class IntegratorError(IonMetroError):
    exit_code = 5


class FisherDomainError(IonMetroError, ValueError):
    """Binary-outcome Fisher information requested where P is 0 or 1."""

    exit_code = 6


class DegenerateModelError(IonMetroError, ValueError):
    exit_code = 6


class SeriesTruncationError(IonMetroError, ValueError):
    exit_code = 2


class CalibrationError(IonMetroError):
    exit_code = 4


class SlopeCheckError(IonMetroError):
    """Analytic fringe slope disagrees with finite differences."""

    exit_code = 6
