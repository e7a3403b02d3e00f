"""Exception hierarchy shared by every module."""


class TDMJLSError(Exception):
    """Base class for all package errors."""


class ValidationError(TDMJLSError, ValueError):
    """Inputs violate a structural precondition (shape, stochasticity, rank)."""


class SizeError(ValidationError):
    """Augmented system would exceed the configured dimension cap."""


class ConfigError(ValidationError):
    """A configuration file failed to parse or validate.

    ``errors`` holds every problem found, not just the first.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class AnalysisError(TDMJLSError):
    """An analysis precondition (stability, ergodicity) does not hold."""


class InstabilityError(AnalysisError):
    """Spectral radius is not below the required threshold."""

    def __init__(self, message, sigma=None):
        super().__init__(message)
        self.sigma = sigma


class NonErgodicError(AnalysisError):
    """The Markov chain has no unique, aperiodic stationary regime."""


class NumericalError(TDMJLSError, ArithmeticError):
    """A numerical routine failed or produced an inconsistent result."""


class ModelWarning(UserWarning):
    """The system breaks a usual TD assumption (uncentered offsets, non-Hurwitz mean)."""
