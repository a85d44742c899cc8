"""Exception types raised across the package."""


class IonQFCError(Exception):
    """Base class for all package errors."""


class ParameterError(IonQFCError, ValueError):
    """A parameter lies outside the domain of a model."""


class DomainError(IonQFCError, ValueError):
    """An operation has no solution for the given inputs."""


class OutOfRangeError(DomainError):
    """A solved quantity falls outside its allowed operating range."""


class ContractError(IonQFCError, ValueError):
    """Input data violates a structural precondition (e.g. unsorted tags)."""


class NormalizationError(IonQFCError, ValueError):
    """A histogram cannot be normalized (zero rate or zero integration time)."""


class AnalysisWindowError(IonQFCError, ValueError):
    """The analysed delay span is too short for the requested spectrum."""


class ConfigError(IonQFCError, ValueError):
    """Invalid scenario configuration. ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
