"""Simulation and analysis of antibunched ion fluorescence through a frequency converter."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AnalysisWindowError,
    ConfigError,
    ContractError,
    DomainError,
    IonQFCError,
    NormalizationError,
    OutOfRangeError,
    ParameterError,
)

__all__ = [
    "__version__",
    "AnalysisWindowError",
    "ConfigError",
    "ContractError",
    "DomainError",
    "IonQFCError",
    "NormalizationError",
    "OutOfRangeError",
    "ParameterError",
]
