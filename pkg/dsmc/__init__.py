"""
Adaptive discrete sliding-mode control primitives: ADC uncertainty prediction,
the SISO control law with uncertainty propagation, and adaptation laws.
"""

from .errors import (
    ConfigurationError,
    CorruptedSignalError,
    DsmcError,
    EmptyWindowError,
    InvariantViolation,
    LoopError,
    NumericFailure,
    TrajectoryError,
)

__all__ = [
    "ConfigurationError",
    "CorruptedSignalError",
    "DsmcError",
    "EmptyWindowError",
    "InvariantViolation",
    "LoopError",
    "NumericFailure",
    "TrajectoryError",
]
