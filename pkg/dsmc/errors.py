"""
Exception hierarchy shared by the controller, plant and harness packages
"""

from __future__ import annotations


class DsmcError(Exception):
    """Base class for every error raised by this project."""


class ConfigurationError(DsmcError, ValueError):
    """Invalid parameters, detected before the first control step."""


class TrajectoryError(ConfigurationError):
    """Malformed desired trajectory or non-positive desired AFR."""


class CorruptedSignalError(DsmcError, ValueError):
    """A non-finite value reached the quantizer."""


class EmptyWindowError(DsmcError, ValueError):
    """No trace rows left after the settle window was skipped."""


class NumericFailure(DsmcError, ArithmeticError):
    """A state or control became non-finite during a run."""

    def __init__(self, message: str, step: int | None = None, signal: str | None = None):
        super().__init__(message)
        self.step = step
        self.signal = signal

    def __reduce__(self):
        return (type(self), (self.args[0], self.step, self.signal))


class InvariantViolation(DsmcError):
    """Raised by the Lyapunov monitor when strict invariants are requested."""

    def __init__(
        self,
        message: str,
        step: int | None = None,
        loop: str | None = None,
        monitor: str | None = None,
    ):
        super().__init__(message)
        self.step = step
        self.loop = loop
        self.monitor = monitor

    def __reduce__(self):
        return (type(self), (self.args[0], self.step, self.loop, self.monitor))


class LoopError(DsmcError):
    """Wraps a failure inside one engine control loop."""

    def __init__(self, loop: str, cause: BaseException):
        super().__init__(f"loop '{loop}' failed: {cause}")
        self.loop = loop
        self.cause = cause

    def __reduce__(self):
        return (type(self), (self.loop, self.cause))
