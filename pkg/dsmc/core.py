"""
Generic SISO discrete sliding-mode controller
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import ConfigurationError

DriftFn = Callable[[float], float]


@dataclass(frozen=True)
class SisoModel:
    """x(i+1) = x(i) + f(x)·T + g·u(i)·T"""

    f_eval: DriftFn
    g: float
    T: float

    def __post_init__(self):
        if not math.isfinite(self.g) or self.g == 0:
            raise ConfigurationError(f"input gain g must be finite and nonzero, got {self.g}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ConfigurationError(f"sample period T must be > 0, got {self.T}")


@dataclass(frozen=True)
class LoopState:
    rho: float
    s: float
    x_d_curr: float
    x_d_next: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in (0, 1), got {self.rho}")


@dataclass(frozen=True)
class PropagatedUncertainty:
    """Difference between the virtual ideal controller and the one under test."""

    mu_u: float
    u: float = 0.0
    u_ideal: float = 0.0


@dataclass(frozen=True)
class ControlDecision:
    u_baseline: float
    u: float
    mu_u: float
    s: float


def sliding_surface(x: float, x_d: float) -> float:
    return x - x_d


def baseline_control(model: SisoModel, x: float, loop: LoopState, f_hat: float) -> float:
    """u = [(rho-1)x - rho·x_d(i) - f_hat·T + x_d(i+1)] / (g·T)"""
    gT = model.g * model.T
    if gT == 0:
        raise ConfigurationError("g*T must be nonzero")
    bracket = (loop.rho - 1.0) * x - loop.rho * loop.x_d_curr - f_hat * model.T + loop.x_d_next
    return bracket / gT


def propagate_uncertainty(
    model: SisoModel,
    loop: LoopState,
    x_measured: float,
    mu_x: float,
    f_hat_of: DriftFn,
) -> PropagatedUncertainty:
    """Evaluate the control law at the measured and at the uncertainty-shifted state."""
    u = baseline_control(model, x_measured, loop, f_hat_of(x_measured))
    x_ideal = x_measured + mu_x
    u_ideal = baseline_control(model, x_ideal, loop, f_hat_of(x_ideal))
    return PropagatedUncertainty(mu_u=u_ideal - u, u=u, u_ideal=u_ideal)


def modified_control(u: float, mu_u: PropagatedUncertainty | float, s: float) -> float:
    if isinstance(mu_u, PropagatedUncertainty):
        mu_u = mu_u.mu_u
    return u - mu_u * s


def plant_euler_step(model: SisoModel, x: float, u: float, f_actual: float) -> float:
    return x + f_actual * model.T + model.g * u * model.T


def compute_control(
    model: SisoModel,
    loop: LoopState,
    x_measured: float,
    mu_x: float,
    f_hat_of: DriftFn,
    compensate: bool = True,
) -> ControlDecision:
    """Baseline law, dual evaluation and, when enabled, the compensation term."""
    prop = propagate_uncertainty(model, loop, x_measured, mu_x, f_hat_of)
    u = modified_control(prop.u, prop, loop.s) if compensate else prop.u
    return ControlDecision(u_baseline=prop.u, u=u, mu_u=prop.mu_u, s=loop.s)


def saturate(u: float, limits: tuple[float, float] | None) -> tuple[float, bool]:
    if limits is None:
        return u, False
    lo, hi = limits
    if u < lo:
        return lo, True
    if u > hi:
        return hi, True
    return u, False
