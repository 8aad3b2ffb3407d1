"""
Adaptation laws for additive and multiplicative drift uncertainty, and the
Lyapunov-difference monitor that checks them along a run.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConfigurationError, InvariantViolation

logger = logging.getLogger(__name__)

DEFAULT_BETA_INITIAL = 0.5
DEFAULT_BOUND_FACTOR = 10.0


class AdaptMode(str, Enum):
    NONE = "none"
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"


@dataclass(frozen=True)
class AdditiveAdaptState:
    alpha_hat: float
    kappa: float
    alpha_true: float | None = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigurationError(f"kappa must be > 0, got {self.kappa}")

    @property
    def alpha_tilde(self) -> float | None:
        if self.alpha_true is None:
            return None
        return self.alpha_true - self.alpha_hat


@dataclass(frozen=True)
class MultiplicativeAdaptState:
    beta_hat: float
    rho_beta: float
    beta_true: float | None = None

    def __post_init__(self):
        if not self.rho_beta > 0:
            raise ConfigurationError(f"rho_beta must be > 0, got {self.rho_beta}")

    @property
    def beta_tilde(self) -> float | None:
        if self.beta_true is None:
            return None
        return self.beta_true - self.beta_hat


@dataclass(frozen=True)
class LyapunovSample:
    v: float
    delta_v: float | None
    s: float
    alpha_tilde: float


def update_additive(state: AdditiveAdaptState, s: float, T: float) -> AdditiveAdaptState:
    if not state.kappa > 0:
        raise ConfigurationError(f"kappa must be > 0, got {state.kappa}")
    return replace(state, alpha_hat=state.alpha_hat + T * s / state.kappa)


def update_multiplicative(
    state: MultiplicativeAdaptState, f_nominal: float, s: float, T: float
) -> MultiplicativeAdaptState:
    if not state.rho_beta > 0:
        raise ConfigurationError(f"rho_beta must be > 0, got {state.rho_beta}")
    return replace(state, beta_hat=state.beta_hat + f_nominal * s * T / state.rho_beta)


def surface_error_dynamics(s: float, alpha_tilde: float, rho: float, T: float) -> float:
    """Predicted s(i+1) of the additive-adaptive loop."""
    return rho * s + T * alpha_tilde


def lyapunov_sample(
    s: float, alpha_tilde: float, kappa: float, prev: LyapunovSample | None = None
) -> LyapunovSample:
    if not kappa > 0:
        raise ConfigurationError(f"kappa must be > 0, got {kappa}")
    v = 0.5 * s * s + 0.5 * kappa * alpha_tilde * alpha_tilde
    delta_v = None if prev is None else v - prev.v
    return LyapunovSample(v=v, delta_v=delta_v, s=s, alpha_tilde=alpha_tilde)


# ────────────────────────────────────────────────────────────────────────────────
# Per-loop estimator
# ────────────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class AdaptConfig:
    """Adaptation settings of one loop, in the loop's drift units.

    `bound` is the anti-windup half-width around the nominal value (0 for
    additive, 1 for multiplicative). None means unbounded.
    """

    mode: AdaptMode = AdaptMode.NONE
    gain: float = 1.0
    initial: float | None = None
    bound: float | None = None
    frozen: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", AdaptMode(self.mode))
        if not (math.isfinite(self.gain) and self.gain > 0):
            raise ConfigurationError(f"adaptation gain must be > 0, got {self.gain}")
        if self.bound is not None and not self.bound > 0:
            raise ConfigurationError(f"adaptation bound must be > 0, got {self.bound}")

    @property
    def nominal(self) -> float:
        return 1.0 if self.mode is AdaptMode.MULTIPLICATIVE else 0.0


def default_bound(mode: AdaptMode, true_value: float | None) -> float | None:
    """Ten times the true-value scale, or unbounded when that scale is zero or unknown."""
    if true_value is None or mode is AdaptMode.NONE:
        return None
    nominal = 1.0 if mode is AdaptMode.MULTIPLICATIVE else 0.0
    scale = abs(true_value - nominal)
    if scale == 0:
        return None
    return DEFAULT_BOUND_FACTOR * scale


@dataclass(frozen=True)
class LoopEstimator:
    """Adaptive estimate of one loop and the drift model it implies."""

    config: AdaptConfig
    state: AdditiveAdaptState | MultiplicativeAdaptState | None = None

    @classmethod
    def build(cls, config: AdaptConfig, true_value: float | None = None) -> "LoopEstimator":
        if config.mode is AdaptMode.ADDITIVE:
            initial = 0.0 if config.initial is None else config.initial
            state = AdditiveAdaptState(initial, config.gain, true_value)
        elif config.mode is AdaptMode.MULTIPLICATIVE:
            initial = DEFAULT_BETA_INITIAL if config.initial is None else config.initial
            state = MultiplicativeAdaptState(initial, config.gain, true_value)
        else:
            state = None
        if config.bound is None and state is not None:
            config = replace(config, bound=default_bound(config.mode, true_value))
        return cls(config=config, state=state)

    @property
    def mode(self) -> AdaptMode:
        return self.config.mode

    @property
    def estimate(self) -> float | None:
        if isinstance(self.state, AdditiveAdaptState):
            return self.state.alpha_hat
        if isinstance(self.state, MultiplicativeAdaptState):
            return self.state.beta_hat
        return None

    @property
    def true_value(self) -> float | None:
        if isinstance(self.state, AdditiveAdaptState):
            return self.state.alpha_true
        if isinstance(self.state, MultiplicativeAdaptState):
            return self.state.beta_true
        return None

    @property
    def error(self) -> float | None:
        if isinstance(self.state, AdditiveAdaptState):
            return self.state.alpha_tilde
        if isinstance(self.state, MultiplicativeAdaptState):
            return self.state.beta_tilde
        return None

    def f_hat(self, f_nominal: float) -> float:
        if isinstance(self.state, AdditiveAdaptState):
            return f_nominal + self.state.alpha_hat
        if isinstance(self.state, MultiplicativeAdaptState):
            return self.state.beta_hat * f_nominal
        return f_nominal

    def f_hat_of(self, f_eval):
        return lambda x: self.f_hat(f_eval(x))

    def advance(self, f_nominal: float, s: float, T: float) -> tuple["LoopEstimator", bool]:
        """One adaptation step; returns the new estimator and whether it was clamped."""
        if self.state is None or self.config.frozen:
            return self, False
        if isinstance(self.state, AdditiveAdaptState):
            state = update_additive(self.state, s, T)
            value = state.alpha_hat
        else:
            state = update_multiplicative(self.state, f_nominal, s, T)
            value = state.beta_hat

        bound = self.config.bound
        clamped = False
        if bound is not None:
            lo, hi = self.config.nominal - bound, self.config.nominal + bound
            if value < lo or value > hi:
                value = min(max(value, lo), hi)
                clamped = True
                if isinstance(state, AdditiveAdaptState):
                    state = replace(state, alpha_hat=value)
                else:
                    state = replace(state, beta_hat=value)
        return replace(self, state=state), clamped


# ────────────────────────────────────────────────────────────────────────────────
# Lyapunov monitor
# ────────────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class MonitorRecord:
    v: float
    delta_v: float
    first_order: float
    violation: bool


class LyapunovMonitor:
    """Tracks V = s²/2 + gain·err²/2 and checks the first-order part of ΔV.

    The first-order part is ΔV minus the two second-order terms
    ½Δs² and ½·gain·Δerr². Along an exact closed loop it equals
    -(1-rho)·s² of the previous step, so a positive value is reported.
    """

    def __init__(
        self,
        name: str,
        gain: float,
        rho: float,
        strict: bool = False,
        rel_tol: float = 1e-9,
    ):
        if not gain > 0:
            raise ConfigurationError(f"monitor gain must be > 0, got {gain}")
        self.name = name
        self.gain = gain
        self.rho = rho
        self.strict = strict
        self.rel_tol = rel_tol
        self.violations = 0
        self._prev: LyapunovSample | None = None

    def observe(self, step: int, s: float, err: float, clamped: bool = False) -> MonitorRecord:
        sample = lyapunov_sample(s, err, self.gain, self._prev)
        prev, self._prev = self._prev, sample
        if prev is None:
            record = MonitorRecord(sample.v, math.nan, math.nan, False)
        else:
            ds = s - prev.s
            derr = err - prev.alpha_tilde
            first_order = sample.delta_v - 0.5 * ds * ds - 0.5 * self.gain * derr * derr
            tol = self.rel_tol * max(sample.v, prev.v) + 1e-300
            record = MonitorRecord(sample.v, sample.delta_v, first_order, first_order > tol)

        if record.violation or clamped:
            self.violations += 1
            reason = "estimate clamped" if clamped else "first-order Lyapunov term positive"
            logger.debug("monitor %s: %s at step %d", self.name, reason, step)
            if self.strict:
                raise InvariantViolation(
                    f"loop '{self.name}': {reason} at step {step}",
                    step=step,
                    loop=self.name,
                    monitor="lyapunov",
                )
        return record
