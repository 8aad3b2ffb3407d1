"""
Sampler/quantizer model and per-step ADC uncertainty prediction
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, CorruptedSignalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdcChannelConfig:
    """Quantizer of one measured channel.

    Params:
        sample_period_s - control period T [s]
        bits            - resolution n
        fsr             - full-scale range, in signal units
        range_min       - lowest representable value, in signal units
    """

    sample_period_s: float
    bits: int
    fsr: float
    range_min: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.sample_period_s) and self.sample_period_s > 0):
            raise ConfigurationError(
                f"sample_period_s must be > 0, got {self.sample_period_s}"
            )
        if int(self.bits) != self.bits or self.bits < 1:
            raise ConfigurationError(f"bits must be an integer >= 1, got {self.bits}")
        if not (math.isfinite(self.fsr) and self.fsr > 0):
            raise ConfigurationError(f"fsr must be > 0, got {self.fsr}")
        if not math.isfinite(self.range_min):
            raise ConfigurationError(f"range_min must be finite, got {self.range_min}")

    @property
    def step(self) -> float:
        return self.fsr / 2**self.bits

    @property
    def range_max(self) -> float:
        return self.range_min + self.fsr


@dataclass
class AdcChannelState:
    prev_sample: float = 0.0
    curr_sample: float = 0.0
    initialized: bool = False
    n_samples: int = 0


@dataclass(frozen=True)
class MeasuredUncertainty:
    mu_sampling: float
    mu_quantization: float
    mu_total: float


NO_UNCERTAINTY = MeasuredUncertainty(0.0, 0.0, 0.0)


def quantize(value: float, cfg: AdcChannelConfig) -> float:
    """Round to the nearest grid level, halves away from range_min, clamped to the range."""
    if not math.isfinite(value):
        raise CorruptedSignalError(f"non-finite sample {value!r} at the quantizer")
    clamped = min(max(value, cfg.range_min), cfg.range_max)
    level = math.floor((clamped - cfg.range_min) / cfg.step + 0.5)
    return min(cfg.range_min + level * cfg.step, cfg.range_max)


def quantize_array(values: np.ndarray, cfg: AdcChannelConfig) -> np.ndarray:
    """Vectorised quantize over an array of samples."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise CorruptedSignalError("non-finite samples at the quantizer")
    clamped = np.clip(values, cfg.range_min, cfg.range_max)
    levels = np.floor((clamped - cfg.range_min) / cfg.step + 0.5)
    return np.minimum(cfg.range_min + levels * cfg.step, cfg.range_max)


def quantization_uncertainty(cfg: AdcChannelConfig) -> float:
    return 0.5 * cfg.fsr / 2**cfg.bits


def predict_sampling_uncertainty(state: AdcChannelState, cfg: AdcChannelConfig) -> float:
    """Slope over the last period times T, i.e. the last sample increment.

    The slope at step i is taken equal to the slope of the previous interval,
    so T cancels. Zero until two samples exist.
    """
    if not state.initialized:
        return 0.0
    return state.curr_sample - state.prev_sample


def predict_total_uncertainty(
    state: AdcChannelState, cfg: AdcChannelConfig
) -> MeasuredUncertainty:
    mu_s = predict_sampling_uncertainty(state, cfg)
    mu_q = quantization_uncertainty(cfg)
    return MeasuredUncertainty(mu_sampling=mu_s, mu_quantization=mu_q, mu_total=mu_s + mu_q)


def sample_and_hold(analog: float, state: AdcChannelState, cfg: AdcChannelConfig) -> float:
    sample = quantize(analog, cfg)
    state.prev_sample = state.curr_sample
    state.curr_sample = sample
    state.n_samples += 1
    state.initialized = state.n_samples >= 2
    return sample


class AdcChannel:
    """One measured signal: quantizer config plus its sample history.

    A channel built without a config is an analog passthrough: the controller
    sees the true value and the predicted uncertainty is zero.
    """

    def __init__(self, name: str, cfg: AdcChannelConfig | None = None):
        self.name = name
        self.cfg = cfg
        self.state = AdcChannelState()

    @classmethod
    def passthrough(cls, name: str) -> "AdcChannel":
        return cls(name, None)

    @property
    def is_passthrough(self) -> bool:
        return self.cfg is None

    def read(self, analog: float) -> tuple[float, MeasuredUncertainty]:
        """Sample one period and predict the uncertainty on the new sample."""
        if self.cfg is None:
            if not math.isfinite(analog):
                raise CorruptedSignalError(
                    f"non-finite sample {analog!r} on channel '{self.name}'"
                )
            return analog, NO_UNCERTAINTY
        try:
            measured = sample_and_hold(analog, self.state, self.cfg)
        except CorruptedSignalError as e:
            raise CorruptedSignalError(f"channel '{self.name}': {e}") from e
        return measured, predict_total_uncertainty(self.state, self.cfg)
