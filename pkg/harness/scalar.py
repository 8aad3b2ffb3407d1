"""
Scalar benchmark loop: x(i+1) = x + T·f_act(x) + g·u·T with f(x) = a·x + b·sin(x)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from dsmc.adaptation import AdaptMode, LoopEstimator, LyapunovMonitor
from dsmc.core import LoopState, SisoModel, compute_control, plant_euler_step, saturate, sliding_surface
from dsmc.errors import NumericFailure
from engine.plant import InjectionMode

from .config import (
    SCALAR_CHANNEL,
    SCALAR_LOOP,
    InjectionSettings,
    ScalarSettings,
    Scenario,
    adc_channel,
    loop_config,
)
from .events import RunEvents
from .trajectory import sample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalarPlant:
    a: float
    b: float
    g: float
    mode: InjectionMode = InjectionMode.NONE
    alpha: float = 0.0
    beta: float = 1.0

    def drift(self, x: float) -> float:
        if not math.isfinite(x):
            return math.nan
        return self.a * x + self.b * math.sin(x)

    def actual_drift(self, x: float) -> float:
        f = self.drift(x)
        if self.mode is InjectionMode.ADDITIVE:
            return f + self.alpha
        if self.mode is InjectionMode.MULTIPLICATIVE:
            return self.beta * f
        return f

    def true_estimate(self, adapt_mode: AdaptMode) -> float | None:
        mode = self.mode
        if mode is InjectionMode.ADDITIVE and self.alpha == 0:
            mode = InjectionMode.NONE
        if mode is InjectionMode.MULTIPLICATIVE and self.beta == 1:
            mode = InjectionMode.NONE
        if adapt_mode is AdaptMode.ADDITIVE:
            return {InjectionMode.NONE: 0.0, InjectionMode.ADDITIVE: self.alpha}.get(mode)
        if adapt_mode is AdaptMode.MULTIPLICATIVE:
            return {InjectionMode.NONE: 1.0, InjectionMode.MULTIPLICATIVE: self.beta}.get(mode)
        return None


def _nan_if_none(value: float | None) -> float:
    return math.nan if value is None else value


def run_scalar(sc: Scenario, strict: bool = False) -> tuple[pd.DataFrame, RunEvents]:
    header = sc.scenario
    T, n = header.sample_period_s, sc.n_steps
    settings = sc.scalar or ScalarSettings()
    inj = sc.injection.get(SCALAR_LOOP, InjectionSettings())
    plant = ScalarPlant(settings.a, settings.b, settings.g, inj.mode, inj.alpha, inj.beta)
    model = SisoModel(plant.drift, plant.g, T)
    cfg = loop_config(sc, SCALAR_LOOP)
    estimator = LoopEstimator.build(cfg.adapt, plant.true_estimate(cfg.adapt.mode))
    channel = adc_channel(sc, SCALAR_CHANNEL)
    rng = np.random.default_rng(header.seed)
    xd = sample(sc.trajectories[SCALAR_CHANNEL].to_spec(), n, T, rng)

    monitor = None
    if header.monitor and estimator.error is not None:
        monitor = LyapunovMonitor(SCALAR_LOOP, estimator.config.gain, cfg.rho, strict=strict)

    events = RunEvents()
    rows: list[dict] = []
    x = settings.x0
    for i in range(n):
        x_meas, unc = channel.read(x)
        s = sliding_surface(x_meas, xd[i])
        loop = LoopState(cfg.rho, s, xd[i], xd[i + 1])
        decision = compute_control(
            model, loop, x_meas, unc.mu_total, estimator.f_hat_of(plant.drift), cfg.adc_compensation
        )
        u, saturated = saturate(decision.u, cfg.actuator_limits)
        if saturated:
            events.saturations[SCALAR_LOOP] += 1

        estimate, error = estimator.estimate, estimator.error
        estimator, clamped = estimator.advance(plant.drift(x_meas), s, T)
        if clamped:
            events.estimate_clamps[SCALAR_LOOP] += 1
        record = monitor.observe(i, s, error, clamped) if monitor else None

        x_next = plant_euler_step(model, x, u, plant.actual_drift(x))
        if not (math.isfinite(u) and math.isfinite(x_next)):
            raise NumericFailure(f"non-finite state or control at step {i}", step=i, signal="x")

        rows.append(
            {
                "step": i,
                "t": i * T,
                "x_analog": x,
                "x_measured": x_meas,
                "mu_x_x": unc.mu_total,
                "x_desired": xd[i],
                "x_desired_next": xd[i + 1],
                "s_x": s,
                "u_x": u,
                "u_x_baseline": decision.u_baseline,
                "mu_u_x": decision.mu_u,
                "estimate_x": _nan_if_none(estimate),
                "estimate_x_true": _nan_if_none(estimator.true_value),
                "lyap_v_x": record.v if record else math.nan,
                "lyap_dv_x": record.delta_v if record else math.nan,
                "lyap_first_order_x": record.first_order if record else math.nan,
                "saturated_x": int(saturated),
            }
        )
        x = x_next

    if monitor:
        events.violations[SCALAR_LOOP] = monitor.violations
    return pd.DataFrame(rows, columns=SCALAR_COLUMNS), events


SCALAR_COLUMNS = [
    "step",
    "t",
    "x_analog",
    "x_measured",
    "mu_x_x",
    "x_desired",
    "x_desired_next",
    "s_x",
    "u_x",
    "u_x_baseline",
    "mu_u_x",
    "estimate_x",
    "estimate_x_true",
    "lyap_v_x",
    "lyap_dv_x",
    "lyap_first_order_x",
    "saturated_x",
]
