"""
Four SISO adaptive DSMC loops of the engine and their cascade wiring.

Each loop is written in the generic form x(i+1) = x + f·T + g·u·T:

    texh   x = T_exh    f = (600·AFI - T_exh)/tau_e   g = 7.5·AFI/tau_e   u = spark
    fuel   x = mdot_f   f = -mdot_f/tau_f             g = 1/tau_f         u = mdot_fc
    speed  x = omega_e  f = -T_loss(omega_e)/J        g = torque_gain/J   u = m_a,d
    air    x = m_a      f = -mdot_ao(m_a, omega_e)    g = 1               u = mdot_ai

Additive estimates live in drift units; `drift_scale` converts a physical
plant error (K, kg/s, N·m, kg/s) into the drift offset it causes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

from dsmc.adaptation import AdaptConfig, AdaptMode, LoopEstimator
from dsmc.adc import AdcChannel
from dsmc.core import LoopState, SisoModel, compute_control, saturate, sliding_surface
from dsmc.errors import ConfigurationError, DsmcError, LoopError, TrajectoryError

from .plant import (
    CHANNELS,
    EngineParams,
    InjectionMode,
    PlantInputs,
    PlantState,
    UncertaintyInjection,
    cylinder_air_flow,
    torque_loss,
)

logger = logging.getLogger(__name__)


class LoopId(str, Enum):
    TEXH = "texh"
    FUEL = "fuel"
    SPEED = "speed"
    AIR = "air"


# speed first: it produces the air loop's reference
LOOP_ORDER: tuple[LoopId, ...] = (LoopId.SPEED, LoopId.AIR, LoopId.TEXH, LoopId.FUEL)

LOOP_CHANNEL: dict[LoopId, str] = {
    LoopId.TEXH: "t_exh",
    LoopId.FUEL: "mdot_f",
    LoopId.SPEED: "omega_e",
    LoopId.AIR: "m_a",
}

DEFAULT_ACTUATOR_LIMITS: dict[LoopId, tuple[float, float] | None] = {
    LoopId.TEXH: (-10.0, 40.0),
    LoopId.FUEL: (0.0, 0.02),
    LoopId.SPEED: None,
    LoopId.AIR: (0.0, 0.1),
}


@dataclass(frozen=True)
class LoopConfig:
    rho: float = 0.5
    adapt: AdaptConfig = AdaptConfig()
    adc_compensation: bool = True
    actuator_limits: tuple[float, float] | None = None

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigurationError(f"rho must lie in (0, 1), got {self.rho}")
        if self.actuator_limits is not None:
            lo, hi = self.actuator_limits
            if not lo <= hi:
                raise ConfigurationError(f"actuator limits must satisfy lo <= hi, got {self.actuator_limits}")


@dataclass(frozen=True)
class LoopDecision:
    loop: LoopId
    x_measured: float
    x_d: float
    x_d_next: float
    s: float
    u_baseline: float
    u: float
    mu_u: float
    saturated: bool
    f_nominal: float
    estimate: float | None = None
    estimate_error: float | None = None
    clamped: bool = False


@dataclass(frozen=True)
class EngineTargets:
    """Desired samples at steps i and i+1."""

    t_exh: tuple[float, float]
    omega_e: tuple[float, float]
    afr: tuple[float, float]


@dataclass(frozen=True)
class ControllerOutputs:
    measured: PlantState
    mu_x: dict[str, float]
    mdot_ao: float
    decisions: dict[LoopId, LoopDecision]

    @property
    def delta_spark(self) -> float:
        return self.decisions[LoopId.TEXH].u

    @property
    def mdot_fc(self) -> float:
        return self.decisions[LoopId.FUEL].u

    @property
    def m_a_desired(self) -> float:
        return self.decisions[LoopId.SPEED].u

    @property
    def mdot_ai(self) -> float:
        return self.decisions[LoopId.AIR].u

    @property
    def surfaces(self) -> dict[LoopId, float]:
        return {loop: d.s for loop, d in self.decisions.items()}

    @property
    def mu_u(self) -> dict[LoopId, float]:
        return {loop: d.mu_u for loop, d in self.decisions.items()}

    def inputs(self) -> PlantInputs:
        return PlantInputs(
            delta_spark=self.delta_spark, mdot_fc=self.mdot_fc, mdot_ai=self.mdot_ai
        )


# ────────────────────────────────────────────────────────────────────────────────
# Loop models
# ────────────────────────────────────────────────────────────────────────────────
def drift_scale(loop: LoopId, p: EngineParams) -> float:
    return {
        LoopId.TEXH: 1.0 / p.tau_e,
        LoopId.FUEL: -1.0 / p.tau_f,
        LoopId.SPEED: -1.0 / p.inertia_j,
        LoopId.AIR: -1.0,
    }[loop]


def siso_model(loop: LoopId, measured: PlantState, p: EngineParams, T: float) -> SisoModel:
    """SISO form of one loop; cross-channel inputs are held at their measured values."""
    afi = p.afi_value
    if loop is LoopId.TEXH:
        return SisoModel(lambda x: (600.0 * afi - x) / p.tau_e, 7.5 * afi / p.tau_e, T)
    if loop is LoopId.FUEL:
        return SisoModel(lambda x: -x / p.tau_f, 1.0 / p.tau_f, T)
    if loop is LoopId.SPEED:
        return SisoModel(lambda x: -torque_loss(x) / p.inertia_j, p.torque_gain / p.inertia_j, T)
    omega = measured.omega_e
    return SisoModel(lambda x: -cylinder_air_flow(x, omega, p), 1.0, T)


def _loop_control(
    loop: LoopId,
    model: SisoModel,
    x: float,
    x_d: float,
    x_d_next: float,
    mu_x: float,
    cfg: LoopConfig,
    estimator: LoopEstimator,
) -> LoopDecision:
    s = sliding_surface(x, x_d)
    state = LoopState(cfg.rho, s, x_d, x_d_next)
    decision = compute_control(
        model, state, x, mu_x, estimator.f_hat_of(model.f_eval), cfg.adc_compensation
    )
    u, saturated = saturate(decision.u, cfg.actuator_limits)
    if saturated:
        logger.debug("%s command %.6g saturated to %.6g", loop.value, decision.u, u)
    return LoopDecision(
        loop=loop,
        x_measured=x,
        x_d=x_d,
        x_d_next=x_d_next,
        s=s,
        u_baseline=decision.u_baseline,
        u=u,
        mu_u=decision.mu_u,
        saturated=saturated,
        f_nominal=model.f_eval(x),
        estimate=estimator.estimate,
        estimate_error=estimator.error,
    )


def texh_control(
    measured: PlantState,
    target: tuple[float, float],
    cfg: LoopConfig,
    estimator: LoopEstimator,
    mu_x: float,
    p: EngineParams,
    T: float,
) -> LoopDecision:
    """Spark command in deg ATDC."""
    model = siso_model(LoopId.TEXH, measured, p, T)
    return _loop_control(
        LoopId.TEXH, model, measured.t_exh, target[0], target[1], mu_x, cfg, estimator
    )


def desired_fuel_flow(mdot_ao: float, afr_d: float) -> float:
    if not afr_d > 0:
        raise TrajectoryError(f"desired AFR must be > 0, got {afr_d}")
    return mdot_ao / afr_d


def fuel_control(
    measured: PlantState,
    afr_target: tuple[float, float],
    cfg: LoopConfig,
    estimator: LoopEstimator,
    mu_x: float,
    p: EngineParams,
    T: float,
) -> LoopDecision:
    """Commanded fuel in kg/s; the fuel target follows the measured air flow."""
    mdot_ao = cylinder_air_flow(measured.m_a, measured.omega_e, p)
    x_d = desired_fuel_flow(mdot_ao, afr_target[0])
    x_d_next = desired_fuel_flow(mdot_ao, afr_target[1])
    model = siso_model(LoopId.FUEL, measured, p, T)
    return _loop_control(LoopId.FUEL, model, measured.mdot_f, x_d, x_d_next, mu_x, cfg, estimator)


def speed_control(
    measured: PlantState,
    target: tuple[float, float],
    cfg: LoopConfig,
    estimator: LoopEstimator,
    mu_x: float,
    p: EngineParams,
    T: float,
) -> LoopDecision:
    """Desired manifold air mass in kg, the synthetic input of the speed loop."""
    model = siso_model(LoopId.SPEED, measured, p, T)
    return _loop_control(
        LoopId.SPEED, model, measured.omega_e, target[0], target[1], mu_x, cfg, estimator
    )


def airflow_control(
    measured: PlantState,
    m_a_desired: float,
    cfg: LoopConfig,
    estimator: LoopEstimator,
    mu_x: float,
    p: EngineParams,
    T: float,
) -> LoopDecision:
    """Manifold inlet air flow in kg/s. The reference is held over the step."""
    model = siso_model(LoopId.AIR, measured, p, T)
    return _loop_control(
        LoopId.AIR, model, measured.m_a, m_a_desired, m_a_desired, mu_x, cfg, estimator
    )


# ────────────────────────────────────────────────────────────────────────────────
# Estimator construction
# ────────────────────────────────────────────────────────────────────────────────
def _injected_truth(loop: LoopId, inj: UncertaintyInjection) -> tuple[InjectionMode, float, float]:
    """(mode, alpha in physical units, beta) of the plant error on one loop."""
    if loop is LoopId.TEXH:
        return inj.texh_mode, inj.alpha_texh, inj.beta_texh
    if loop is LoopId.FUEL:
        return inj.fuel_mode, inj.alpha_mdotf, inj.beta_mdotf
    if loop is LoopId.SPEED:
        return inj.speed_mode, inj.alpha_omega, 1.0
    return inj.air_mode, inj.alpha_ma, 1.0


def true_drift_error(
    loop: LoopId, adapt_mode: AdaptMode, inj: UncertaintyInjection, p: EngineParams
) -> float | None:
    """True value of the estimate in drift units, or None when the estimator cannot represent it."""
    mode, alpha, beta = _injected_truth(loop, inj)
    if mode is InjectionMode.ADDITIVE and alpha == 0:
        mode = InjectionMode.NONE
    if mode is InjectionMode.MULTIPLICATIVE and beta == 1:
        mode = InjectionMode.NONE

    if adapt_mode is AdaptMode.ADDITIVE:
        if mode is InjectionMode.NONE:
            return 0.0
        if mode is InjectionMode.ADDITIVE:
            return alpha * drift_scale(loop, p)
        return None
    if adapt_mode is AdaptMode.MULTIPLICATIVE:
        if mode is InjectionMode.NONE:
            return 1.0
        if mode is InjectionMode.MULTIPLICATIVE:
            return beta
        return None
    return None


def build_estimator(
    loop: LoopId, cfg: LoopConfig, inj: UncertaintyInjection, p: EngineParams
) -> LoopEstimator:
    """Estimator in drift units from a config whose initial value and bound are physical."""
    adapt = cfg.adapt
    if adapt.mode is AdaptMode.ADDITIVE:
        scale = drift_scale(loop, p)
        adapt = replace(
            adapt,
            initial=None if adapt.initial is None else adapt.initial * scale,
            bound=None if adapt.bound is None else abs(adapt.bound * scale),
        )
    return LoopEstimator.build(adapt, true_drift_error(loop, adapt.mode, inj, p))


def to_physical(loop: LoopId, mode: AdaptMode, value: float | None, p: EngineParams) -> float:
    if value is None:
        return math.nan
    if mode is AdaptMode.ADDITIVE:
        return value / drift_scale(loop, p)
    return value


# ────────────────────────────────────────────────────────────────────────────────
# Controller
# ────────────────────────────────────────────────────────────────────────────────
LoopLaw = Callable[..., LoopDecision]


class EngineController:
    """Runs the four loops once per control period, in cascade order."""

    def __init__(
        self,
        params: EngineParams,
        sample_period_s: float,
        loops: dict[LoopId, LoopConfig],
        estimators: dict[LoopId, LoopEstimator],
        channels: dict[str, AdcChannel],
    ):
        missing = [loop.value for loop in LoopId if loop not in loops]
        if missing:
            raise ConfigurationError(f"engine controller missing loop configs: {missing}")
        self.params = params
        self.T = sample_period_s
        self.loops = dict(loops)
        self.estimators = {loop: estimators.get(loop, LoopEstimator.build(AdaptConfig())) for loop in LoopId}
        self.channels = {ch: channels.get(ch) or AdcChannel.passthrough(ch) for ch in CHANNELS}

    def _run(self, loop: LoopId, law: LoopLaw, measured: PlantState, target, mu_x: float) -> LoopDecision:
        try:
            return law(measured, target, self.loops[loop], self.estimators[loop], mu_x, self.params, self.T)
        except DsmcError as e:
            e.add_note(f"loop: {loop.value}")
            raise
        except Exception as e:
            raise LoopError(loop.value, e) from e

    def step_all(self, analog: PlantState, targets: EngineTargets) -> ControllerOutputs:
        """Sample, predict, control and adapt for one period."""
        values: dict[str, float] = {}
        mu_x: dict[str, float] = {}
        for ch in CHANNELS:
            values[ch], unc = self.channels[ch].read(getattr(analog, ch))
            mu_x[ch] = unc.mu_total
        measured = PlantState(**values)

        decisions: dict[LoopId, LoopDecision] = {}
        decisions[LoopId.SPEED] = self._run(
            LoopId.SPEED, speed_control, measured, targets.omega_e, mu_x["omega_e"]
        )
        decisions[LoopId.AIR] = self._run(
            LoopId.AIR, airflow_control, measured, decisions[LoopId.SPEED].u, mu_x["m_a"]
        )
        decisions[LoopId.TEXH] = self._run(
            LoopId.TEXH, texh_control, measured, targets.t_exh, mu_x["t_exh"]
        )
        decisions[LoopId.FUEL] = self._run(
            LoopId.FUEL, fuel_control, measured, targets.afr, mu_x["mdot_f"]
        )

        for loop in LOOP_ORDER:
            d = decisions[loop]
            self.estimators[loop], clamped = self.estimators[loop].advance(d.f_nominal, d.s, self.T)
            if clamped:
                logger.debug("%s estimate clamped to its bound", loop.value)
                decisions[loop] = replace(d, clamped=True)

        return ControllerOutputs(
            measured=measured,
            mu_x=mu_x,
            mdot_ao=cylinder_air_flow(measured.m_a, measured.omega_e, self.params),
            decisions=decisions,
        )
