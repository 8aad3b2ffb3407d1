"""
Four-state cold-start engine model, discretized with a fixed Euler step
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable

from dsmc.errors import ConfigurationError

logger = logging.getLogger(__name__)

# Surrogate fit: eta_vol stays within [0.5, 0.95] for m_a in [0, 0.02] kg
# and omega_e in [50, 400] rad/s.
DEFAULT_VOL_EFF_COEFFS: tuple[float, ...] = (
    0.03,  # k1
    0.0,  # k2
    0.0,  # k3
    -20.0,  # k4
    0.0,  # k5
    0.01,  # k6
    2.0,  # k7
    -2.5e-6,  # k8
    1.5e-3,  # k9
    0.6,  # k10
)

# (range_min, fsr) of each sensor
SENSOR_RANGES: dict[str, tuple[float, float]] = {
    "t_exh": (0.0, 1000.0),
    "mdot_f": (0.0, 0.01),
    "omega_e": (0.0, 600.0),
    "m_a": (0.0, 0.05),
}
DEFAULT_ADC_BITS = 10


class InjectionMode(str, Enum):
    NONE = "none"
    ADDITIVE = "additive"
    MULTIPLICATIVE = "multiplicative"


@dataclass(frozen=True)
class EngineParams:
    tau_e: float = 0.5
    tau_f: float = 0.06
    inertia_j: float = 0.2
    vol_eff_coeffs: tuple[float, ...] = DEFAULT_VOL_EFF_COEFFS
    afi_value: float = 1.0
    torque_gain: float = 30000.0

    def __post_init__(self):
        object.__setattr__(self, "vol_eff_coeffs", tuple(float(k) for k in self.vol_eff_coeffs))
        for name in ("tau_e", "tau_f", "inertia_j", "torque_gain"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be > 0, got {value}")
        if len(self.vol_eff_coeffs) != 10:
            raise ConfigurationError(
                f"vol_eff_coeffs needs k1..k10, got {len(self.vol_eff_coeffs)} values"
            )
        if not math.isfinite(self.afi_value):
            raise ConfigurationError(f"afi_value must be finite, got {self.afi_value}")


@dataclass(frozen=True)
class PlantState:
    t_exh: float
    mdot_f: float
    omega_e: float
    m_a: float

    def as_dict(self) -> dict[str, float]:
        return {
            "t_exh": self.t_exh,
            "mdot_f": self.mdot_f,
            "omega_e": self.omega_e,
            "m_a": self.m_a,
        }

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in self.as_dict().values())


CHANNELS: tuple[str, ...] = ("t_exh", "mdot_f", "omega_e", "m_a")


@dataclass(frozen=True)
class PlantInputs:
    delta_spark: float
    mdot_fc: float
    mdot_ai: float


@dataclass(frozen=True)
class UncertaintyInjection:
    """Plant-side model errors. Speed and air loops accept additive errors only."""

    alpha_texh: float = 0.0
    alpha_mdotf: float = 0.0
    alpha_omega: float = 0.0
    alpha_ma: float = 0.0
    beta_texh: float = 1.0
    beta_mdotf: float = 1.0
    texh_mode: InjectionMode = InjectionMode.NONE
    fuel_mode: InjectionMode = InjectionMode.NONE
    speed_mode: InjectionMode = InjectionMode.NONE
    air_mode: InjectionMode = InjectionMode.NONE

    def __post_init__(self):
        for name in ("texh_mode", "fuel_mode", "speed_mode", "air_mode"):
            object.__setattr__(self, name, InjectionMode(getattr(self, name)))
        for name in ("speed_mode", "air_mode"):
            if getattr(self, name) is InjectionMode.MULTIPLICATIVE:
                raise ConfigurationError(
                    f"{name.split('_')[0]} loop supports additive injection only"
                )


NO_INJECTION = UncertaintyInjection()


def volumetric_efficiency(m_a: float, omega_e: float, p: EngineParams) -> float:
    _, k2, k3, k4, k5, k6, k7, k8, k9, k10 = p.vol_eff_coeffs
    w = omega_e
    return (
        m_a * m_a * ((k2 * w + k3) * w + k4)
        + m_a * ((k5 * w + k6) * w + k7)
        + (k8 * w + k9) * w
        + k10
    )


def cylinder_air_flow(m_a: float, omega_e: float, p: EngineParams) -> float:
    k1 = p.vol_eff_coeffs[0]
    return k1 * volumetric_efficiency(m_a, omega_e, p) * m_a * omega_e


def torque_loss(omega_e: float) -> float:
    return 0.4 * omega_e + 100.0


@lru_cache(maxsize=64)
def check_discretization(p: EngineParams, T: float) -> bool:
    """Warn once per (params, T) when the step is not below both time constants."""
    limit = min(p.tau_e, p.tau_f)
    if T >= limit:
        logger.warning(
            "sample period %.6g s is not below min(tau_e, tau_f) = %.6g s; "
            "the Euler discretization may be inaccurate",
            T,
            limit,
        )
        return False
    return True


def step(
    state: PlantState,
    inputs: PlantInputs,
    inj: UncertaintyInjection,
    p: EngineParams,
    T: float,
    on_clamp: Callable[[str, float], None] | None = None,
) -> PlantState:
    """Advance all four states one Euler step from the state at step i."""
    check_discretization(p, T)
    afi = p.afi_value

    a = T / p.tau_e
    if inj.texh_mode is InjectionMode.MULTIPLICATIVE:
        t_exh = state.t_exh + a * (
            inj.beta_texh * (600.0 * afi - state.t_exh) + 7.5 * inputs.delta_spark * afi
        )
    elif inj.texh_mode is InjectionMode.ADDITIVE:
        t_exh = (1.0 - a) * state.t_exh + a * (
            (7.5 * inputs.delta_spark + 600.0) * afi + inj.alpha_texh
        )
    else:
        t_exh = (1.0 - a) * state.t_exh + a * (7.5 * inputs.delta_spark + 600.0) * afi

    b = T / p.tau_f
    if inj.fuel_mode is InjectionMode.MULTIPLICATIVE:
        mdot_f = state.mdot_f + b * (inputs.mdot_fc - inj.beta_mdotf * state.mdot_f)
    elif inj.fuel_mode is InjectionMode.ADDITIVE:
        mdot_f = state.mdot_f + b * (inputs.mdot_fc - state.mdot_f - inj.alpha_mdotf)
    else:
        mdot_f = state.mdot_f + b * (inputs.mdot_fc - state.mdot_f)

    engine_torque = p.torque_gain * state.m_a - torque_loss(state.omega_e)
    if inj.speed_mode is InjectionMode.ADDITIVE:
        engine_torque -= inj.alpha_omega
    omega_e = state.omega_e + (T / p.inertia_j) * engine_torque

    mdot_ao = cylinder_air_flow(state.m_a, state.omega_e, p)
    net_flow = inputs.mdot_ai - mdot_ao
    if inj.air_mode is InjectionMode.ADDITIVE:
        net_flow -= inj.alpha_ma
    m_a = state.m_a + net_flow * T

    if omega_e < 0:
        logger.debug("engine speed clamped at 0 (raw %.6g rad/s)", omega_e)
        if on_clamp:
            on_clamp("omega_e", omega_e)
        omega_e = 0.0
    if m_a < 0:
        logger.debug("manifold air mass clamped at 0 (raw %.6g kg)", m_a)
        if on_clamp:
            on_clamp("m_a", m_a)
        m_a = 0.0

    return PlantState(t_exh=t_exh, mdot_f=mdot_f, omega_e=omega_e, m_a=m_a)


def equilibrium_state(
    t_exh_d: float, omega_d: float, afr_d: float, p: EngineParams
) -> PlantState:
    """Nominal fixed point that holds the given desired values."""
    m_a = torque_loss(omega_d) / p.torque_gain
    mdot_f = cylinder_air_flow(m_a, omega_d, p) / afr_d
    return PlantState(t_exh=t_exh_d, mdot_f=mdot_f, omega_e=omega_d, m_a=m_a)
