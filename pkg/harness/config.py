"""
Scenario schema (TOML on disk, validated with pydantic) and its translation
into controller, plant and ADC objects.
"""

from __future__ import annotations

import logging
import math
import tomllib
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dsmc.adaptation import AdaptConfig, AdaptMode
from dsmc.adc import AdcChannel, AdcChannelConfig
from dsmc.errors import ConfigurationError
from engine.control import DEFAULT_ACTUATOR_LIMITS, LoopConfig, LoopId
from engine.plant import (
    CHANNELS,
    DEFAULT_ADC_BITS,
    DEFAULT_VOL_EFF_COEFFS,
    SENSOR_RANGES,
    EngineParams,
    InjectionMode,
    PlantState,
    UncertaintyInjection,
)

from .trajectory import TrajectoryKind, TrajectorySpec

logger = logging.getLogger(__name__)

SCALAR_CHANNEL = "x"
SCALAR_LOOP = "x"
ENGINE_TRAJECTORIES = ("t_exh", "omega_e", "afr")


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ────────────────────────────────────────────────────────────────────────────────
# Tables
# ────────────────────────────────────────────────────────────────────────────────
class ScenarioHeader(_Model):
    name: str = Field(min_length=1)
    kind: Literal["scalar", "engine"]
    duration_s: float = Field(ge=0)
    sample_period_s: float = Field(gt=0)
    seed: int = 0
    settle_skip_s: float = Field(default=5.0, ge=0)
    ab: bool = False
    monitor: bool = True

    @property
    def n_steps(self) -> int:
        return round(self.duration_s / self.sample_period_s)

    @model_validator(mode="after")
    def _whole_steps(self):
        n = self.duration_s / self.sample_period_s
        if not math.isfinite(n) or abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValueError(
                f"duration_s={self.duration_s} is not a whole number of "
                f"sample periods ({self.sample_period_s})"
            )
        return self


class AdcSettings(_Model):
    passthrough: bool = False
    bits: int = Field(default=DEFAULT_ADC_BITS, ge=1)
    fsr: float | None = Field(default=None, gt=0)
    range_min: float | None = None


class AdaptSettings(_Model):
    mode: AdaptMode = AdaptMode.NONE
    gain: float = Field(default=1.0, gt=0)
    initial: float | None = None
    bound: float | None = Field(default=None, gt=0)
    frozen: bool = False


class LoopSettings(_Model):
    rho: float = Field(default=0.5, gt=0, lt=1)
    adc_compensation: bool = True
    actuator_limits: tuple[float, float] | None = None
    adapt: AdaptSettings = AdaptSettings()

    @model_validator(mode="after")
    def _ordered_limits(self):
        if self.actuator_limits is not None and self.actuator_limits[0] > self.actuator_limits[1]:
            raise ValueError(f"actuator_limits must be [lo, hi], got {list(self.actuator_limits)}")
        return self


class InjectionSettings(_Model):
    mode: InjectionMode = InjectionMode.NONE
    alpha: float = 0.0
    beta: float = 1.0


class TrajectorySettings(_Model):
    kind: TrajectoryKind
    breakpoints: list[tuple[float, float]] = Field(min_length=1)
    dither: float = Field(default=0.0, ge=0)

    def to_spec(self) -> TrajectorySpec:
        return TrajectorySpec(self.kind, tuple(self.breakpoints), self.dither)


class InitialEngineState(_Model):
    t_exh: float
    mdot_f: float = Field(ge=0)
    omega_e: float = Field(ge=0)
    m_a: float = Field(ge=0)


class EngineSettings(_Model):
    tau_e: float = Field(default=0.5, gt=0)
    tau_f: float = Field(default=0.06, gt=0)
    inertia_j: float = Field(default=0.2, gt=0)
    vol_eff_coeffs: tuple[float, ...] = DEFAULT_VOL_EFF_COEFFS
    afi_value: float = 1.0
    torque_gain: float = Field(default=30000.0, gt=0)
    initial: Literal["equilibrium"] | InitialEngineState = "equilibrium"

    def params(self) -> EngineParams:
        return EngineParams(
            tau_e=self.tau_e,
            tau_f=self.tau_f,
            inertia_j=self.inertia_j,
            vol_eff_coeffs=self.vol_eff_coeffs,
            afi_value=self.afi_value,
            torque_gain=self.torque_gain,
        )


class ScalarSettings(_Model):
    """x(i+1) = x + T·f_act(x) + g·u·T with f(x) = a·x + b·sin(x)"""

    a: float = 0.0
    b: float = 0.0
    g: float = 1.0
    x0: float = 0.0


class OutputSettings(_Model):
    dir: str = "runs"
    format: Literal["csv", "json"] = "csv"


# ────────────────────────────────────────────────────────────────────────────────
# Scenario
# ────────────────────────────────────────────────────────────────────────────────
class Scenario(_Model):
    scenario: ScenarioHeader
    adc: dict[str, AdcSettings] = {}
    loops: dict[str, LoopSettings] = {}
    injection: dict[str, InjectionSettings] = {}
    trajectories: dict[str, TrajectorySettings] = {}
    engine: EngineSettings | None = None
    scalar: ScalarSettings | None = None
    output: OutputSettings = OutputSettings()

    @model_validator(mode="after")
    def _consistent_kind(self):
        if self.scenario.kind == "engine":
            loops, channels, required = {loop.value for loop in LoopId}, set(CHANNELS), set(ENGINE_TRAJECTORIES)
            if self.scalar is not None:
                raise ValueError("[scalar] table is not valid in an engine scenario")
        else:
            loops, channels, required = {SCALAR_LOOP}, {SCALAR_CHANNEL}, {SCALAR_CHANNEL}
            if self.engine is not None:
                raise ValueError("[engine] table is not valid in a scalar scenario")

        for table, keys, allowed in (
            ("loops", self.loops, loops),
            ("injection", self.injection, loops),
            ("adc", self.adc, channels),
            ("trajectories", self.trajectories, required),
        ):
            unknown = set(keys) - allowed
            if unknown:
                raise ValueError(f"unknown [{table}] entries {sorted(unknown)}; expected {sorted(allowed)}")
        missing = required - set(self.trajectories)
        if missing:
            raise ValueError(f"missing trajectories: {sorted(missing)}")

        for name, adc in self.adc.items():
            if not adc.passthrough and adc.fsr is None and name not in SENSOR_RANGES:
                raise ValueError(f"[adc.{name}] needs fsr unless passthrough = true")
        for loop in ("speed", "air"):
            inj = self.injection.get(loop)
            if inj is not None and inj.mode is InjectionMode.MULTIPLICATIVE:
                raise ValueError(f"{loop} loop supports additive injection only")
        return self

    # convenience accessors
    @property
    def name(self) -> str:
        return self.scenario.name

    @property
    def n_steps(self) -> int:
        return self.scenario.n_steps

    @property
    def loop_names(self) -> list[str]:
        if self.scenario.kind == "engine":
            return [loop.value for loop in LoopId]
        return [SCALAR_LOOP]

    def loop_settings(self, name: str) -> LoopSettings:
        return self.loops.get(name, LoopSettings())


# ────────────────────────────────────────────────────────────────────────────────
# Loading
# ────────────────────────────────────────────────────────────────────────────────
def parse_scenario(data: dict[str, Any], source: str = "<memory>") -> Scenario:
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid scenario {source}: {e}") from e


def load_scenario_text(text: str, source: str = "<memory>") -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"malformed TOML in {source}: {e}") from e
    return parse_scenario(data, source)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read scenario file {path}: {e}") from e
    return load_scenario_text(text, str(path))


# ────────────────────────────────────────────────────────────────────────────────
# Variants
# ────────────────────────────────────────────────────────────────────────────────
def with_compensation(sc: Scenario, enabled: bool) -> Scenario:
    """Copy of the scenario with adc_compensation set on every loop."""
    loops = {
        name: sc.loop_settings(name).model_copy(update={"adc_compensation": enabled})
        for name in sc.loop_names
    }
    return sc.model_copy(update={"loops": loops})


def _flatten(value: Any, prefix: str = "") -> dict[str, Any]:
    if isinstance(value, dict):
        out: dict[str, Any] = {}
        for key, item in value.items():
            out.update(_flatten(item, f"{prefix}{key}."))
        return out
    return {prefix.rstrip("."): value}


def diff_configs(a: Scenario, b: Scenario) -> list[str]:
    """Dotted paths whose values differ between two scenarios (defaults filled in)."""
    fa = _flatten(with_loops_filled(a).model_dump(mode="json"))
    fb = _flatten(with_loops_filled(b).model_dump(mode="json"))
    return sorted(k for k in fa.keys() | fb.keys() if fa.get(k) != fb.get(k))


def with_loops_filled(sc: Scenario) -> Scenario:
    return sc.model_copy(update={"loops": {n: sc.loop_settings(n) for n in sc.loop_names}})


def check_ab_isolation(baseline: Scenario, compensated: Scenario) -> list[str]:
    diffs = diff_configs(baseline, compensated)
    foreign = [d for d in diffs if not d.endswith(".adc_compensation")]
    if foreign:
        raise ConfigurationError(f"A/B variants differ beyond adc_compensation: {foreign}")
    return diffs


# ────────────────────────────────────────────────────────────────────────────────
# Runtime objects
# ────────────────────────────────────────────────────────────────────────────────
def adc_channel(sc: Scenario, name: str) -> AdcChannel:
    settings = sc.adc.get(name)
    T = sc.scenario.sample_period_s
    if sc.scenario.kind == "scalar":
        if settings is None or settings.passthrough:
            return AdcChannel.passthrough(name)
        return AdcChannel(
            name,
            AdcChannelConfig(T, settings.bits, settings.fsr, settings.range_min or 0.0),
        )

    range_min, fsr = SENSOR_RANGES[name]
    if settings is None:
        return AdcChannel(name, AdcChannelConfig(T, DEFAULT_ADC_BITS, fsr, range_min))
    if settings.passthrough:
        return AdcChannel.passthrough(name)
    return AdcChannel(
        name,
        AdcChannelConfig(
            T,
            settings.bits,
            settings.fsr if settings.fsr is not None else fsr,
            settings.range_min if settings.range_min is not None else range_min,
        ),
    )


def adapt_config(settings: AdaptSettings) -> AdaptConfig:
    return AdaptConfig(
        mode=settings.mode,
        gain=settings.gain,
        initial=settings.initial,
        bound=settings.bound,
        frozen=settings.frozen,
    )


def loop_config(sc: Scenario, name: str) -> LoopConfig:
    settings = sc.loop_settings(name)
    limits = settings.actuator_limits
    if limits is None and sc.scenario.kind == "engine":
        limits = DEFAULT_ACTUATOR_LIMITS[LoopId(name)]
    return LoopConfig(
        rho=settings.rho,
        adapt=adapt_config(settings.adapt),
        adc_compensation=settings.adc_compensation,
        actuator_limits=tuple(limits) if limits is not None else None,
    )


def engine_injection(sc: Scenario) -> UncertaintyInjection:
    def get(loop: str) -> InjectionSettings:
        return sc.injection.get(loop, InjectionSettings())

    texh, fuel, speed, air = get("texh"), get("fuel"), get("speed"), get("air")
    return UncertaintyInjection(
        alpha_texh=texh.alpha,
        alpha_mdotf=fuel.alpha,
        alpha_omega=speed.alpha,
        alpha_ma=air.alpha,
        beta_texh=texh.beta,
        beta_mdotf=fuel.beta,
        texh_mode=texh.mode,
        fuel_mode=fuel.mode,
        speed_mode=speed.mode,
        air_mode=air.mode,
    )


def engine_settings(sc: Scenario) -> EngineSettings:
    return sc.engine or EngineSettings()


def explicit_initial_state(settings: EngineSettings) -> PlantState | None:
    if isinstance(settings.initial, InitialEngineState):
        init = settings.initial
        return PlantState(t_exh=init.t_exh, mdot_f=init.mdot_f, omega_e=init.omega_e, m_a=init.m_a)
    return None
