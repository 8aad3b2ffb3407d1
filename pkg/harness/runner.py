"""
Closed-loop scenario runners: single runs, baseline/compensated pairs and
directory sweeps.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from analytics.metrics import ab_summary, convergence_report, metrics_table
from dsmc.adaptation import LyapunovMonitor
from dsmc.errors import NumericFailure, TrajectoryError
from engine.control import (
    LOOP_CHANNEL,
    EngineController,
    EngineTargets,
    LoopId,
    build_estimator,
    to_physical,
)
from engine.plant import CHANNELS, check_discretization, cylinder_air_flow, equilibrium_state
from engine.plant import step as plant_step

from .config import (
    Scenario,
    adc_channel,
    check_ab_isolation,
    engine_injection,
    engine_settings,
    explicit_initial_state,
    load_scenario,
    loop_config,
    with_compensation,
)
from .events import RunEvents
from .scalar import SCALAR_COLUMNS, run_scalar
from .trajectory import sample

logger = logging.getLogger(__name__)

ENGINE_SIGNALS = ["t_exh", "mdot_f", "omega_e", "m_a", "afr"]
SCALAR_SIGNALS = ["x"]


@dataclass
class ScenarioResult:
    scenario: Scenario
    variant: str
    trace: pd.DataFrame
    metrics: pd.DataFrame
    convergence: pd.DataFrame
    events: RunEvents = field(default_factory=RunEvents)
    settle_skip_s: float = 5.0

    @property
    def name(self) -> str:
        return self.scenario.name

    @property
    def signals(self) -> list[str]:
        return SCALAR_SIGNALS if self.scenario.scenario.kind == "scalar" else ENGINE_SIGNALS

    def metrics_dict(self) -> dict[str, dict[str, float]]:
        return {
            rec["signal"]: {
                "mean_abs_error": rec["mean_abs_error"],
                "std_error": rec["std_error"],
            }
            for rec in self.metrics.to_dict(orient="records")
        }


@dataclass
class AbResult:
    baseline: ScenarioResult
    compensated: ScenarioResult
    summary: pd.DataFrame
    diffs: list[str]

    @property
    def name(self) -> str:
        return self.baseline.name

    def improvement_percent(self) -> dict[str, dict[str, float]]:
        comp = self.summary[self.summary["variant"] == "compensated"]
        return {
            rec["signal"]: {
                "mean_abs_error": rec["mean_abs_error_delta_percent"],
                "std_error": rec["std_error_delta_percent"],
            }
            for rec in comp.to_dict(orient="records")
        }


# ────────────────────────────────────────────────────────────────────────────────
# Engine loop
# ────────────────────────────────────────────────────────────────────────────────
def _engine_columns() -> list[str]:
    cols = ["step", "t"]
    for ch in CHANNELS:
        cols += [f"{ch}_analog", f"{ch}_measured", f"mu_x_{ch}", f"{ch}_desired", f"{ch}_desired_next"]
    for loop in LoopId:
        key = loop.value
        cols += [
            f"s_{key}",
            f"u_{key}",
            f"u_{key}_baseline",
            f"mu_u_{key}",
            f"estimate_{key}",
            f"estimate_{key}_true",
            f"lyap_v_{key}",
            f"lyap_dv_{key}",
            f"lyap_first_order_{key}",
            f"saturated_{key}",
        ]
    return cols + ["afr_analog", "afr_desired", "mdot_ao"]


ENGINE_COLUMNS = _engine_columns()


def run_engine(sc: Scenario, strict: bool = False) -> tuple[pd.DataFrame, RunEvents]:
    header = sc.scenario
    T, n = header.sample_period_s, sc.n_steps
    settings = engine_settings(sc)
    p = settings.params()
    check_discretization(p, T)
    inj = engine_injection(sc)

    rng = np.random.default_rng(header.seed)
    t_exh_d = sample(sc.trajectories["t_exh"].to_spec(), n, T, rng)
    omega_d = sample(sc.trajectories["omega_e"].to_spec(), n, T, rng)
    afr_d = sample(sc.trajectories["afr"].to_spec(), n, T, rng)
    if not np.all(afr_d > 0):
        raise TrajectoryError("desired AFR must stay > 0 over the whole run")

    loops = {LoopId(name): loop_config(sc, name) for name in sc.loop_names}
    estimators = {loop: build_estimator(loop, cfg, inj, p) for loop, cfg in loops.items()}
    channels = {ch: adc_channel(sc, ch) for ch in CHANNELS}
    controller = EngineController(p, T, loops, estimators, channels)

    monitors: dict[LoopId, LyapunovMonitor] = {}
    if header.monitor:
        for loop, est in controller.estimators.items():
            if est.error is not None:
                monitors[loop] = LyapunovMonitor(loop.value, est.config.gain, loops[loop].rho, strict=strict)

    state = explicit_initial_state(settings) or equilibrium_state(t_exh_d[0], omega_d[0], afr_d[0], p)
    events = RunEvents()
    rows: list[dict[str, Any]] = []
    for i in range(n):
        targets = EngineTargets(
            t_exh=(t_exh_d[i], t_exh_d[i + 1]),
            omega_e=(omega_d[i], omega_d[i + 1]),
            afr=(afr_d[i], afr_d[i + 1]),
        )
        out = controller.step_all(state, targets)

        row: dict[str, Any] = {"step": i, "t": i * T}
        for ch in CHANNELS:
            row[f"{ch}_analog"] = getattr(state, ch)
            row[f"{ch}_measured"] = getattr(out.measured, ch)
            row[f"mu_x_{ch}"] = out.mu_x[ch]
        for loop, d in out.decisions.items():
            key, ch = loop.value, LOOP_CHANNEL[loop]
            mode = controller.estimators[loop].mode
            row[f"{ch}_desired"] = d.x_d
            row[f"{ch}_desired_next"] = d.x_d_next
            record = monitors[loop].observe(i, d.s, d.estimate_error, d.clamped) if loop in monitors else None
            if d.saturated:
                events.saturations[key] += 1
            if d.clamped:
                events.estimate_clamps[key] += 1
            row.update(
                {
                    f"s_{key}": d.s,
                    f"u_{key}": d.u,
                    f"u_{key}_baseline": d.u_baseline,
                    f"mu_u_{key}": d.mu_u,
                    f"estimate_{key}": to_physical(loop, mode, d.estimate, p),
                    f"estimate_{key}_true": to_physical(loop, mode, controller.estimators[loop].true_value, p),
                    f"lyap_v_{key}": record.v if record else math.nan,
                    f"lyap_dv_{key}": record.delta_v if record else math.nan,
                    f"lyap_first_order_{key}": record.first_order if record else math.nan,
                    f"saturated_{key}": int(d.saturated),
                }
            )
        mdot_ao = cylinder_air_flow(state.m_a, state.omega_e, p)
        row["afr_analog"] = mdot_ao / state.mdot_f if state.mdot_f > 0 else math.nan
        row["afr_desired"] = afr_d[i]
        row["mdot_ao"] = mdot_ao

        inputs = out.inputs()
        bad = [k for k, v in vars(inputs).items() if not math.isfinite(v)]
        if bad:
            raise NumericFailure(f"non-finite control {bad[0]} at step {i}", step=i, signal=bad[0])
        state = plant_step(state, inputs, inj, p, T, on_clamp=events.state_clamp)
        if not state.is_finite():
            bad = [k for k, v in state.as_dict().items() if not math.isfinite(v)]
            raise NumericFailure(f"non-finite state {bad[0]} after step {i}", step=i, signal=bad[0])
        rows.append(row)

    for loop, monitor in monitors.items():
        events.violations[loop.value] = monitor.violations
    return pd.DataFrame(rows, columns=ENGINE_COLUMNS), events


# ────────────────────────────────────────────────────────────────────────────────
# Entry points
# ────────────────────────────────────────────────────────────────────────────────
def run_scenario(
    sc: Scenario,
    strict: bool = False,
    settle_skip_s: float | None = None,
    variant: str = "single",
) -> ScenarioResult:
    """Run one scenario to completion; the trace is a pure function of the scenario."""
    skip = sc.scenario.settle_skip_s if settle_skip_s is None else settle_skip_s
    label = f"{sc.name}[{variant}]"
    logger.info("running %s: %s, %d steps", label, sc.scenario.kind, sc.n_steps)

    if sc.scenario.kind == "scalar":
        trace, events = run_scalar(sc, strict=strict)
        signals, loops = SCALAR_SIGNALS, ["x"]
    else:
        trace, events = run_engine(sc, strict=strict)
        signals, loops = ENGINE_SIGNALS, [loop.value for loop in LoopId]

    metrics = metrics_table(trace, signals, skip)
    if len(metrics) < len(signals) and not trace.empty:
        logger.warning("%s: settle window of %.3g s leaves no samples for some signals", label, skip)
    convergence = convergence_report(trace, loops, check_time_s=skip)
    events.log_summary(label, sc.n_steps)
    return ScenarioResult(
        scenario=sc,
        variant=variant,
        trace=trace,
        metrics=metrics,
        convergence=convergence,
        events=events,
        settle_skip_s=skip,
    )


def run_ab(sc: Scenario, strict: bool = False, settle_skip_s: float | None = None) -> AbResult:
    """Baseline and compensated variants that differ only in adc_compensation."""
    baseline_sc = with_compensation(sc, False)
    compensated_sc = with_compensation(sc, True)
    diffs = check_ab_isolation(baseline_sc, compensated_sc)
    baseline = run_scenario(baseline_sc, strict, settle_skip_s, variant="baseline")
    compensated = run_scenario(compensated_sc, strict, settle_skip_s, variant="compensated")
    summary = ab_summary(baseline.metrics, compensated.metrics)
    return AbResult(baseline, compensated, summary, diffs)


def _sweep_one(path: str, out_dir: str, fmt: str | None, settle_skip_s: float | None, strict: bool) -> list[dict]:
    from .export import export_ab, export_result

    sc = load_scenario(path)
    out = Path(out_dir)
    if sc.scenario.ab:
        ab = run_ab(sc, strict, settle_skip_s)
        export_ab(ab, out, fmt or sc.output.format)
        frame = ab.summary
    else:
        result = run_scenario(sc, strict, settle_skip_s)
        export_result(result, out, fmt or sc.output.format)
        frame = result.metrics.assign(variant=result.variant)
    return frame.assign(scenario=sc.name).to_dict(orient="records")


def sweep(
    directory: str | Path,
    out_dir: str | Path,
    fmt: str | None = None,
    settle_skip_s: float | None = None,
    strict: bool = False,
    jobs: int = 1,
) -> pd.DataFrame:
    """Run every *.toml scenario in a directory, one scenario per worker."""
    paths = sorted(str(p) for p in Path(directory).glob("*.toml"))
    if not paths:
        logger.warning("no scenario files found in %s", directory)
    args = [(p, str(out_dir), fmt, settle_skip_s, strict) for p in paths]
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_one, *zip(*args)))
    else:
        chunks = [_sweep_one(*a) for a in args]

    records = [rec for chunk in chunks for rec in chunk]
    columns = ["scenario", "signal", "variant", "mean_abs_error", "std_error"]
    summary = pd.DataFrame(records)
    if summary.empty:
        return pd.DataFrame(columns=columns)
    ordered = columns + [c for c in summary.columns if c not in columns]
    return summary[ordered]


__all__ = [
    "ENGINE_COLUMNS",
    "SCALAR_COLUMNS",
    "AbResult",
    "ScenarioResult",
    "run_ab",
    "run_engine",
    "run_scenario",
    "sweep",
]
