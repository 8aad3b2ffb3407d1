"""
Tracking-error and estimator-convergence statistics over simulation traces
"""

from __future__ import annotations

from typing import Any, Dict, List

import numpy as np
import pandas as pd

from dsmc.errors import EmptyWindowError

# slack on the settle-window boundary, as a fraction of one second
_T_EPS = 1e-9


def settled_window(trace: pd.DataFrame, settle_skip_s: float) -> pd.DataFrame:
    """Rows at or after settle_skip_s"""
    if trace.empty:
        return trace
    return trace[trace["t"] >= settle_skip_s - _T_EPS]


def tracking_error(trace: pd.DataFrame, signal: str) -> pd.Series:
    """analog - desired for one tracked signal"""
    return trace[f"{signal}_analog"] - trace[f"{signal}_desired"]


def compute_metrics(
    trace: pd.DataFrame, signal: str, settle_skip_s: float = 5.0
) -> tuple[float, float]:
    """Mean absolute error and population standard deviation after the settle window"""
    window = settled_window(trace, settle_skip_s)
    err = tracking_error(window, signal).dropna() if not window.empty else pd.Series(dtype=float)
    if err.empty:
        raise EmptyWindowError(
            f"no '{signal}' samples left after skipping {settle_skip_s} s"
        )
    values = err.to_numpy(dtype=float)
    return float(np.mean(np.abs(values))), float(np.std(values, ddof=0))


def metrics_table(
    trace: pd.DataFrame, signals: List[str], settle_skip_s: float = 5.0
) -> pd.DataFrame:
    """One row per signal with a non-empty window; signals without samples are left out"""
    rows: List[Dict[str, Any]] = []
    for signal in signals:
        try:
            mean_abs, std = compute_metrics(trace, signal, settle_skip_s)
        except EmptyWindowError:
            continue
        rows.append({"signal": signal, "mean_abs_error": mean_abs, "std_error": std})
    return pd.DataFrame(rows, columns=["signal", "mean_abs_error", "std_error"])


def improvement_percent(baseline: float, compensated: float) -> float:
    """Signed change relative to the baseline; negative means lower error"""
    if baseline == 0 or not np.isfinite(baseline):
        return float("nan")
    return 100.0 * (compensated - baseline) / baseline


def ab_summary(baseline: pd.DataFrame, compensated: pd.DataFrame) -> pd.DataFrame:
    """Both metric sets stacked, with percentage deltas on the compensated rows"""
    merged = baseline.merge(compensated, on="signal", suffixes=("_base", "_comp"))
    rows: List[Dict[str, Any]] = []
    for rec in merged.to_dict(orient="records"):
        rows.append(
            {
                "signal": rec["signal"],
                "variant": "baseline",
                "mean_abs_error": rec["mean_abs_error_base"],
                "std_error": rec["std_error_base"],
                "mean_abs_error_delta_percent": np.nan,
                "std_error_delta_percent": np.nan,
            }
        )
        rows.append(
            {
                "signal": rec["signal"],
                "variant": "compensated",
                "mean_abs_error": rec["mean_abs_error_comp"],
                "std_error": rec["std_error_comp"],
                "mean_abs_error_delta_percent": improvement_percent(
                    rec["mean_abs_error_base"], rec["mean_abs_error_comp"]
                ),
                "std_error_delta_percent": improvement_percent(
                    rec["std_error_base"], rec["std_error_comp"]
                ),
            }
        )
    return pd.DataFrame(
        rows,
        columns=[
            "signal",
            "variant",
            "mean_abs_error",
            "std_error",
            "mean_abs_error_delta_percent",
            "std_error_delta_percent",
        ],
    )


def convergence_report(
    trace: pd.DataFrame,
    loops: List[str],
    band: float = 0.02,
    check_time_s: float = 5.0,
) -> pd.DataFrame:
    """Entry time into, and settling time within, a relative band around each true estimate"""
    rows: List[Dict[str, Any]] = []
    if trace.empty:
        return pd.DataFrame(
            rows,
            columns=["loop", "true_value", "first_within_s", "settled_s", "within_at_check"],
        )
    t = trace["t"].to_numpy(dtype=float)
    for loop in loops:
        est_col, true_col = f"estimate_{loop}", f"estimate_{loop}_true"
        if est_col not in trace or true_col not in trace:
            continue
        truth = trace[true_col].to_numpy(dtype=float)
        if np.isnan(truth).all() or truth[0] == 0:
            continue
        true_value = float(truth[0])
        est = trace[est_col].to_numpy(dtype=float)
        inside = np.abs(est - true_value) <= band * abs(true_value)

        first = float(t[np.argmax(inside)]) if inside.any() else np.nan
        outside = np.flatnonzero(~inside)
        if outside.size == 0:
            settled = float(t[0])
        elif outside[-1] + 1 < len(t):
            settled = float(t[outside[-1] + 1])
        else:
            settled = np.nan
        check_idx = np.searchsorted(t, check_time_s - _T_EPS)
        within = bool(inside[check_idx]) if check_idx < len(t) else False
        rows.append(
            {
                "loop": loop,
                "true_value": true_value,
                "first_within_s": first,
                "settled_s": settled,
                "within_at_check": within,
            }
        )
    return pd.DataFrame(
        rows, columns=["loop", "true_value", "first_within_s", "settled_s", "within_at_check"]
    )
