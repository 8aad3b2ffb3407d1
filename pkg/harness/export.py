"""
Trace and metrics files
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import TYPE_CHECKING, Any

import pandas as pd

if TYPE_CHECKING:
    from .runner import AbResult, ScenarioResult

logger = logging.getLogger(__name__)

TRACE_FLOAT_FORMAT = "%.17g"
FORMATS = ("csv", "json")


def clean_json(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: clean_json(v) for k, v in value.items()}
    if isinstance(value, list):
        return [clean_json(v) for v in value]
    return value


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise OSError(f"failed to write {path}: {e}") from e


def trace_path(out_dir: Path, name: str, variant: str, fmt: str) -> Path:
    return Path(out_dir) / f"{name}_{variant}_trace.{fmt}"


def write_trace(trace: pd.DataFrame, path: Path, fmt: str = "csv") -> Path:
    if fmt not in FORMATS:
        raise ValueError(f"unsupported format '{fmt}', expected one of {FORMATS}")
    path = Path(path)
    if fmt == "csv":
        _write_text(path, trace.to_csv(index=False, float_format=TRACE_FLOAT_FORMAT, lineterminator="\n"))
    else:
        records = clean_json(trace.to_dict(orient="records"))
        _write_text(path, json.dumps({"columns": list(trace.columns), "rows": records}, allow_nan=False))
    return path


def read_trace(path: Path) -> pd.DataFrame:
    path = Path(path)
    try:
        if path.suffix == ".json":
            payload = json.loads(path.read_text(encoding="utf-8"))
            return pd.DataFrame.from_records(payload["rows"], columns=payload["columns"]).astype(
                {c: float for c in payload["columns"] if c not in ("step",) and not c.startswith("saturated_")}
            )
        return pd.read_csv(path, float_precision="round_trip")
    except OSError as e:
        raise OSError(f"failed to read {path}: {e}") from e


def metrics_payload(result: "ScenarioResult") -> dict[str, Any]:
    return {
        "scenario": result.name,
        "variant": result.variant,
        "settle_skip_s": result.settle_skip_s,
        "n_steps": len(result.trace),
        "signals": result.metrics_dict(),
        "convergence": result.convergence.to_dict(orient="records"),
        "events": result.events.as_dict(),
    }


def export_result(result: "ScenarioResult", out_dir: Path, fmt: str = "csv") -> dict[str, Path]:
    """Trace file plus metrics JSON for one run."""
    out_dir = Path(out_dir)
    trace_file = write_trace(result.trace, trace_path(out_dir, result.name, result.variant, fmt), fmt)
    metrics_file = out_dir / f"{result.name}_{result.variant}_metrics.json"
    _write_text(metrics_file, json.dumps(clean_json(metrics_payload(result)), indent=2))
    logger.info("wrote %s and %s", trace_file, metrics_file)
    return {"trace": trace_file, "metrics": metrics_file}


def export_ab(ab: "AbResult", out_dir: Path, fmt: str = "csv") -> dict[str, Path]:
    """Both variants, the stacked summary table and the paired metrics JSON."""
    out_dir = Path(out_dir)
    paths: dict[str, Path] = {}
    for result in (ab.baseline, ab.compensated):
        files = export_result(result, out_dir, fmt)
        paths[f"{result.variant}_trace"] = files["trace"]
        paths[f"{result.variant}_metrics"] = files["metrics"]

    summary_file = out_dir / f"{ab.name}_ab_summary.csv"
    _write_text(summary_file, ab.summary.to_csv(index=False, float_format=TRACE_FLOAT_FORMAT, lineterminator="\n"))
    ab_file = out_dir / f"{ab.name}_ab_metrics.json"
    payload = {
        "scenario": ab.name,
        "baseline": ab.baseline.metrics_dict(),
        "compensated": ab.compensated.metrics_dict(),
        "improvement_percent": ab.improvement_percent(),
        "config_diff": ab.diffs,
    }
    _write_text(ab_file, json.dumps(clean_json(payload), indent=2))
    paths["summary"] = summary_file
    paths["ab_metrics"] = ab_file
    return paths
