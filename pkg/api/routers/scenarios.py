from __future__ import annotations

from pathlib import Path

from fastapi import APIRouter, File, HTTPException, Query, UploadFile
from fastapi.concurrency import run_in_threadpool

from dsmc.errors import ConfigurationError, DsmcError, InvariantViolation
from harness.config import load_scenario_text
from harness.export import clean_json, export_ab, export_result
from harness.runner import run_ab, run_scenario
from storage.duck import register_run

router = APIRouter(prefix="/scenarios")

# Trace and metrics files of API runs
RUNS_DIR = Path("data/runs")


# ────────────────────────────────────────────────────────────────────────────────
# Utility Functions
# ────────────────────────────────────────────────────────────────────────────────
async def _read_scenario(file: UploadFile):
    if not file.filename:
        raise HTTPException(status_code=400, detail="Filename missing or invalid")
    if not file.filename.lower().endswith(".toml"):
        raise HTTPException(status_code=400, detail="Only TOML scenario files are supported")
    content = await file.read()
    try:
        text = content.decode("utf-8")
    except UnicodeDecodeError:
        raise HTTPException(status_code=400, detail="Scenario file is not valid UTF-8")
    return load_scenario_text(text, source=file.filename)


def _error_response(e: Exception) -> HTTPException:
    if isinstance(e, HTTPException):
        return e
    if isinstance(e, ConfigurationError):
        return HTTPException(status_code=400, detail=f"Invalid scenario: {e}")
    if isinstance(e, InvariantViolation):
        return HTTPException(status_code=422, detail=f"Invariant violation: {e}")
    if isinstance(e, DsmcError):
        return HTTPException(status_code=422, detail=f"Simulation failed: {e}")
    return HTTPException(status_code=500, detail=f"Run failed: {e}")


def _run_summary(result, run_id: str) -> dict:
    return {
        "run_id": run_id,
        "scenario": result.name,
        "variant": result.variant,
        "n_steps": len(result.trace),
        "metrics": result.metrics_dict(),
        "events": result.events.as_dict(),
    }


# ────────────────────────────────────────────────────────────────────────────────
# Scenario Runs
# ────────────────────────────────────────────────────────────────────────────────
def _execute_single(sc, strict: bool) -> dict:
    result = run_scenario(sc, strict=strict)
    paths = export_result(result, RUNS_DIR, "csv")
    run_id = register_run(result, paths["trace"])
    return clean_json({"success": True, **_run_summary(result, run_id)})


def _execute_ab(sc, strict: bool) -> dict:
    ab = run_ab(sc, strict=strict)
    paths = export_ab(ab, RUNS_DIR, "csv")
    baseline_id = register_run(ab.baseline, paths["baseline_trace"])
    compensated_id = register_run(ab.compensated, paths["compensated_trace"])
    return clean_json({
        "success": True,
        "scenario": ab.name,
        "baseline": _run_summary(ab.baseline, baseline_id),
        "compensated": _run_summary(ab.compensated, compensated_id),
        "improvement_percent": ab.improvement_percent(),
        "config_diff": ab.diffs,
    })


@router.post("/run", tags=["Scenario Runs"])
async def run_uploaded(
    file: UploadFile = File(...),
    strict: bool = Query(False, description="Abort on Lyapunov monitor violations"),
):
    """
    Run an uploaded TOML scenario
    Exports the trace, registers the run and returns its metrics
    """
    try:
        sc = await _read_scenario(file)
        return await run_in_threadpool(_execute_single, sc, strict)
    except Exception as e:
        raise _error_response(e)


@router.post("/ab", tags=["Scenario Runs"])
async def run_uploaded_ab(
    file: UploadFile = File(...),
    strict: bool = Query(False, description="Abort on Lyapunov monitor violations"),
):
    """Run the baseline/compensated pair of an uploaded scenario"""
    try:
        sc = await _read_scenario(file)
        return await run_in_threadpool(_execute_ab, sc, strict)
    except Exception as e:
        raise _error_response(e)
