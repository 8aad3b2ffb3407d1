from __future__ import annotations

from fastapi import APIRouter, HTTPException, Query

from harness.export import clean_json
from storage.duck import list_runs, load_metrics, load_trace, summary

router = APIRouter(prefix="/runs")


@router.get("", tags=["Run Retrieval"])
def get_runs():
    """List all registered runs"""
    try:
        runs = list_runs()
        return {"success": True, "runs": clean_json(runs.to_dict(orient="records"))}
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to list runs: {e}")


@router.get("/summary", tags=["Run Retrieval"])
def get_summary():
    """Metrics of every registered run, one row per signal"""
    try:
        table = summary()
        return {"success": True, "summary": clean_json(table.to_dict(orient="records"))}
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to build summary: {e}")


@router.get("/{run_id}/metrics", tags=["Run Retrieval"])
def get_run_metrics(run_id: str):
    try:
        metrics = load_metrics(run_id)
    except KeyError:
        raise HTTPException(status_code=404, detail=f"Run '{run_id}' not found")
    return {"success": True, "run_id": run_id, "metrics": clean_json(metrics.to_dict(orient="records"))}


@router.get("/{run_id}/trace", tags=["Run Retrieval"])
def get_run_trace(run_id: str, limit: int | None = Query(None, ge=1, description="Maximum rows")):
    """Trace rows of one run, ordered by step"""
    try:
        trace = load_trace(run_id, limit)
    except KeyError:
        raise HTTPException(status_code=404, detail=f"Run '{run_id}' not found")
    except ValueError as e:
        raise HTTPException(status_code=500, detail=str(e))
    return {
        "success": True,
        "run_id": run_id,
        "columns": list(trace.columns),
        "rows": clean_json(trace.to_dict(orient="records")),
    }
