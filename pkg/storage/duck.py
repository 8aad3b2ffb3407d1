# storage/duck.py
import atexit
import pathlib
from threading import Lock

import duckdb
import pandas as pd

DB = pathlib.Path("data/duckdb/runs.duckdb")

_conn = None
_lock = Lock()


def set_database(path) -> None:
    """Point the registry at another DuckDB file, closing any open connection."""
    global DB
    close_connection()
    DB = pathlib.Path(path)


def connect():
    """Return the shared DuckDB connection (thread-safe)."""
    global _conn
    with _lock:
        if _conn is None:
            DB.parent.mkdir(parents=True, exist_ok=True)
            _conn = duckdb.connect(str(DB))
    return _conn


@atexit.register
def close_connection():
    """Close DuckDB connection on exit."""
    global _conn
    with _lock:
        if _conn is not None:
            _conn.close()
            _conn = None


def init_db():
    con = connect()
    with _lock:
        con.execute(
            """
            CREATE TABLE IF NOT EXISTS runs (
                run_id TEXT PRIMARY KEY,
                scenario TEXT NOT NULL,
                variant TEXT NOT NULL,
                kind TEXT NOT NULL,
                n_steps BIGINT,
                sample_period_s DOUBLE,
                trace_path TEXT,
                registered_at TIMESTAMP DEFAULT now()
            );
        """
        )
        con.execute(
            """
            CREATE TABLE IF NOT EXISTS metrics (
                run_id TEXT NOT NULL,
                signal TEXT NOT NULL,
                mean_abs_error DOUBLE,
                std_error DOUBLE,
                PRIMARY KEY (run_id, signal)
            );
        """
        )


def sanitize_id(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch == "_" else "_" for ch in name)


def run_id_for(scenario: str, variant: str) -> str:
    return sanitize_id(f"{scenario}_{variant}")


def table_name(run_id: str) -> str:
    return "tr_" + sanitize_id(run_id)


def register_run(result, trace_path=None) -> str:
    """Store run metadata, per-signal metrics and the trace table. Re-registering replaces."""
    init_db()
    con = connect()
    run_id = run_id_for(result.name, result.variant)
    tbl = table_name(run_id)
    path = str(trace_path) if trace_path is not None else None

    with _lock:
        if path is not None and path.endswith(".csv"):
            escaped = path.replace("'", "''")
            con.execute(
                f"CREATE OR REPLACE TABLE {tbl} AS SELECT * FROM read_csv_auto('{escaped}', sample_size=-1)"
            )
        else:
            con.register("trace_df", result.trace)
            con.execute(f"CREATE OR REPLACE TABLE {tbl} AS SELECT * FROM trace_df")
            con.unregister("trace_df")

        con.execute(
            """
            INSERT INTO runs(run_id, scenario, variant, kind, n_steps, sample_period_s, trace_path, registered_at)
            VALUES (?, ?, ?, ?, ?, ?, ?, now())
            ON CONFLICT(run_id) DO UPDATE SET
                scenario = excluded.scenario,
                variant = excluded.variant,
                kind = excluded.kind,
                n_steps = excluded.n_steps,
                sample_period_s = excluded.sample_period_s,
                trace_path = excluded.trace_path,
                registered_at = now();
        """,
            [
                run_id,
                result.name,
                result.variant,
                result.scenario.scenario.kind,
                len(result.trace),
                result.scenario.scenario.sample_period_s,
                path,
            ],
        )
        con.execute("DELETE FROM metrics WHERE run_id = ?", [run_id])
        for rec in result.metrics.to_dict(orient="records"):
            con.execute(
                "INSERT INTO metrics(run_id, signal, mean_abs_error, std_error) VALUES (?, ?, ?, ?)",
                [run_id, rec["signal"], rec["mean_abs_error"], rec["std_error"]],
            )

    return run_id


def list_runs() -> pd.DataFrame:
    """Registered runs, newest last."""
    init_db()
    con = connect()
    with _lock:
        return con.execute(
            """
            SELECT run_id, scenario, variant, kind, n_steps, sample_period_s, trace_path, registered_at
            FROM runs
            ORDER BY registered_at, run_id
        """
        ).df()


def _require_run(run_id: str) -> None:
    con = connect()
    with _lock:
        found = con.execute("SELECT 1 FROM runs WHERE run_id = ?", [run_id]).fetchone()
    if not found:
        raise KeyError(f"unknown run '{run_id}'")


def load_metrics(run_id: str) -> pd.DataFrame:
    init_db()
    _require_run(run_id)
    con = connect()
    with _lock:
        return con.execute(
            "SELECT signal, mean_abs_error, std_error FROM metrics WHERE run_id = ? ORDER BY signal",
            [run_id],
        ).df()


def load_trace(run_id: str, limit: int | None = None) -> pd.DataFrame:
    """Trace rows ordered by step."""
    init_db()
    _require_run(run_id)
    tbl = table_name(run_id)
    con = connect()
    query = f"SELECT * FROM {tbl} ORDER BY step"
    if limit is not None:
        query += f" LIMIT {int(limit)}"
    try:
        with _lock:
            return con.execute(query).df()
    except Exception as e:
        raise ValueError(f"Failed to load trace of run '{run_id}': {e}")


def summary() -> pd.DataFrame:
    """One row per scenario, variant and signal."""
    init_db()
    con = connect()
    with _lock:
        return con.execute(
            """
            SELECT r.scenario, r.variant, m.signal, m.mean_abs_error, m.std_error
            FROM metrics m
            JOIN runs r USING (run_id)
            ORDER BY r.scenario, m.signal, r.variant
        """
        ).df()


def get_tables():
    con = connect()
    with _lock:
        return [t[0] for t in con.execute("SHOW TABLES").fetchall() if t[0] not in ("runs", "metrics")]
