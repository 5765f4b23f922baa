# smotecls/core/persist.py
import json
import math
from datetime import datetime, timezone
from typing import Any, Dict, Iterable

from smotecls.core.db import exec_many, exec_sql

_SCHEMA = (
    """
    CREATE TABLE IF NOT EXISTS runs (
      run_id VARCHAR(32) PRIMARY KEY,
      command VARCHAR(32) NOT NULL,
      seed BIGINT NOT NULL,
      version VARCHAR(16),
      started_utc VARCHAR(40),
      elapsed_s FLOAT,
      manifest TEXT
    )
    """,
    """
    CREATE TABLE IF NOT EXISTS metrics (
      run_id VARCHAR(32) NOT NULL,
      dataset VARCHAR(128) NOT NULL,
      strategy VARCHAR(32) NOT NULL,
      metric VARCHAR(16) NOT NULL,
      mean FLOAT,
      stderr FLOAT,
      repeats_ok INTEGER,
      repeats_failed INTEGER
    )
    """,
)


def _num(v: Any) -> float | None:
    try:
        f = float(v)
    except (TypeError, ValueError):
        return None
    return None if math.isnan(f) else f


def ensure_schema():
    for stmt in _SCHEMA:
        exec_sql(stmt)


def record_run(manifest: Dict[str, Any]):
    sql = """
    INSERT INTO runs (run_id, command, seed, version, started_utc, elapsed_s, manifest)
    VALUES (:run_id, :command, :seed, :version, :started_utc, :elapsed_s, :manifest);
    """
    exec_sql(
        sql,
        {
            "run_id": manifest["run_id"],
            "command": manifest["command"],
            "seed": int(manifest["seed"]),
            "version": manifest.get("version"),
            "started_utc": datetime.fromtimestamp(manifest.get("started_at", 0), tz=timezone.utc).isoformat(),
            "elapsed_s": manifest.get("elapsed_s"),
            "manifest": json.dumps(manifest, sort_keys=True),
        },
    )


def record_metrics(run_id: str, rows: Iterable[Dict[str, Any]], metrics: Iterable[str]):
    """One row per (dataset, strategy, metric) from a benchmark report table."""
    sql = """
    INSERT INTO metrics (run_id, dataset, strategy, metric, mean, stderr, repeats_ok, repeats_failed)
    VALUES (:run_id, :dataset, :strategy, :metric, :mean, :stderr, :repeats_ok, :repeats_failed);
    """
    names = list(metrics)
    payload = []
    for r in rows:
        for m in names:
            payload.append({
                "run_id": run_id,
                "dataset": r["dataset"],
                "strategy": r["strategy"],
                "metric": m,
                "mean": _num(r.get(f"{m}_mean")),
                "stderr": _num(r.get(f"{m}_stderr")),
                "repeats_ok": int(r.get("repeats_ok", 0)),
                "repeats_failed": int(r.get("repeats_failed", 0)),
            })
    exec_many(sql, payload)
