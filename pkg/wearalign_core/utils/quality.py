# wearalign_core/utils/quality.py
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict

import duckdb
import pandas as pd

from wearalign_core.config.path_utils import to_abs
from wearalign_core.data.store import INDEX, read_manifest


def _fail_if(cond: bool, msg: str):
    if cond:
        raise AssertionError(msg)


def _connect(store: str | Path) -> duckdb.DuckDBPyConnection:
    index = pd.read_csv(to_abs(store) / INDEX, dtype={"user_id": str, "window_id": str})
    con = duckdb.connect()
    con.register("idx", index)
    return con


def check_store(store: str | Path) -> pd.DataFrame:
    """SQL checks over index.csv; returns windows per user. Raises AssertionError on a violation."""
    manifest = read_manifest(store)
    n_classes = len(manifest["class_names"])
    con = _connect(store)
    try:
        nulls = con.execute("""
          SELECT COUNT(*) FROM idx
          WHERE user_id IS NULL OR window_id IS NULL OR label IS NULL
        """).fetchone()[0]
        _fail_if(nulls > 0, f"[store] Found {nulls} NULLs in (user_id/window_id/label)")

        dups = con.execute("""
          SELECT COUNT(*) FROM (
            SELECT window_id, COUNT(*) c FROM idx GROUP BY 1 HAVING COUNT(*) > 1
          )
        """).fetchone()[0]
        _fail_if(dups > 0, f"[store] Found {dups} duplicate window ids")

        bad = con.execute("SELECT COUNT(*) FROM idx WHERE label < 0 OR label >= ?", [n_classes]).fetchone()[0]
        _fail_if(bad > 0, f"[store] Found {bad} labels outside 0..{n_classes - 1}")

        stats = con.execute("""
          SELECT user_id, COUNT(*) AS n_windows, COUNT(DISTINCT label) AS n_labels
          FROM idx GROUP BY 1 ORDER BY 1
        """).fetchdf()
        listed = {str(u["user_id"]): int(u["n_windows"]) for u in manifest["users"]}
        found = dict(zip(stats["user_id"], stats["n_windows"].astype(int)))
        empty = sorted(u for u, n in listed.items() if n == 0 or found.get(u, 0) == 0)
        _fail_if(bool(empty), f"[store] Users with zero windows: {empty}")
        _fail_if(found != listed, "[store] index.csv disagrees with manifest window counts")
        return stats
    finally:
        con.close()


def store_summary(store: str | Path) -> Dict[str, Any]:
    """Users, windows per user and the class histogram (class names from the manifest)."""
    manifest = read_manifest(store)
    names = manifest["class_names"]
    con = _connect(store)
    try:
        per_user = con.execute("SELECT user_id, COUNT(*) AS n FROM idx GROUP BY 1 ORDER BY 1").fetchall()
        hist = con.execute("SELECT label, COUNT(*) AS n FROM idx GROUP BY 1 ORDER BY 1").fetchall()
    finally:
        con.close()
    return {
        "users": len(per_user),
        "activities": len(names),
        "windows": int(sum(n for _, n in per_user)),
        "windows_per_user": {str(u): int(n) for u, n in per_user},
        "class_histogram": {names[int(c)]: int(n) for c, n in hist},
    }
