# wearalign_core/data/store.py
"""
Processed-window store (format version 1). Layout on disk, see docs/store_format.md:

    <store>/manifest.yaml        geometry, layout, classes, users, dataset-wide stats
    <store>/index.csv            user_id, window_id, label (one row per window, store order)
    <store>/windows/<user>.npy   float64 (N_u, l, C), channels in sensor order
    <store>/labels/<user>.npy    int64 (N_u,)

Windows are cleaned but not normalized; the harness normalizes per fold.
Nothing time-dependent is written, so a rerun over unchanged inputs is byte-identical.
"""
from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pandas as pd
import yaml

from wearalign_core.config.path_utils import safe_filename, to_abs
from wearalign_core.data.cleaning import ChannelStats
from wearalign_core.data.layouts import SensorLayout
from wearalign_core.data.windows import WindowSet
from wearalign_core.utils.app_logging import log_kv, setup_logger
from wearalign_core.utils.errors import FormatError, MissingFile, ShapeMismatch, StoreExists

logger = setup_logger(__name__)

STORE_FORMAT_VERSION = 1
MANIFEST = "manifest.yaml"
INDEX = "index.csv"


@dataclass(frozen=True)
class StoredDataset:
    layout: SensorLayout
    windows: WindowSet
    stats: ChannelStats
    window_seconds: float
    overlap_seconds: float
    step_frames: int

    @property
    def users(self) -> List[str]:
        return self.windows.users

    @property
    def n_classes(self) -> int:
        return self.layout.n_classes


def _same_store(a: Path, b: Path) -> bool:
    def files(root: Path) -> Dict[str, bytes]:
        return {p.relative_to(root).as_posix(): p.read_bytes() for p in root.rglob("*") if p.is_file()}
    return files(a) == files(b)


def check_store_target(path: str | Path) -> None:
    """A store only ever replaces an empty directory or another store; anything else is refused."""
    target = to_abs(path)
    if target.is_file():
        raise StoreExists(f"{target} is a file, not a store directory")
    if not target.exists() or not any(target.iterdir()):
        return
    if not (target / MANIFEST).exists():
        raise StoreExists(f"{target} is not empty and holds no {MANIFEST}; refusing to replace it")


def write_store(path: str | Path, dataset: StoredDataset, overwrite: bool = False) -> Path:
    """
    Write to `<path>.partial` and move into place, so a failed run leaves no store.
    An existing store is replaced only with `overwrite`, or when the rewrite is
    byte-identical (same inputs, same settings).
    """
    target = to_abs(path)
    check_store_target(target)
    ws = dataset.windows
    if ws.channel_counts != dataset.layout.channel_counts:
        raise ShapeMismatch(f"windows carry channels {ws.channel_counts}, layout {dataset.layout.channel_counts}")

    tmp = target.with_name(target.name + ".partial")
    if tmp.exists():
        shutil.rmtree(tmp)
    (tmp / "windows").mkdir(parents=True)
    (tmp / "labels").mkdir()

    users: List[Dict[str, Any]] = []
    for user in ws.users:
        part = ws.select_users([user])
        fname = safe_filename(user, ".npy")
        np.save(tmp / "windows" / fname, np.ascontiguousarray(part.frames(), dtype=np.float64))
        np.save(tmp / "labels" / fname, part.labels.astype(np.int64))
        users.append({"user_id": user, "file": fname, "n_windows": len(part)})

    manifest = {
        "format_version": STORE_FORMAT_VERSION,
        "window_frames": ws.window_frames,
        "step_frames": int(dataset.step_frames),
        "window_seconds": float(dataset.window_seconds),
        "overlap_seconds": float(dataset.overlap_seconds),
        "n_windows": len(ws),
        "class_names": dataset.layout.class_names,
        "users": users,
        "stats": dataset.stats.to_mapping(),
        "layout": dataset.layout.to_mapping(),
    }
    (tmp / MANIFEST).write_text(yaml.safe_dump(manifest, sort_keys=False), encoding="utf-8")

    order = np.concatenate([np.flatnonzero(ws.user_ids == u) for u in ws.users])
    index = pd.DataFrame({
        "user_id": ws.user_ids[order],
        "window_id": ws.window_ids[order],
        "label": ws.labels[order],
    })
    index.to_csv(tmp / INDEX, index=False, lineterminator="\n")

    if target.exists():
        if (target / MANIFEST).exists() and not overwrite and not _same_store(tmp, target):
            shutil.rmtree(tmp)
            raise StoreExists(f"store {target} exists with different contents (pass --overwrite to replace it)")
        shutil.rmtree(target)
    tmp.rename(target)
    log_kv(logger, "store.write", path=target, users=len(users), windows=len(ws))
    return target


def read_manifest(path: str | Path) -> Dict[str, Any]:
    root = to_abs(path)
    mf = root / MANIFEST
    if not mf.exists():
        raise MissingFile(f"no processed-window store at {root} (missing {MANIFEST})")
    manifest = yaml.safe_load(mf.read_text(encoding="utf-8"))
    if not isinstance(manifest, dict) or manifest.get("format_version") != STORE_FORMAT_VERSION:
        raise FormatError(f"unsupported store format_version {manifest.get('format_version')!r}"
                          if isinstance(manifest, dict) else "manifest is not a mapping", file=str(mf))
    return manifest


def read_store(path: str | Path) -> StoredDataset:
    root = to_abs(path)
    manifest = read_manifest(root)
    layout = SensorLayout.from_mapping(manifest["layout"])
    index = pd.read_csv(root / INDEX, dtype={"user_id": str, "window_id": str, "label": np.int64})

    parts: List[WindowSet] = []
    for entry in manifest["users"]:
        user = str(entry["user_id"])
        frames = np.load(root / "windows" / entry["file"])
        labels = np.load(root / "labels" / entry["file"])
        ids = index.loc[index["user_id"] == user, "window_id"].to_numpy(dtype=str)
        if frames.shape[0] != labels.shape[0] or frames.shape[0] != ids.shape[0]:
            raise FormatError(f"user {user}: {frames.shape[0]} windows, {labels.shape[0]} labels, "
                              f"{ids.shape[0]} index rows", file=str(root / "windows" / entry["file"]))
        parts.append(WindowSet(
            records=layout.split(frames),
            labels=labels.astype(np.int64),
            user_ids=np.full(frames.shape[0], user),
            window_ids=ids,
        ))

    windows = WindowSet.concat(parts)
    log_kv(logger, "store.read", path=root, users=len(parts), windows=len(windows))
    return StoredDataset(
        layout=layout,
        windows=windows,
        stats=ChannelStats.from_mapping(manifest["stats"]),
        window_seconds=float(manifest["window_seconds"]),
        overlap_seconds=float(manifest["overlap_seconds"]),
        step_frames=int(manifest["step_frames"]),
    )
