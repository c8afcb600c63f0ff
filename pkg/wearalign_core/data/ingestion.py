# wearalign_core/data/ingestion.py
from __future__ import annotations

from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd

from wearalign_core.config.path_utils import to_abs
from wearalign_core.data.cleaning import NULL_LABEL, FrameSequence
from wearalign_core.data.layouts import SensorLayout, load_layout
from wearalign_core.utils.app_logging import log_kv, setup_logger
from wearalign_core.utils.errors import FormatError, MissingFile

logger = setup_logger(__name__)


def _read_frames(path: Path, layout: SensorLayout) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, sep=r"\s+", header=None, na_values=["NaN", "nan"], engine="c")
    except pd.errors.EmptyDataError as e:
        raise FormatError("file is empty", file=str(path)) from e
    except pd.errors.ParserError as e:
        # pandas reports "Expected N fields in line L, saw M"
        raise FormatError(f"ragged row: {e}", file=str(path)) from e

    if layout.expected_columns is not None and df.shape[1] != layout.expected_columns:
        raise FormatError(
            f"expected {layout.expected_columns} columns, found {df.shape[1]}",
            file=str(path), line=1, column=df.shape[1],
        )
    needed = layout.source_columns + ([layout.label_column] if layout.label_column is not None else [])
    if max(needed) >= df.shape[1]:
        raise FormatError(f"layout needs column {max(needed)}, file has {df.shape[1]}", file=str(path), line=1)

    for col in needed:
        if df[col].dtype == object:
            coerced = pd.to_numeric(df[col], errors="coerce")
            bad = coerced.isna() & df[col].notna()
            if bad.any():
                row = int(np.flatnonzero(bad.to_numpy())[0])
                raise FormatError(f"non-numeric value {df[col].iloc[row]!r}", file=str(path), line=row + 1, column=col)
            df[col] = coerced
    return df


def _to_sequence(df: pd.DataFrame, layout: SensorLayout, user_id: str, sequence_id: int) -> FrameSequence:
    frames = df[layout.source_columns].to_numpy(dtype=np.float64)
    if layout.label_column is None:
        labels = np.full(len(df), NULL_LABEL, dtype=np.int64)
    else:
        index_map = layout.class_index_map()
        raw = df[layout.label_column]
        labels = raw.map(lambda v: index_map.get(int(v), NULL_LABEL) if pd.notna(v) else NULL_LABEL)
        labels = labels.to_numpy(dtype=np.int64)
    return FrameSequence(frames=frames, labels=labels, user_id=user_id,
                         sampling_rate_hz=layout.sampling_rate_hz, sequence_id=sequence_id)


def discover_user_files(directory: Path, layout: SensorLayout) -> Dict[str, List[Path]]:
    users: Dict[str, List[Path]] = {}
    for path in sorted(directory.glob(layout.file_glob)):
        user = layout.user_of(path.name)
        if user is None or user in layout.exclude_users:
            continue
        users.setdefault(user, []).append(path)
    return users


def load_real_dataset(directory: str | Path, layout_preset: str | SensorLayout) -> List[FrameSequence]:
    """
    Read every per-user file of a dataset directory into FrameSequences whose
    channels are bound by the preset layout (sensor order). Files are read in
    sorted order, so sequence ids are stable across runs.
    """
    layout = layout_preset if isinstance(layout_preset, SensorLayout) else load_layout(layout_preset)
    root = to_abs(directory)
    if not root.is_dir():
        raise MissingFile(f"dataset directory not found: {root}")
    users = discover_user_files(root, layout)
    if not users:
        raise MissingFile(f"no files matching {layout.file_glob!r} in {root}")

    out: List[FrameSequence] = []
    for user, paths in sorted(users.items()):
        for seq_id, path in enumerate(paths):
            df = _read_frames(path, layout)
            seq = _to_sequence(df, layout, user, seq_id)
            log_kv(logger, "ingest", user=user, file=path.name, frames=seq.n_frames)
            out.append(seq)
    log_kv(logger, "ingest.done", preset=layout.name, users=len(users), sequences=len(out))
    return out
