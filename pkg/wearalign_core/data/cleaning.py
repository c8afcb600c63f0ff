# wearalign_core/data/cleaning.py
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Dict, Sequence

import numpy as np
import pandas as pd

from wearalign_core.data.layouts import SensorLayout
from wearalign_core.utils.app_logging import log_kv, setup_logger
from wearalign_core.utils.errors import ChannelAllInvalid, EmptyInput, MissingStats, ShapeMismatch

logger = setup_logger(__name__)

NULL_LABEL = -1


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (T, C) float64, sensor-ordered channels
    labels: np.ndarray  # (T,) int64 class indices, NULL_LABEL for unlabeled/null frames
    user_id: str
    sampling_rate_hz: float
    sequence_id: int = 0

    def __post_init__(self):
        if self.frames.ndim != 2:
            raise ShapeMismatch(f"frames must be 2-D, got shape {self.frames.shape}")
        if self.labels.shape != (self.frames.shape[0],):
            raise ShapeMismatch(f"{self.frames.shape[0]} frames but {self.labels.shape} labels")

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def n_channels(self) -> int:
        return int(self.frames.shape[1])


# ---------- Stage 1: invalid values + interpolation ----------
def clean_frames(raw: FrameSequence, layout: SensorLayout) -> FrameSequence:
    """
    Replace non-finite values and the layout's sentinel values by linear
    interpolation between the nearest valid neighbours of the same channel;
    leading/trailing gaps take the nearest valid value.
    """
    if raw.n_channels != layout.total_channels:
        raise ShapeMismatch(f"user {raw.user_id}: {raw.n_channels} columns, layout binds {layout.total_channels}")

    values = np.asarray(raw.frames, dtype=np.float64)
    invalid = ~np.isfinite(values)
    if layout.invalid_values:
        invalid |= np.isin(values, np.asarray(layout.invalid_values, dtype=np.float64))

    df = pd.DataFrame(values).mask(invalid)
    n_valid = df.notna().sum(axis=0).to_numpy()
    bad = np.flatnonzero(n_valid < 2)
    if bad.size:
        raise ChannelAllInvalid(int(bad[0]), int(n_valid[bad[0]]))

    n_gaps = int(invalid.sum())
    if n_gaps:
        df = df.interpolate(method="linear", axis=0, limit_direction="both")
        log_kv(logger, "clean", level=10, user=raw.user_id, seq=raw.sequence_id, filled=n_gaps)
    return replace(raw, frames=df.to_numpy(dtype=np.float64))


# ---------- Stage 2: per-channel statistics ----------
@dataclass(frozen=True)
class ChannelStats:
    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        if self.minimum.shape != self.maximum.shape:
            raise ShapeMismatch("min/max shapes differ")
        if np.any(self.minimum > self.maximum):
            raise ValueError("channel min exceeds max")

    @property
    def n_channels(self) -> int:
        return int(self.minimum.shape[0])

    @property
    def degenerate(self) -> np.ndarray:
        return self.minimum == self.maximum

    def invert(self, normalized: np.ndarray) -> np.ndarray:
        """Inverse of the min-max mapping (non-degenerate channels)."""
        return (np.asarray(normalized) + 1.0) / 2.0 * (self.maximum - self.minimum) + self.minimum

    def to_mapping(self) -> Dict[str, Any]:
        return {"min": [float(v) for v in self.minimum], "max": [float(v) for v in self.maximum]}

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "ChannelStats":
        return cls(np.asarray(data["min"], dtype=np.float64), np.asarray(data["max"], dtype=np.float64))

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "ChannelStats":
        """Min/max over the last axis of every array in `arrays`."""
        arrays = [a for a in arrays if a.size]
        if not arrays:
            raise EmptyInput("no data to compute channel statistics from")
        flat = [a.reshape(-1, a.shape[-1]) for a in arrays]
        if len({f.shape[1] for f in flat}) != 1:
            raise ShapeMismatch("arrays disagree on channel count")
        return cls(
            np.min([f.min(axis=0) for f in flat], axis=0).astype(np.float64),
            np.max([f.max(axis=0) for f in flat], axis=0).astype(np.float64),
        )


def compute_channel_stats(sequences: Sequence[FrameSequence]) -> ChannelStats:
    if not sequences:
        raise EmptyInput("compute_channel_stats needs at least one sequence")
    stats = ChannelStats.from_arrays([s.frames for s in sequences])
    if stats.degenerate.any():
        log_kv(logger, "stats.degenerate", level=30, channels=np.flatnonzero(stats.degenerate).tolist())
    return stats


# ---------- Stage 3: min-max to [-1, 1] ----------
def normalize_array(values: np.ndarray, stats: ChannelStats) -> np.ndarray:
    """x' = 2 (x - min) / (max - min) - 1 per channel, clamped; degenerate channels -> 0."""
    if values.shape[-1] != stats.n_channels:
        raise MissingStats(f"stats cover {stats.n_channels} channels, data has {values.shape[-1]}")
    span = stats.maximum - stats.minimum
    scaled = np.divide(values - stats.minimum, span, out=np.full(values.shape, 0.5), where=span > 0)
    return np.clip(2.0 * scaled - 1.0, -1.0, 1.0)


def normalize_channels(seq: FrameSequence, stats: ChannelStats) -> FrameSequence:
    return replace(seq, frames=normalize_array(seq.frames, stats))
