# wearalign_core/data/windows.py
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from wearalign_core.data.cleaning import NULL_LABEL, ChannelStats, FrameSequence, normalize_array
from wearalign_core.data.layouts import SensorLayout
from wearalign_core.utils.errors import EmptyInput, InvalidGeometry, ShapeMismatch


@dataclass(frozen=True)
class LabeledWindow:
    records: List[np.ndarray]  # K matrices, matrix k is (l, c_k)
    label: Optional[int]       # None for new-user adaptation data
    user_id: str
    window_id: str

    @property
    def n_frames(self) -> int:
        return int(self.records[0].shape[0])

    def frames(self) -> np.ndarray:
        """Reassemble the (l, C) window slice in sensor order."""
        return np.concatenate(self.records, axis=1)


# ---------- labeling ----------
def assign_window_label(labels: Sequence[int]) -> Optional[int]:
    """
    Majority label of a window. Ties: centre frame (index l // 2) if it is among
    the tied labels, else the smallest tied non-null class. None = rejected
    (the majority is the null label).
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size < 1:
        raise EmptyInput("window has no frames")
    values, counts = np.unique(labels, return_counts=True)
    tied = values[counts == counts.max()]
    centre = int(labels[labels.size // 2])
    if centre in tied:
        winner = centre
    else:
        non_null = tied[tied != NULL_LABEL]
        winner = int(non_null.min()) if non_null.size else NULL_LABEL
    return None if winner == NULL_LABEL else int(winner)


# ---------- segmentation ----------
def window_geometry(sampling_rate_hz: float, window_seconds: float, overlap_seconds: float,
                    step_seconds: Optional[float] = None) -> tuple[int, int]:
    """(l, step) in frames. `step_seconds` overrides the overlap reading when given."""
    length = int(round(window_seconds * sampling_rate_hz))
    if length < 1:
        raise InvalidGeometry(f"window of {window_seconds}s at {sampling_rate_hz} Hz has no frames")
    if step_seconds is not None:
        step = int(round(step_seconds * sampling_rate_hz))
    else:
        if overlap_seconds < 0:
            raise InvalidGeometry("overlap_seconds must be >= 0")
        step = length - int(round(overlap_seconds * sampling_rate_hz))
    if step <= 0:
        raise InvalidGeometry(f"non-positive step ({step} frames) for window {length} frames")
    return length, step


def window_offsets(n_frames: int, length: int, step: int) -> range:
    return range(0, n_frames - length + 1, step) if n_frames >= length else range(0)


def segment_windows(seq: FrameSequence, window_seconds: float, overlap_seconds: float,
                    layout: SensorLayout, step_seconds: Optional[float] = None) -> List[LabeledWindow]:
    """Sliding windows over `seq`; null-majority windows are dropped, trailing partial windows discarded."""
    length, step = window_geometry(seq.sampling_rate_hz, window_seconds, overlap_seconds, step_seconds)
    if seq.n_channels != layout.total_channels:
        raise ShapeMismatch(f"{seq.n_channels} channels, layout binds {layout.total_channels}")
    out: List[LabeledWindow] = []
    for off in window_offsets(seq.n_frames, length, step):
        label = assign_window_label(seq.labels[off:off + length])
        if label is None:
            continue
        block = seq.frames[off:off + length]
        out.append(LabeledWindow(
            records=[np.ascontiguousarray(r) for r in layout.split(block)],
            label=label,
            user_id=seq.user_id,
            window_id=f"{seq.user_id}/{seq.sequence_id}/{off}",
        ))
    return out


# ---------- columnar form ----------
@dataclass(frozen=True)
class WindowSet:
    """Columnar windows: per-sensor arrays (N, l, c_k) plus per-window metadata."""
    records: List[np.ndarray]
    labels: np.ndarray      # (N,) int64, NULL_LABEL where absent
    user_ids: np.ndarray    # (N,) str
    window_ids: np.ndarray  # (N,) str

    def __post_init__(self):
        n = len(self.labels)
        if any(r.shape[0] != n for r in self.records) or len(self.user_ids) != n or len(self.window_ids) != n:
            raise ShapeMismatch("WindowSet columns disagree on window count")
        if len({r.shape[1] for r in self.records}) > 1:
            raise ShapeMismatch("sensor records disagree on frames per window")

    def __len__(self) -> int:
        return int(len(self.labels))

    @property
    def channel_counts(self) -> List[int]:
        return [int(r.shape[2]) for r in self.records]

    @property
    def window_frames(self) -> int:
        return int(self.records[0].shape[1])

    @property
    def users(self) -> List[str]:
        return sorted(set(self.user_ids.tolist()))

    @property
    def is_labeled(self) -> bool:
        return bool(len(self)) and bool(np.all(self.labels != NULL_LABEL))

    @classmethod
    def from_windows(cls, windows: Sequence[LabeledWindow]) -> "WindowSet":
        if not windows:
            raise EmptyInput("no windows")
        k = len(windows[0].records)
        return cls(
            records=[np.stack([w.records[j] for w in windows]).astype(np.float64) for j in range(k)],
            labels=np.asarray([NULL_LABEL if w.label is None else w.label for w in windows], dtype=np.int64),
            user_ids=np.asarray([w.user_id for w in windows], dtype=str),
            window_ids=np.asarray([w.window_id for w in windows], dtype=str),
        )

    @classmethod
    def empty(cls, channel_counts: Sequence[int], window_frames: int) -> "WindowSet":
        return cls(
            records=[np.zeros((0, window_frames, c)) for c in channel_counts],
            labels=np.zeros(0, dtype=np.int64),
            user_ids=np.zeros(0, dtype=str),
            window_ids=np.zeros(0, dtype=str),
        )

    @classmethod
    def concat(cls, sets: Iterable["WindowSet"]) -> "WindowSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            raise EmptyInput("nothing to concatenate")
        return cls(
            records=[np.concatenate([s.records[j] for s in sets]) for j in range(len(sets[0].records))],
            labels=np.concatenate([s.labels for s in sets]),
            user_ids=np.concatenate([s.user_ids for s in sets]),
            window_ids=np.concatenate([s.window_ids for s in sets]),
        )

    def to_windows(self) -> List[LabeledWindow]:
        return [
            LabeledWindow(
                records=[r[i] for r in self.records],
                label=None if self.labels[i] == NULL_LABEL else int(self.labels[i]),
                user_id=str(self.user_ids[i]),
                window_id=str(self.window_ids[i]),
            )
            for i in range(len(self))
        ]

    def take(self, index: np.ndarray | Sequence[int]) -> "WindowSet":
        index = np.asarray(index, dtype=np.int64)
        return WindowSet(
            records=[r[index] for r in self.records],
            labels=self.labels[index],
            user_ids=self.user_ids[index],
            window_ids=self.window_ids[index],
        )

    def select_users(self, users: Iterable[str], exclude: bool = False) -> "WindowSet":
        mask = np.isin(self.user_ids, list(users))
        return self.take(np.flatnonzero(~mask if exclude else mask))

    def without_labels(self) -> "WindowSet":
        return WindowSet(self.records, np.full(len(self), NULL_LABEL, dtype=np.int64),
                         self.user_ids, self.window_ids)

    def frames(self) -> np.ndarray:
        return np.concatenate(self.records, axis=2)

    def normalized(self, stats: ChannelStats) -> "WindowSet":
        bounds = np.cumsum([0] + self.channel_counts)
        full = normalize_array(self.frames(), stats)
        return WindowSet(
            records=[full[..., a:b] for a, b in zip(bounds[:-1], bounds[1:])],
            labels=self.labels, user_ids=self.user_ids, window_ids=self.window_ids,
        )


def window_channel_stats(*window_sets: Sequence[LabeledWindow] | WindowSet) -> ChannelStats:
    """Per-channel min/max over every window of every given set."""
    sets = [w if isinstance(w, WindowSet) else WindowSet.from_windows(w) for w in window_sets]
    return ChannelStats.from_arrays([ws.frames() for ws in sets if len(ws)])


def normalize_windows(windows: Sequence[LabeledWindow] | WindowSet, stats: ChannelStats):
    if isinstance(windows, WindowSet):
        return windows.normalized(stats)
    return WindowSet.from_windows(windows).normalized(stats).to_windows()
