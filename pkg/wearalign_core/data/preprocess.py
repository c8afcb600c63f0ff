# wearalign_core/data/preprocess.py
from __future__ import annotations

from typing import List, Optional, Sequence

from wearalign_core.data.cleaning import FrameSequence, clean_frames, compute_channel_stats
from wearalign_core.data.layouts import SensorLayout
from wearalign_core.data.store import StoredDataset
from wearalign_core.data.windows import LabeledWindow, WindowSet, segment_windows, window_geometry
from wearalign_core.utils.app_logging import log_kv, setup_logger
from wearalign_core.utils.errors import EmptyInput

logger = setup_logger(__name__)


def build_dataset(sequences: Sequence[FrameSequence], layout: SensorLayout, window_seconds: float,
                  overlap_seconds: float, step_seconds: Optional[float] = None) -> StoredDataset:
    """
    clean -> dataset-wide stats -> segment/label -> per-sensor split.
    Normalization is deferred to the LOUO fold (stats over train + adapt windows).
    """
    if not sequences:
        raise EmptyInput("no frame sequences to preprocess")
    cleaned = [clean_frames(s, layout) for s in sequences]
    stats = compute_channel_stats(cleaned)

    windows: List[LabeledWindow] = []
    for seq in cleaned:
        found = segment_windows(seq, window_seconds, overlap_seconds, layout, step_seconds=step_seconds)
        log_kv(logger, "segment", level=10, user=seq.user_id, seq=seq.sequence_id, windows=len(found))
        windows.extend(found)
    if not windows:
        raise EmptyInput("segmentation produced no labeled windows")

    _, step = window_geometry(layout.sampling_rate_hz, window_seconds, overlap_seconds, step_seconds)
    ws = WindowSet.from_windows(windows)
    log_kv(logger, "preprocess", users=len(ws.users), windows=len(ws), classes=layout.n_classes)
    return StoredDataset(layout=layout, windows=ws, stats=stats, window_seconds=window_seconds,
                         overlap_seconds=overlap_seconds, step_frames=step)
