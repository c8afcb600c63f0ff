# wearalign_core/data/layouts.py
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from wearalign_core.utils.errors import InvalidConfig, ShapeMismatch

PRESETS_DIR = Path(__file__).resolve().parent / "presets"
LAYOUT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SensorSpec:
    name: str
    source_columns: Tuple[int, ...]

    @property
    def channel_count(self) -> int:
        return len(self.source_columns)


@dataclass(frozen=True)
class SensorLayout:
    """
    K-sensor channel map. Sensor k owns `source_columns` of the raw file and,
    after binding, a contiguous slice of the frame matrix in sensor order.
    """
    sensors: Tuple[SensorSpec, ...]
    sampling_rate_hz: float
    label_column: Optional[int] = None
    name: str = "custom"
    file_glob: str = "*.dat"
    user_pattern: str = r"^(.+)\.[^.]+$"
    expected_columns: Optional[int] = None
    invalid_values: Tuple[float, ...] = ()
    exclude_users: Tuple[str, ...] = ()
    classes: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.sensors:
            raise InvalidConfig("layout needs at least one sensor")
        if self.sampling_rate_hz <= 0:
            raise InvalidConfig("sampling_rate_hz must be positive")
        seen: set[int] = set()
        for s in self.sensors:
            if s.channel_count < 1:
                raise InvalidConfig(f"sensor {s.name} binds no columns")
            overlap = seen.intersection(s.source_columns)
            if overlap:
                raise InvalidConfig(f"sensor {s.name} reuses columns {sorted(overlap)}")
            seen.update(s.source_columns)
        if self.label_column is not None and self.label_column in seen:
            raise InvalidConfig(f"label column {self.label_column} is also bound to a sensor")

    # ---------- geometry ----------
    @property
    def n_sensors(self) -> int:
        return len(self.sensors)

    @property
    def sensor_names(self) -> List[str]:
        return [s.name for s in self.sensors]

    @property
    def channel_counts(self) -> List[int]:
        return [s.channel_count for s in self.sensors]

    @property
    def total_channels(self) -> int:
        return sum(self.channel_counts)

    @property
    def source_columns(self) -> List[int]:
        return [c for s in self.sensors for c in s.source_columns]

    def channel_slices(self) -> List[slice]:
        bounds = np.cumsum([0] + self.channel_counts)
        return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    def split(self, frames: np.ndarray) -> List[np.ndarray]:
        """Split (..., C) channels into K per-sensor arrays (..., c_k)."""
        if frames.shape[-1] != self.total_channels:
            raise ShapeMismatch(f"{frames.shape[-1]} channels, layout binds {self.total_channels}")
        return [frames[..., sl] for sl in self.channel_slices()]

    # ---------- labels ----------
    @property
    def class_names(self) -> List[str]:
        return [self.classes[k] for k in sorted(self.classes)]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def class_index_map(self) -> Dict[int, int]:
        """Raw activity id -> class index 0..C-1 (ascending raw id order)."""
        return {raw: i for i, raw in enumerate(sorted(self.classes))}

    def user_of(self, filename: str) -> Optional[str]:
        m = re.match(self.user_pattern, filename)
        return m.group(1) if m else None

    # ---------- (de)serialization ----------
    def to_mapping(self) -> Dict[str, Any]:
        return {
            "format_version": LAYOUT_FORMAT_VERSION,
            "name": self.name,
            "sampling_rate_hz": float(self.sampling_rate_hz),
            "file_glob": self.file_glob,
            "user_pattern": self.user_pattern,
            "expected_columns": self.expected_columns,
            "label_column": self.label_column,
            "invalid_values": [float(v) for v in self.invalid_values],
            "exclude_users": list(self.exclude_users),
            "classes": {int(k): v for k, v in sorted(self.classes.items())},
            "sensors": [{"name": s.name, "columns": list(s.source_columns)} for s in self.sensors],
        }

    @classmethod
    def from_mapping(cls, data: Dict[str, Any]) -> "SensorLayout":
        try:
            version = int(data.get("format_version", LAYOUT_FORMAT_VERSION))
            if version != LAYOUT_FORMAT_VERSION:
                raise InvalidConfig(f"unsupported layout format_version {version}")
            sensors = tuple(
                SensorSpec(name=str(s["name"]), source_columns=tuple(int(c) for c in s["columns"]))
                for s in data["sensors"]
            )
            return cls(
                sensors=sensors,
                sampling_rate_hz=float(data["sampling_rate_hz"]),
                label_column=None if data.get("label_column") is None else int(data["label_column"]),
                name=str(data.get("name", "custom")),
                file_glob=str(data.get("file_glob", "*.dat")),
                user_pattern=str(data.get("user_pattern", r"^(.+)\.[^.]+$")),
                expected_columns=None if data.get("expected_columns") is None else int(data["expected_columns"]),
                invalid_values=tuple(float(v) for v in data.get("invalid_values") or ()),
                exclude_users=tuple(str(u) for u in data.get("exclude_users") or ()),
                classes={int(k): str(v) for k, v in (data.get("classes") or {}).items()},
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, InvalidConfig):
                raise
            raise InvalidConfig(f"malformed layout: {e}") from e


def contiguous_layout(channel_counts: Sequence[int], sampling_rate_hz: float,
                      names: Optional[Sequence[str]] = None,
                      classes: Optional[Dict[int, str]] = None, name: str = "custom") -> SensorLayout:
    """Layout whose sensors occupy consecutive columns 0..C-1 (synthetic data, stores)."""
    names = list(names) if names is not None else [f"sensor_{k}" for k in range(len(channel_counts))]
    sensors, start = [], 0
    for nm, c in zip(names, channel_counts):
        sensors.append(SensorSpec(name=nm, source_columns=tuple(range(start, start + int(c)))))
        start += int(c)
    return SensorLayout(sensors=tuple(sensors), sampling_rate_hz=float(sampling_rate_hz),
                        classes=dict(classes or {}), name=name)


def load_layout(name_or_path: str | Path) -> SensorLayout:
    """Load a shipped preset by name (`pamap2`, `opportunity`) or a .layout file path."""
    p = Path(name_or_path)
    if not p.suffix:
        p = PRESETS_DIR / f"{name_or_path}.layout"
    if not p.exists():
        raise InvalidConfig(f"layout preset not found: {name_or_path}")
    data = yaml.safe_load(p.read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise InvalidConfig(f"{p}: expected a key-value mapping")
    return SensorLayout.from_mapping(data)
