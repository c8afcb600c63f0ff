# wearalign_core/config/settings.py
"""
Typed run settings. Every config artifact of the project (network, training,
synthetic data, run) is a flat YAML mapping validated by one of the models below.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from wearalign_core.config.config import CONFIG, dataset_defaults
from wearalign_core.utils.errors import GeometryError, InvalidConfig

VARIANTS = ("base", "LD", "GD", "LDGD", "full")
DATASETS = ("pamap2", "opportunity", "synthetic")

M = TypeVar("M", bound=BaseModel)


class _Flat(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------------------------------------------------------------------
# Network
# ---------------------------------------------------------------------
def conv_output_length(n: int, kernel: int, stride: int) -> int:
    """Valid (unpadded) convolution output length; 0 when the kernel does not fit."""
    return (n - kernel) // stride + 1 if n >= kernel else 0


class NetworkConfig(_Flat):
    sensor_channels: List[int] = Field(min_length=1)
    window_frames: int = Field(ge=1)
    n_classes: int = Field(ge=1)
    sensor_names: Optional[List[str]] = None
    conv_kernels: int = Field(16, ge=1)
    conv1_kernel: Tuple[int, int] = (3, 5)
    conv23_kernel: Tuple[int, int] = (1, 5)
    conv_stride: int = Field(2, ge=1)
    local_lstm_state: int = Field(64, ge=1)
    global_lstm_state: int = Field(128, ge=1)
    classifier_lstm_state: int = Field(128, ge=1)
    attention_dim: int = Field(64, ge=1)

    @field_validator("sensor_channels")
    @classmethod
    def _positive_channels(cls, v: List[int]) -> List[int]:
        if any(c < 1 for c in v):
            raise ValueError("channel counts must be positive")
        return v

    @model_validator(mode="after")
    def _names_match(self) -> "NetworkConfig":
        if self.sensor_names is not None and len(self.sensor_names) != len(self.sensor_channels):
            raise ValueError("sensor_names must have one entry per sensor")
        return self

    @property
    def n_sensors(self) -> int:
        return len(self.sensor_channels)

    @property
    def extractor_channels(self) -> int:
        # every sensor is zero-padded to one common width (at least the conv1 kernel height)
        return max(max(self.sensor_channels), self.conv1_kernel[0])

    def temporal_lengths(self) -> List[int]:
        """Temporal length after conv1, conv2, conv3."""
        t1 = conv_output_length(self.window_frames, self.conv1_kernel[1], self.conv_stride)
        t2 = conv_output_length(t1, self.conv23_kernel[1], self.conv_stride)
        t3 = conv_output_length(t2, self.conv23_kernel[1], self.conv_stride)
        return [t1, t2, t3]

    @property
    def feature_length(self) -> int:
        """T' of the extractor output sequences."""
        return self.temporal_lengths()[-1]

    @property
    def feature_width(self) -> int:
        return self.conv_kernels

    def check_geometry(self) -> None:
        if self.feature_length < 1:
            raise GeometryError(
                f"window of {self.window_frames} frames leaves no time steps after three "
                f"stride-{self.conv_stride} convolutions (lengths {self.temporal_lengths()})"
            )


# ---------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------
class TrainConfig(_Flat):
    learning_rate: float = Field(0.0005, ge=0.0)
    batch_size: int = Field(128, ge=2)
    lambda_weight: float = Field(0.5, ge=0.0, le=1.0)
    max_iterations: int = Field(3000, ge=0)
    use_convergence: bool = True
    convergence_window: int = Field(50, ge=1)
    convergence_patience: int = Field(100, ge=1)
    convergence_tol: float = Field(1e-4, ge=0.0)
    adam_beta1: float = Field(0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(1e-8, gt=0.0)
    detach_local_outputs: bool = False
    precision: Literal["float32", "float64"] = "float32"
    checkpoint_every: int = Field(0, ge=0)
    seed: int = 0


# ---------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------
class SynthConfig(_Flat):
    n_users: int = Field(6, ge=1)
    n_classes: int = Field(4, ge=1)
    sensor_channels: List[int] = Field(default_factory=lambda: [3, 3, 3], min_length=1)
    sampling_rate_hz: float = Field(50.0, gt=0.0)
    bout_seconds: float = Field(12.0, gt=0.0)
    bouts_per_user: int = Field(30, ge=1)
    noise_std: float = Field(0.15, ge=0.0)
    shift_magnitude: float = Field(0.5, ge=0.0)
    misaligned_sensor: Optional[int] = None
    misaligned_magnitude: float = Field(2.5, ge=0.0)
    missing_rate: float = Field(0.0, ge=0.0, lt=0.5)

    @model_validator(mode="after")
    def _misaligned_in_range(self) -> "SynthConfig":
        if any(c < 1 for c in self.sensor_channels):
            raise ValueError("channel counts must be positive")
        if self.misaligned_sensor is not None and not 0 <= self.misaligned_sensor < len(self.sensor_channels):
            raise ValueError(f"misaligned_sensor {self.misaligned_sensor} out of range")
        return self


# ---------------------------------------------------------------------
# Run (CLI)
# ---------------------------------------------------------------------
class RunConfig(_Flat):
    dataset: Literal["pamap2", "opportunity", "synthetic"] = "synthetic"
    data_dir: Optional[str] = None
    synth_config: Optional[str] = None
    store_dir: Optional[str] = None
    out_dir: Optional[str] = None
    window_seconds: float = Field(2.0, gt=0.0)
    overlap_seconds: float = Field(1.0, ge=0.0)
    step_seconds: Optional[float] = Field(None, gt=0.0)
    variant: Literal["base", "LD", "GD", "LDGD", "full"] = "full"
    new_user: Optional[str] = None
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)
    # network
    conv_kernels: int = Field(16, ge=1)
    local_lstm_state: int = Field(64, ge=1)
    global_lstm_state: int = Field(128, ge=1)
    classifier_lstm_state: int = Field(128, ge=1)
    attention_dim: int = Field(64, ge=1)
    # training
    learning_rate: float = Field(0.0005, ge=0.0)
    batch_size: int = Field(128, ge=2)
    lambda_weight: float = Field(0.5, ge=0.0, le=1.0)
    max_iterations: int = Field(3000, ge=0)
    use_convergence: bool = True
    detach_local_outputs: bool = False
    precision: Literal["float32", "float64"] = "float32"
    checkpoint_every: int = Field(0, ge=0)
    # reporting
    export_features: bool = False
    attention_report: bool = False
    checkpoint: Optional[str] = None
    overwrite: bool = False
    log_level: str = "INFO"

    @model_validator(mode="after")
    def _window_geometry(self) -> "RunConfig":
        if self.step_seconds is None and self.overlap_seconds >= self.window_seconds:
            raise ValueError("window_seconds must exceed overlap_seconds")
        return self

    def network_config(self, sensor_channels: List[int], window_frames: int, n_classes: int,
                       sensor_names: Optional[List[str]] = None) -> NetworkConfig:
        return NetworkConfig(
            sensor_channels=sensor_channels, window_frames=window_frames, n_classes=n_classes,
            sensor_names=sensor_names, conv_kernels=self.conv_kernels,
            local_lstm_state=self.local_lstm_state, global_lstm_state=self.global_lstm_state,
            classifier_lstm_state=self.classifier_lstm_state, attention_dim=self.attention_dim,
        )

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            lambda_weight=self.lambda_weight, max_iterations=self.max_iterations,
            use_convergence=self.use_convergence, detach_local_outputs=self.detach_local_outputs,
            precision=self.precision, checkpoint_every=self.checkpoint_every, seed=seed,
        )


# ---------------------------------------------------------------------
# Parse / serialize
# ---------------------------------------------------------------------
def parse_config(cls: Type[M], text: str | Dict[str, Any]) -> M:
    data = yaml.safe_load(text) if isinstance(text, str) else text
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InvalidConfig(f"{cls.__name__}: expected a key-value mapping, got {type(data).__name__}")
    try:
        return cls.model_validate(data)
    except ValidationError as e:
        raise InvalidConfig(f"{cls.__name__}: {e}") from e


def serialize_config(cfg: BaseModel) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False, default_flow_style=None)


def load_config_file(cls: Type[M], path: str | Path) -> M:
    p = Path(path)
    if not p.exists():
        raise InvalidConfig(f"config file not found: {p}")
    return parse_config(cls, p.read_text(encoding="utf-8"))


def load_run_config(path: Optional[str | Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Precedence (lowest -> highest): model defaults, configs/wearalign.yaml dataset
    defaults, the run config file, CLI overrides (None values are ignored).
    """
    file_values: Dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise InvalidConfig(f"config file not found: {p}")
        file_values = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        if not isinstance(file_values, dict):
            raise InvalidConfig(f"{p}: expected a key-value mapping")
    cli = {k: v for k, v in (overrides or {}).items() if v is not None}

    dataset = cli.get("dataset") or file_values.get("dataset") or "synthetic"
    known = set(RunConfig.model_fields)
    merged = {k: v for k, v in dataset_defaults(dataset).items() if k in known}
    merged.update(file_values)
    merged.update(cli)
    merged["dataset"] = dataset
    merged.setdefault("store_dir", f"{CONFIG['paths']['store_dir']}/{dataset}")
    return parse_config(RunConfig, merged)
