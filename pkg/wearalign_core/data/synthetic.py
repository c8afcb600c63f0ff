# wearalign_core/data/synthetic.py
"""
Synthetic multi-sensor activity data with controllable per-user shift.

Each class owns a sinusoid bank (level, amplitude, frequency per channel);
each user sees the class signals through a per-sensor affine transform
(rotation, scale, offset) whose size is `shift_magnitude`. An optional
misaligned sensor receives an extra transform of size `misaligned_magnitude`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np

from wearalign_core.config.settings import SynthConfig, parse_config
from wearalign_core.data.cleaning import FrameSequence
from wearalign_core.data.layouts import SensorLayout, contiguous_layout
from wearalign_core.utils.app_logging import log_kv, setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class _ClassBank:
    level: List[np.ndarray]      # per sensor (C, c_k)
    amplitude: List[np.ndarray]  # per sensor (C, c_k)
    frequency: List[np.ndarray]  # per sensor (C, c_k), Hz


def synthetic_layout(config: SynthConfig) -> SensorLayout:
    return contiguous_layout(
        config.sensor_channels, config.sampling_rate_hz,
        classes={c: f"class_{c}" for c in range(config.n_classes)}, name="synthetic",
    )


def _class_bank(config: SynthConfig, rng: np.random.Generator) -> _ClassBank:
    nyquist = config.sampling_rate_hz / 2.0
    shapes = [(config.n_classes, c) for c in config.sensor_channels]
    return _ClassBank(
        level=[rng.normal(0.0, 0.5, s) for s in shapes],
        amplitude=[rng.uniform(0.5, 1.5, s) for s in shapes],
        frequency=[rng.uniform(0.5, min(4.0, 0.4 * nyquist), s) for s in shapes],
    )


def _rotation(n: int, magnitude: float, rng: np.random.Generator) -> np.ndarray:
    """Cayley transform of a random skew-symmetric matrix; identity at magnitude 0."""
    a = rng.normal(0.0, 0.5 * magnitude, (n, n))
    skew = np.triu(a, 1) - np.triu(a, 1).T
    eye = np.eye(n)
    return np.linalg.solve(eye - skew, eye + skew)


def _affine(n: int, magnitude: float, rng: np.random.Generator):
    rot = _rotation(n, magnitude, rng)
    scale = np.exp(0.3 * magnitude * rng.normal(0.0, 1.0, n))
    offset = magnitude * rng.normal(0.0, 1.0, n)
    return rot, scale, offset


def _user_sequence(config: SynthConfig, bank: _ClassBank, user_id: str, rng: np.random.Generator) -> FrameSequence:
    fs = config.sampling_rate_hz
    n_bout = int(round(config.bout_seconds * fs))
    classes = rng.permutation(np.resize(np.arange(config.n_classes), config.bouts_per_user))
    t = np.arange(n_bout) / fs

    # transforms are drawn before any signal so they do not depend on bout count
    transforms = [_affine(c, config.shift_magnitude, rng) for c in config.sensor_channels]
    extra = None
    if config.misaligned_sensor is not None:
        c = config.sensor_channels[config.misaligned_sensor]
        extra = _affine(c, config.misaligned_magnitude, rng)

    blocks = []
    for cls in classes:
        per_sensor = []
        for k, c in enumerate(config.sensor_channels):
            phase = rng.uniform(0.0, 2.0 * np.pi, c)
            sig = (bank.level[k][cls]
                   + bank.amplitude[k][cls] * np.sin(2.0 * np.pi * np.outer(t, bank.frequency[k][cls]) + phase)
                   + rng.normal(0.0, config.noise_std, (n_bout, c)))
            rot, scale, offset = transforms[k]
            sig = (sig @ rot.T) * scale + offset
            if extra is not None and k == config.misaligned_sensor:
                rot2, scale2, offset2 = extra
                sig = (sig @ rot2.T) * scale2 + offset2
            per_sensor.append(sig)
        blocks.append(np.concatenate(per_sensor, axis=1))

    frames = np.concatenate(blocks, axis=0)
    labels = np.repeat(classes, n_bout).astype(np.int64)
    if config.missing_rate > 0:
        frames[rng.random(frames.shape) < config.missing_rate] = np.nan
    return FrameSequence(frames=frames, labels=labels, user_id=user_id, sampling_rate_hz=fs)


def generate_synthetic(config: SynthConfig | dict, seed: int) -> List[FrameSequence]:
    """Deterministic in (config, seed). A plain mapping is validated first (InvalidConfig)."""
    if not isinstance(config, SynthConfig):
        config = parse_config(SynthConfig, config)
    root = np.random.SeedSequence(seed)
    bank_seq, *user_seqs = root.spawn(config.n_users + 1)
    bank = _class_bank(config, np.random.default_rng(bank_seq))
    out = [
        _user_sequence(config, bank, f"user{u + 1:02d}", np.random.default_rng(ss))
        for u, ss in enumerate(user_seqs)
    ]
    log_kv(logger, "synth", users=config.n_users, classes=config.n_classes,
           sensors=len(config.sensor_channels), shift=config.shift_magnitude,
           misaligned=config.misaligned_sensor, seed=seed)
    return out
