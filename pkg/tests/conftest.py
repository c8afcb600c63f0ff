import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from wearalign_core.config.settings import NetworkConfig, SynthConfig, TrainConfig  # noqa: E402
from wearalign_core.data.preprocess import build_dataset  # noqa: E402
from wearalign_core.data.synthetic import generate_synthetic, synthetic_layout  # noqa: E402

# 16 Hz, 2 s windows -> l = 32 frames, T' = 1
TINY_SYNTH = SynthConfig(n_users=3, n_classes=3, sensor_channels=[3, 2, 1], sampling_rate_hz=16.0,
                         bout_seconds=4.0, bouts_per_user=6, misaligned_sensor=1)


def tiny_network(sensor_channels=(3, 2, 1), window_frames=32, n_classes=3, **kw) -> NetworkConfig:
    sizes = dict(conv_kernels=4, local_lstm_state=3, global_lstm_state=4, classifier_lstm_state=4, attention_dim=4)
    sizes.update(kw)
    return NetworkConfig(sensor_channels=list(sensor_channels), window_frames=window_frames,
                         n_classes=n_classes, **sizes)


def tiny_training(**kw) -> TrainConfig:
    values = dict(batch_size=8, max_iterations=3, learning_rate=0.001, use_convergence=False)
    values.update(kw)
    return TrainConfig(**values)


@pytest.fixture(autouse=True)
def _runs_in_tmp(monkeypatch, tmp_path):
    # runs/ and data/ paths resolve under the test's tmp dir
    monkeypatch.setenv("WEARALIGN_LOG_LEVEL", "WARNING")
    from wearalign_core.config.config import CONFIG
    monkeypatch.setitem(CONFIG["paths"], "runs_dir", str(tmp_path / "runs"))
    monkeypatch.setitem(CONFIG["paths"], "store_dir", str(tmp_path / "processed"))


@pytest.fixture(scope="session")
def tiny_sequences():
    return generate_synthetic(TINY_SYNTH, seed=0)


@pytest.fixture(scope="session")
def tiny_dataset(tiny_sequences):
    return build_dataset(tiny_sequences, synthetic_layout(TINY_SYNTH), window_seconds=2.0, overlap_seconds=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
