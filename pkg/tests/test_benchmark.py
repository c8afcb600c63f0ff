"""
Long-running checks on the synthetic-shift benchmark. Set WEARALIGN_RUN_BENCHMARK=1
to run them; they train every variant for a few thousand iterations.
"""
import importlib.util
import os

import numpy as np
import pytest

from conftest import ROOT
from wearalign_core.config.settings import SynthConfig, TrainConfig
from wearalign_core.data.preprocess import build_dataset
from wearalign_core.data.splits import make_louo_split, normalize_split
from wearalign_core.data.synthetic import generate_synthetic, synthetic_layout
from wearalign_core.evaluation.louo import network_config_for
from wearalign_core.training.trainer import train

pytestmark = pytest.mark.skipif(not os.getenv("WEARALIGN_RUN_BENCHMARK"),
                                reason="set WEARALIGN_RUN_BENCHMARK=1 to run the benchmark")


def _load_benchmark():
    spec = importlib.util.spec_from_file_location("run_benchmark", ROOT / "scripts" / "run_benchmark.py")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def test_synthetic_benchmark_checks(tmp_path):
    bench = _load_benchmark()
    result = bench.run_benchmark(tmp_path, seeds=[0, 1, 2])
    assert (tmp_path / "ablation.csv").exists()
    failed = [name for name, ok in result["checks"].items() if not ok]
    assert not failed, f"benchmark checks failed: {failed}\n{result['table']}"


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_discriminators_are_confused_without_shift(seed):
    synth = SynthConfig(n_users=4, n_classes=3, shift_magnitude=0.0, misaligned_sensor=None)
    ds = build_dataset(generate_synthetic(synth, seed=seed), synthetic_layout(synth),
                       window_seconds=2.0, overlap_seconds=1.0)
    split = normalize_split(make_louo_split(ds.windows, ds.users[0], seed=seed))
    net_cfg = network_config_for(ds, conv_kernels=8, local_lstm_state=8, global_lstm_state=16,
                                 classifier_lstm_state=16, attention_dim=16)
    train_cfg = TrainConfig(max_iterations=400, batch_size=64, use_convergence=False, seed=seed)
    result = train(split.train_set, split.adapt_set, net_cfg, train_cfg, "full")
    log = result.log.to_frame()
    tail = log.iloc[-len(log) // 4:]
    assert abs(float(np.mean(tail["global_acc"])) - 0.5) <= 0.1
    assert abs(float(np.mean(tail["local_acc"])) - 0.5) <= 0.1
