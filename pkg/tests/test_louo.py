from dataclasses import replace

import numpy as np
import pytest
import yaml

from conftest import tiny_training
from wearalign_core.data.splits import make_louo_split
from wearalign_core.evaluation.louo import check_exclusivity, network_config_for, run_louo
from wearalign_core.models.variants import ablation_variant
from wearalign_core.training.trainer import DataAccessAudit
from wearalign_core.utils.errors import LouoAborted, ProtocolViolation, SingleUserDataset


def _net(dataset):
    return network_config_for(dataset, conv_kernels=4, local_lstm_state=3, global_lstm_state=4,
                              classifier_lstm_state=4, attention_dim=4)


def test_one_training_run_per_user_and_seed(tiny_dataset):
    report = run_louo(tiny_dataset, "full", tiny_training(max_iterations=2), seeds=[0, 1],
                      network_config=_net(tiny_dataset))
    assert sorted((f.seed, f.user) for f in report.folds) == [
        (s, u) for s in (0, 1) for u in ("user01", "user02", "user03")]
    assert report.complete


def test_average_is_unweighted_mean_over_users(tiny_dataset):
    report = run_louo(tiny_dataset, "LD", tiny_training(max_iterations=2), seeds=[0],
                      network_config=_net(tiny_dataset))
    per_user = [f.accuracy for f in report.folds]
    assert abs(report.summary()["accuracy"] - float(np.mean(per_user))) < 1e-12
    for f in report.folds:
        assert abs(f.accuracy - np.trace(f.confusion) / f.confusion.sum()) < 1e-12
        assert f.confusion.sum() == f.n_test


def test_base_variant_never_reads_adaptation_data(tiny_dataset):
    report = run_louo(tiny_dataset, "base", tiny_training(max_iterations=2), seeds=[0],
                      network_config=_net(tiny_dataset))
    assert not any(f.read_adaptation for f in report.folds)


def test_same_seed_gives_identical_report(tiny_dataset, tmp_path):
    for name in ("a", "b"):
        run_louo(tiny_dataset, "full", tiny_training(max_iterations=2), seeds=[3],
                 network_config=_net(tiny_dataset), users=["user02"]).write(tmp_path / name)
    for f in ("report.yaml", "per_user_metrics.csv", "confusion.csv", "summary.md"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_fold_logs_land_under_out_dir(tiny_dataset, tmp_path):
    run_louo(tiny_dataset, "GD", tiny_training(max_iterations=2), seeds=[0], network_config=_net(tiny_dataset),
             users=["user03"], out_dir=tmp_path)
    fold = tmp_path / "GD" / "seed0" / "user03"
    assert (fold / "logs" / "training_log.csv").exists()
    assert (fold / "checkpoints" / "final.pt").exists()


def test_failed_fold_keeps_partial_report(tiny_dataset):
    calls = []

    def hook(fold):
        calls.append(fold.metrics.user)
        if len(calls) == 2:
            raise RuntimeError("disk full")

    with pytest.raises(LouoAborted) as e:
        run_louo(tiny_dataset, "base", tiny_training(max_iterations=1), seeds=[0],
                 network_config=_net(tiny_dataset), fold_hook=hook)
    partial = e.value.report
    assert not partial.complete
    assert [f.user for f in partial.folds] == ["user01", "user02"]
    assert yaml.safe_load(yaml.safe_dump(partial.to_mapping()))["status"] == "partial"


def test_single_user_dataset_is_rejected(tiny_dataset):
    one = replace(tiny_dataset, windows=tiny_dataset.windows.select_users(["user01"]))
    with pytest.raises(SingleUserDataset):
        run_louo(one, "base", tiny_training(), seeds=[0])


def test_exclusivity_check_flags_leaks(tiny_dataset):
    split = make_louo_split(tiny_dataset.windows, "user01", 0)
    audit = DataAccessAudit()
    audit.record([str(split.test_set.window_ids[0])], 0)
    with pytest.raises(ProtocolViolation):
        check_exclusivity(split, audit, ablation_variant("full"))

    audit = DataAccessAudit()
    audit.record([str(split.adapt_set.window_ids[0])], 1)
    check_exclusivity(split, audit, ablation_variant("full"))
    with pytest.raises(ProtocolViolation):
        check_exclusivity(split, audit, ablation_variant("base"))
