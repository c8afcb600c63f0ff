import pandas as pd
import pytest
import yaml

from conftest import TINY_SYNTH
from wearalign_core.pipelines.run_experiment import main

SMALL_RUN = {
    "conv_kernels": 4, "local_lstm_state": 3, "global_lstm_state": 4, "classifier_lstm_state": 4,
    "attention_dim": 4, "batch_size": 8, "max_iterations": 2, "seeds": [0],
}


@pytest.fixture
def cli_env(tmp_path):
    synth = tmp_path / "synth.yaml"
    synth.write_text(yaml.safe_dump(TINY_SYNTH.model_dump(mode="json")))
    run = tmp_path / "run.yaml"
    run.write_text(yaml.safe_dump({**SMALL_RUN, "dataset": "synthetic", "synth_config": str(synth),
                                   "store_dir": str(tmp_path / "store")}))
    return tmp_path, ["--config", str(run)]


@pytest.fixture
def store(cli_env):
    tmp, args = cli_env
    assert main(["synth", *args]) == 0
    return tmp / "store"


def test_synth_writes_store_and_run_report(store, tmp_path):
    assert (store / "manifest.yaml").exists()
    report = (tmp_path / "runs" / "reports" / "synth_store.md").read_text()
    assert "SUCCESS" in report and "### quality" in report


def test_preprocess_missing_directory_fails_without_store(tmp_path):
    code = main(["preprocess", "--dataset", "pamap2", "--data-dir", str(tmp_path / "absent"),
                 "--store", str(tmp_path / "pamap2_store")])
    assert code == 1
    assert not (tmp_path / "pamap2_store").exists()
    assert "ingest" in (tmp_path / "runs" / "reports" / "preprocess_pamap2.md").read_text()


def test_train_writes_checkpoint_log_and_config_snapshot(store, cli_env):
    tmp, args = cli_env
    out = tmp / "train_run"
    assert main(["train", *args, "--new-user", "user02", "--variant", "base", "--out", str(out)]) == 0
    assert (out / "checkpoints" / "final.pt").exists()
    assert len(pd.read_csv(out / "logs" / "training_log.csv")) == 2
    assert yaml.safe_load((out / "config.yaml").read_text())["variant"] == "base"
    summary = yaml.safe_load((out / "reports" / "train_summary.yaml").read_text())
    assert summary["read_adaptation"] is False
    assert yaml.safe_load((out / "run_meta.yaml").read_text())["status"] == "success"


def test_train_needs_new_user(store, cli_env):
    _, args = cli_env
    assert main(["train", *args]) == 2


def test_existing_run_directory_is_not_overwritten(store, cli_env):
    tmp, args = cli_env
    out = tmp / "run"
    cmd = ["train", *args, "--new-user", "user01", "--variant", "base", "--out", str(out)]
    assert main(cmd) == 0
    assert main(cmd) == 2
    assert main([*cmd, "--overwrite"]) == 0


def test_evaluate_full_louo_with_exports(store, cli_env):
    tmp, args = cli_env
    out = tmp / "eval"
    assert main(["evaluate", *args, "--out", str(out), "--export-features", "--attention-report"]) == 0
    per_user = pd.read_csv(out / "reports" / "per_user_metrics.csv")
    assert per_user["user"].tolist() == ["user01", "user02", "user03", "overall"]

    report = yaml.safe_load((out / "reports" / "report.yaml").read_text())
    for fold in report["folds"]:
        total = sum(map(sum, fold["confusion"]))
        trace = sum(fold["confusion"][i][i] for i in range(len(fold["confusion"])))
        assert abs(fold["accuracy"] - trace / total) < 1e-12

    features = pd.read_csv(out / "reports" / "features" / "full_seed0_user01_test.csv")
    assert [c for c in features.columns if c.startswith("f")] == ["f0", "f1", "f2"]
    attention = pd.read_csv(out / "reports" / "attention.csv")
    assert set(attention["new_user"]) == {"user01", "user02", "user03"}


def test_evaluate_checkpoint(store, cli_env):
    tmp, args = cli_env
    assert main(["train", *args, "--new-user", "user03", "--out", str(tmp / "t")]) == 0
    out = tmp / "e"
    assert main(["evaluate", *args, "--new-user", "user03", "--checkpoint", str(tmp / "t" / "checkpoints" / "final.pt"),
                 "--out", str(out)]) == 0
    per_user = pd.read_csv(out / "reports" / "per_user_metrics.csv")
    assert per_user["user"].tolist() == ["user03", "overall"]


def test_ablate_emits_one_row_per_variant_on_identical_splits(store, cli_env):
    tmp, args = cli_env
    out = tmp / "ablate"
    assert main(["ablate", *args, "--out", str(out)]) == 0
    table = pd.read_csv(out / "reports" / "ablation.csv")
    assert table["variant"].tolist() == ["base", "LD", "GD", "LDGD", "full"]
    assert (table["status"] == "ok").all()
    assert table["split_fingerprint"].nunique() == 1


def test_unknown_variant_is_usage_error(store, cli_env):
    _, args = cli_env
    assert main(["evaluate", *args, "--variant", "nope"]) == 2


def test_bad_seeds_flag_is_usage_error(cli_env):
    _, args = cli_env
    assert main(["evaluate", *args, "--seeds", "0,x"]) == 2


def test_synth_rerun_and_store_overwrite(store, cli_env):
    tmp, args = cli_env
    before = (store / "index.csv").read_bytes()
    assert main(["synth", *args]) == 0  # same inputs, same store
    assert main(["synth", *args, "--seeds", "1"]) == 1
    assert (store / "index.csv").read_bytes() == before
    assert main(["synth", *args, "--seeds", "1", "--overwrite"]) == 0


def test_synth_refuses_foreign_directory(cli_env):
    tmp, args = cli_env
    foreign = tmp / "raw"
    foreign.mkdir()
    (foreign / "raw_subject101.dat").write_text("1 2 3\n")
    assert main(["synth", *args, "--store", str(foreign), "--overwrite"]) == 2
    assert (foreign / "raw_subject101.dat").exists()
