import pytest
import yaml

from wearalign_core.config.config import CONFIG, dataset_defaults
from wearalign_core.config.path_utils import as_project_relative, project_root, safe_filename, to_abs
from wearalign_core.config.settings import (
    NetworkConfig,
    RunConfig,
    SynthConfig,
    TrainConfig,
    load_run_config,
    parse_config,
    serialize_config,
)
from wearalign_core.models.variants import ablation_variant
from wearalign_core.utils.errors import InvalidConfig, UnknownVariant


@pytest.mark.parametrize("cfg", [
    RunConfig(dataset="pamap2", new_user="subject101", seeds=[4, 5], step_seconds=0.5),
    TrainConfig(learning_rate=0.001, precision="float64"),
    SynthConfig(misaligned_sensor=0, sensor_channels=[1, 3]),
    NetworkConfig(sensor_channels=[1, 3, 3], window_frames=200, n_classes=12, sensor_names=["hr", "a", "g"]),
])
def test_parse_serialize_parse_is_identity(cfg):
    again = parse_config(type(cfg), serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


def test_dataset_defaults_from_project_config():
    pamap2 = load_run_config(overrides={"dataset": "pamap2"})
    assert pamap2.learning_rate == 0.0005 and pamap2.lambda_weight == 0.5
    assert (pamap2.window_seconds, pamap2.overlap_seconds) == (2.0, 1.0)
    opp = load_run_config(overrides={"dataset": "opportunity"})
    assert opp.learning_rate == 0.0001 and opp.window_seconds == 10.0
    assert dataset_defaults("pamap2")["preset"] == "pamap2"


def test_precedence_file_then_cli(tmp_path):
    f = tmp_path / "run.yaml"
    f.write_text(yaml.safe_dump({"dataset": "pamap2", "learning_rate": 0.01, "batch_size": 16}))
    cfg = load_run_config(f, {"batch_size": 32, "variant": None})
    assert cfg.learning_rate == 0.01
    assert cfg.batch_size == 32
    assert cfg.variant == "full"
    assert cfg.store_dir == f"{CONFIG['paths']['store_dir']}/pamap2"


def test_invalid_values_raise_invalid_config(tmp_path):
    with pytest.raises(InvalidConfig):
        load_run_config(overrides={"lambda_weight": 1.5})
    with pytest.raises(InvalidConfig):
        load_run_config(overrides={"window_seconds": 1.0, "overlap_seconds": 1.0})
    with pytest.raises(InvalidConfig):
        parse_config(RunConfig, "[1, 2]")
    with pytest.raises(InvalidConfig):
        load_run_config(tmp_path / "missing.yaml")
    with pytest.raises(InvalidConfig):
        parse_config(TrainConfig, {"learning_rate": 0.1, "typo_key": 1})


def test_network_geometry_helpers():
    cfg = NetworkConfig(sensor_channels=[1, 2], window_frames=32, n_classes=2)
    assert cfg.temporal_lengths() == [14, 5, 1]
    assert cfg.extractor_channels == 3
    assert NetworkConfig(sensor_channels=[6, 2], window_frames=32, n_classes=2).extractor_channels == 6


def test_variant_lambda():
    assert ablation_variant("base").effective_lambda(0.5) is None
    assert ablation_variant("GD").effective_lambda(0.5) == 1.0
    assert ablation_variant("LD").effective_lambda(0.5) == 0.0
    assert ablation_variant("full").effective_lambda(0.3) == 0.3
    with pytest.raises(UnknownVariant):
        ablation_variant("LDG")


def test_paths():
    assert as_project_relative("/data/raw/", "x") == "data/raw"
    assert as_project_relative(None, "runs") == "runs"
    assert to_abs("runs") == project_root() / "runs"
    assert to_abs(project_root()) == project_root()
    assert safe_filename("S1 run/2", ".npy") == "S1_run_2.npy"
    assert safe_filename("subject101") == "subject101"
