# wearalign_core/config/config.py
import os
from pathlib import Path

import yaml
from dotenv import load_dotenv

from wearalign_core.config.path_utils import as_project_relative

# ---------------------------------------------------------------------
# Resolve repo root no matter where code is run from
# ---------------------------------------------------------------------
ROOT = Path(__file__).resolve().parents[2]
load_dotenv(ROOT / ".env")

DEFAULTS_FILE = ROOT / "configs" / "wearalign.yaml"


def load_config(path: str | Path = DEFAULTS_FILE) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f) or {}


CONFIG = load_config()

# ---------------------------------------------------------------------
# Normalize paths to relative (never absolute); env overrides the data root
# ---------------------------------------------------------------------
CONFIG.setdefault("paths", {})
CONFIG["paths"]["data_root"] = os.getenv("WEARALIGN_DATA_ROOT") or as_project_relative(
    CONFIG["paths"].get("data_root"), "data/raw"
)
for _key, _default in (("store_dir", "data/processed"), ("runs_dir", "runs")):
    CONFIG["paths"][_key] = as_project_relative(CONFIG["paths"].get(_key), _default)


def dataset_defaults(dataset: str) -> dict:
    """Per-dataset defaults merged over the global training defaults."""
    merged = dict(CONFIG.get("training", {}))
    merged.update(CONFIG.get("datasets", {}).get(dataset, {}))
    return merged


if __name__ == "__main__":
    print("data_root =", CONFIG["paths"]["data_root"])
    print("store_dir =", CONFIG["paths"]["store_dir"])
