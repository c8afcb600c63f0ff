# wearalign_core/models/checkpoint.py
"""
Checkpoint container, format version 1 (torch.save of a plain dict):

    format_version   1
    variant          base | LD | GD | LDGD | full
    precision        float32 | float64
    iteration        training iteration the state was taken at
    network_config   NetworkConfig as a JSON-compatible mapping
    groups           {theta_FE | theta_LD | theta_GD | theta_AN | theta_AC: state_dict}
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Tuple

import torch

from wearalign_core.config.settings import NetworkConfig
from wearalign_core.models.network import GROUP_MODULES, SensorAlignNet
from wearalign_core.utils.errors import FormatError, MissingFile

CHECKPOINT_FORMAT_VERSION = 1
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


def save_checkpoint(path: str | Path, net: SensorAlignNet, iteration: int = 0) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    payload: Dict[str, Any] = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "variant": net.variant.name,
        "precision": "float64" if net.dtype == torch.float64 else "float32",
        "iteration": int(iteration),
        "network_config": net.config.model_dump(mode="json"),
        "groups": {name: module.state_dict() for name, module in net.group_modules().items()},
    }
    torch.save(payload, p)
    return p


def load_checkpoint(path: str | Path) -> Tuple[SensorAlignNet, int]:
    """Rebuild the network from a checkpoint; returns (net, iteration)."""
    p = Path(path)
    if not p.exists():
        raise MissingFile(f"checkpoint not found: {p}")
    payload = torch.load(p, map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise FormatError("unsupported checkpoint format", file=str(p))

    config = NetworkConfig.model_validate(payload["network_config"])
    net = SensorAlignNet(config, payload["variant"]).to(_DTYPES[payload["precision"]])
    expected = set(net.group_modules())
    if set(payload["groups"]) != expected:
        raise FormatError(f"checkpoint groups {sorted(payload['groups'])} do not match variant "
                          f"{payload['variant']} ({sorted(expected)})", file=str(p))
    for name, state in payload["groups"].items():
        getattr(net, GROUP_MODULES[name]).load_state_dict(state)
    return net, int(payload.get("iteration", 0))
