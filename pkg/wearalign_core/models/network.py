# wearalign_core/models/network.py
"""
Sensor-level adversarial alignment network.

    records r_1..r_K ──► FeatureExtractor_k ──► X_k (T' × F)
                              │                    │
                              ▼                    ▼ mean over time
                     LocalDiscriminator_k     pooled x_k ──► keys
                              │ y_k                          │
                              └──► Ȳ ──► query ──► α = softmax(key·q / √h)
                                                   │
                             v = Σ α_k X_k ◄───────┘
                             ├──► GlobalDiscriminator ──► (p_train, p_new)
                             └──► ActivityClassifier  ──► class distribution

Variants drop the discriminators and/or the attention network
(see wearalign_core.models.variants); without attention α is uniform.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import Tensor, nn

from wearalign_core.config.settings import NetworkConfig
from wearalign_core.data.cleaning import NULL_LABEL
from wearalign_core.data.windows import LabeledWindow, WindowSet
from wearalign_core.models.variants import VariantSpec, ablation_variant
from wearalign_core.utils.errors import ShapeMismatch

INIT_GAIN = 1.0

# parameter group -> attribute holding its modules
GROUP_MODULES: Dict[str, str] = {
    "theta_FE": "extractors",
    "theta_LD": "local_discriminators",
    "theta_GD": "global_discriminator",
    "theta_AN": "attention",
    "theta_AC": "classifier",
}


# ---------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------
@dataclass
class WindowBatch:
    records: List[Tensor]  # K tensors (B, l, c_k)
    labels: Tensor         # (B,) long, NULL_LABEL where absent
    window_ids: List[str]

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def is_labeled(self) -> bool:
        return bool(len(self)) and bool((self.labels != NULL_LABEL).all())

    @classmethod
    def from_windowset(cls, ws: WindowSet, index: Optional[Sequence[int]] = None,
                       dtype: torch.dtype = torch.float32) -> "WindowBatch":
        if index is not None:
            ws = ws.take(np.asarray(index, dtype=np.int64))
        return cls(
            records=[torch.as_tensor(r, dtype=dtype) for r in ws.records],
            labels=torch.as_tensor(ws.labels, dtype=torch.long),
            window_ids=[str(w) for w in ws.window_ids],
        )

    @classmethod
    def from_windows(cls, windows: Sequence[LabeledWindow], dtype: torch.dtype = torch.float32) -> "WindowBatch":
        return cls.from_windowset(WindowSet.from_windows(windows), dtype=dtype)


# ---------------------------------------------------------------------
# Functional pieces
# ---------------------------------------------------------------------
def temporal_pool(features: Tensor) -> Tensor:
    """Mean over the time axis: (..., T', F) -> (..., F)."""
    return features.mean(dim=-2)


def attention_weights(scores: Tensor) -> Tensor:
    return torch.softmax(scores, dim=-1)


def fuse(features: Tensor | Sequence[Tensor], alpha: Tensor) -> Tensor:
    """
    v = Σ_k α_k X_k over full sequences.
    features: (B, K, T', F) or K tensors (B, T', F); alpha: (B, K) or (K,).
    """
    if not isinstance(features, Tensor):
        shapes = {tuple(x.shape) for x in features}
        if len(shapes) != 1:
            raise ShapeMismatch(f"feature sequences disagree on shape: {sorted(shapes)}")
        features = torch.stack(list(features), dim=-3)
    if alpha.shape[-1] != features.shape[-3]:
        raise ShapeMismatch(f"{alpha.shape[-1]} attention weights for {features.shape[-3]} sensors")
    return (alpha[..., None, None] * features).sum(dim=-3)


# ---------------------------------------------------------------------
# Components
# ---------------------------------------------------------------------
class FeatureExtractor(nn.Module):
    """
    conv1: F kernels of (3 × 5) over (channel × time), valid on channels, stride 2 on time;
    the residual channel axis is folded into the feature maps so conv2/conv3 are temporal.
    Output (B, T', F).
    """

    def __init__(self, in_channels: int, config: NetworkConfig):
        super().__init__()
        kh, kw = config.conv1_kernel
        self.in_channels = in_channels
        self.width = config.extractor_channels
        residual = self.width - kh + 1
        self.conv1 = nn.Conv2d(1, config.conv_kernels, (kh, kw), stride=(1, config.conv_stride))
        self.conv2 = nn.Conv1d(config.conv_kernels * residual, config.conv_kernels,
                               config.conv23_kernel[1], stride=config.conv_stride)
        self.conv3 = nn.Conv1d(config.conv_kernels, config.conv_kernels,
                               config.conv23_kernel[1], stride=config.conv_stride)

    def forward(self, record: Tensor) -> Tensor:
        x = record.transpose(1, 2)  # (B, c, l)
        # every sensor is zero-padded to max(max c_k, 3) rows so all extractors share one shape
        if self.width > x.shape[1]:
            x = F.pad(x, (0, 0, 0, self.width - x.shape[1]))
        x = F.relu(self.conv1(x.unsqueeze(1)))  # (B, F, c', T1)
        x = F.relu(self.conv2(x.flatten(1, 2)))
        x = F.relu(self.conv3(x))
        return x.transpose(1, 2)


class BiLSTMHead(nn.Module):
    """Stacked bidirectional LSTM; final forward/backward states of the top layer -> Linear."""

    def __init__(self, input_size: int, hidden_size: int, num_layers: int, n_outputs: int):
        super().__init__()
        self.lstm = nn.LSTM(input_size, hidden_size, num_layers=num_layers,
                            batch_first=True, bidirectional=True)
        self.fc = nn.Linear(2 * hidden_size, n_outputs)

    def forward(self, seq: Tensor) -> Tensor:
        _, (h_n, _) = self.lstm(seq)
        return self.fc(torch.cat([h_n[-2], h_n[-1]], dim=-1))


class AttentionNetwork(nn.Module):
    """Query from the flattened local outputs Ȳ (2K), keys from pooled sensor features."""

    def __init__(self, n_sensors: int, feature_width: int, dim: int):
        super().__init__()
        self.dim = dim
        self.query = nn.Linear(2 * n_sensors, dim)
        self.key = nn.Linear(feature_width, dim)

    def scores(self, pooled: Tensor, y_bar: Tensor) -> Tensor:
        q = self.query(y_bar)    # (B, h)
        keys = self.key(pooled)  # (B, K, h)
        return torch.einsum("bkh,bh->bk", keys, q) / math.sqrt(self.dim)

    def forward(self, pooled: Tensor, y_bar: Tensor) -> Tensor:
        return attention_weights(self.scores(pooled, y_bar))


# ---------------------------------------------------------------------
# Composed network
# ---------------------------------------------------------------------
@dataclass
class ForwardTrace:
    features: Tensor                 # X (B, K, T', F)
    pooled: Tensor                   # (B, K, F)
    alpha: Tensor                    # (B, K)
    fused: Tensor                    # v (B, T', F)
    class_logits: Tensor             # (B, C)
    class_probs: Tensor
    local_logits: Optional[Tensor] = None   # (B, K, 2)
    local_probs: Optional[Tensor] = None
    global_logits: Optional[Tensor] = None  # (B, 2)
    global_probs: Optional[Tensor] = None

    @property
    def y_bar(self) -> Optional[Tensor]:
        return None if self.local_probs is None else self.local_probs.flatten(1)


class SensorAlignNet(nn.Module):
    def __init__(self, config: NetworkConfig, variant: str | VariantSpec = "full",
                 detach_local_outputs: bool = False):
        super().__init__()
        config.check_geometry()
        self.config = config
        self.variant = ablation_variant(variant)
        self.detach_local_outputs = detach_local_outputs
        K, width = config.n_sensors, config.feature_width

        self.extractors = nn.ModuleList(FeatureExtractor(c, config) for c in config.sensor_channels)
        self.local_discriminators = (
            nn.ModuleList(BiLSTMHead(width, config.local_lstm_state, 1, 2) for _ in range(K))
            if self.variant.local_discriminators else None
        )
        self.global_discriminator = (
            BiLSTMHead(width, config.global_lstm_state, 2, 2) if self.variant.global_discriminator else None
        )
        self.attention = AttentionNetwork(K, width, config.attention_dim) if self.variant.attention else None
        self.classifier = BiLSTMHead(width, config.classifier_lstm_state, 2, config.n_classes)

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def parameter_groups(self) -> Dict[str, List[nn.Parameter]]:
        """θ groups present in this variant, in a fixed order."""
        return {
            name: list(module.parameters())
            for name, module in self.group_modules().items()
        }

    def group_modules(self) -> Dict[str, nn.Module]:
        out = {}
        for name, attr in GROUP_MODULES.items():
            module = getattr(self, attr)
            if module is not None:
                out[name] = module
        return out

    def _records(self, batch: WindowBatch | Sequence[LabeledWindow] | Sequence[Tensor]) -> List[Tensor]:
        if isinstance(batch, WindowBatch):
            records = batch.records
        elif batch and isinstance(batch[0], LabeledWindow):
            records = WindowBatch.from_windows(batch, dtype=self.dtype).records
        else:
            records = list(batch)
        if len(records) != self.config.n_sensors:
            raise ShapeMismatch(f"{len(records)} sensor records, network has {self.config.n_sensors} sensors")
        for k, (r, c) in enumerate(zip(records, self.config.sensor_channels)):
            if r.dim() != 3 or r.shape[1] != self.config.window_frames or r.shape[2] != c:
                raise ShapeMismatch(
                    f"sensor {k}: record shape {tuple(r.shape)}, expected (B, {self.config.window_frames}, {c})"
                )
        return [r.to(self.dtype) for r in records]

    def forward(self, batch: WindowBatch | Sequence[LabeledWindow] | Sequence[Tensor]) -> ForwardTrace:
        records = self._records(batch)
        features = torch.stack([fe(r) for fe, r in zip(self.extractors, records)], dim=1)
        pooled = temporal_pool(features)
        B, K = features.shape[0], features.shape[1]

        local_logits = local_probs = None
        if self.local_discriminators is not None:
            local_logits = torch.stack([ld(features[:, k]) for k, ld in enumerate(self.local_discriminators)], dim=1)
            local_probs = torch.softmax(local_logits, dim=-1)

        if self.attention is not None:
            y_bar = local_probs.flatten(1)
            if self.detach_local_outputs:
                y_bar = y_bar.detach()
            alpha = self.attention(pooled, y_bar)
        else:
            alpha = torch.full((B, K), 1.0 / K, dtype=features.dtype, device=features.device)

        fused = fuse(features, alpha)
        class_logits = self.classifier(fused)
        global_logits = global_probs = None
        if self.global_discriminator is not None:
            global_logits = self.global_discriminator(fused)
            global_probs = torch.softmax(global_logits, dim=-1)

        return ForwardTrace(
            features=features, pooled=pooled, alpha=alpha, fused=fused,
            class_logits=class_logits, class_probs=torch.softmax(class_logits, dim=-1),
            local_logits=local_logits, local_probs=local_probs,
            global_logits=global_logits, global_probs=global_probs,
        )


# ---------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------
def _is_bias(name: str) -> bool:
    return name.rsplit(".", 1)[-1].startswith("bias")


@torch.no_grad()
def reset_parameters(net: nn.Module, seed: int) -> None:
    """
    Weights ~ U(-b, b), b = INIT_GAIN * sqrt(3 / fan_in), fan_in = prod(shape[1:]).
    Biases 0; the forget-gate slice of every LSTM input bias is 1.0.
    """
    gen = torch.Generator().manual_seed(int(seed))
    for name, p in net.named_parameters():
        if _is_bias(name):
            p.zero_()
            if "bias_ih" in name:
                hidden = p.shape[0] // 4
                p[hidden:2 * hidden] = 1.0  # gate order i, f, g, o
            continue
        fan_in = int(np.prod(p.shape[1:]))
        bound = INIT_GAIN * math.sqrt(3.0 / fan_in)
        draw = torch.rand(p.shape, generator=gen, dtype=torch.float64)
        p.copy_((2.0 * draw - 1.0) * bound)


def init_state(config: NetworkConfig, seed: int, variant: str | VariantSpec = "full",
               detach_local_outputs: bool = False, dtype: torch.dtype = torch.float32) -> SensorAlignNet:
    """Deterministic in (config, seed, variant)."""
    net = SensorAlignNet(config, variant, detach_local_outputs=detach_local_outputs).to(dtype)
    reset_parameters(net, seed)
    return net


def group_checksums(net: SensorAlignNet) -> Dict[str, str]:
    """SHA-256 of each θ group's raw parameter bytes."""
    out = {}
    for name, params in net.parameter_groups().items():
        h = hashlib.sha256()
        for p in params:
            h.update(p.detach().cpu().contiguous().numpy().tobytes())
        out[name] = h.hexdigest()
    return out
