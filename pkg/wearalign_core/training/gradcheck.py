# wearalign_core/training/gradcheck.py
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
import torch

from wearalign_core.models.network import SensorAlignNet, WindowBatch
from wearalign_core.training.losses import classification_loss, domain_loss


@dataclass(frozen=True)
class GradCheckResult:
    loss: str
    group: str
    parameter: str
    index: int
    analytic: float
    numeric: float

    @property
    def abs_error(self) -> float:
        return abs(self.analytic - self.numeric)

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric))
        return 0.0 if scale == 0.0 else self.abs_error / scale

    def ok(self, rel_tol: float = 1e-4, abs_tol: float = 1e-7) -> bool:
        return self.abs_error < abs_tol or self.rel_error < rel_tol


def finite_difference_check(net: SensorAlignNet, labeled: WindowBatch, mixed: Optional[WindowBatch] = None,
                            source: Optional[torch.Tensor] = None, lambda_weight: float = 0.5,
                            samples_per_group: int = 50, step: float = 1e-5, seed: int = 0) -> pd.DataFrame:
    """
    Compare autograd gradients of L_C (on `labeled`) and L_D (on `mixed`/`source`)
    with central differences for `samples_per_group` random scalars of every θ group.
    Run the network in float64; one row per (loss, sampled scalar).
    """
    if net.dtype != torch.float64:
        raise ValueError("finite-difference checks need a float64 network")
    losses: Dict[str, Callable[[], torch.Tensor]] = {
        "L_C": lambda: classification_loss(net(labeled), labeled.labels),
    }
    if mixed is not None and net.variant.adapts:
        losses["L_D"] = lambda: domain_loss(net(mixed), source, lambda_weight)

    rng = np.random.default_rng(seed)
    named = dict(net.named_parameters())
    reverse = {id(p): n for n, p in named.items()}
    rows: List[GradCheckResult] = []
    net.eval()
    for loss_name, fn in losses.items():
        net.zero_grad(set_to_none=True)
        fn().backward()
        for group, params in net.parameter_groups().items():
            sizes = np.array([p.numel() for p in params])
            total = int(sizes.sum())
            picks = rng.choice(total, size=min(samples_per_group, total), replace=False)
            offsets = np.cumsum(np.concatenate([[0], sizes]))
            for flat in np.sort(picks):
                j = int(np.searchsorted(offsets, flat, side="right") - 1)
                p, i = params[j], int(flat - offsets[j])
                analytic = 0.0 if p.grad is None else float(p.grad.reshape(-1)[i])
                with torch.no_grad():
                    view = p.data.view(-1)
                    orig = float(view[i])
                    view[i] = orig + step
                    plus = float(fn())
                    view[i] = orig - step
                    minus = float(fn())
                    view[i] = orig
                rows.append(GradCheckResult(loss_name, group, reverse[id(p)], i,
                                            analytic, (plus - minus) / (2.0 * step)))
    df = pd.DataFrame([asdict(r) for r in rows])
    df["abs_error"] = [r.abs_error for r in rows]
    df["rel_error"] = [r.rel_error for r in rows]
    df["ok"] = [r.ok() for r in rows]
    return df
