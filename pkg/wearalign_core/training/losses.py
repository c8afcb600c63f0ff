# wearalign_core/training/losses.py
from __future__ import annotations

from typing import Optional

import torch
import torch.nn.functional as F
from torch import Tensor

from wearalign_core.data.cleaning import NULL_LABEL
from wearalign_core.models.network import ForwardTrace
from wearalign_core.utils.errors import MissingSourceLabels, UnlabeledSample

SOURCE_TRAIN = 0
SOURCE_NEW = 1


def classification_loss(trace: ForwardTrace, labels: Tensor) -> Tensor:
    """L_C: mean cross-entropy of the classifier over labeled training-user windows."""
    labels = torch.as_tensor(labels, dtype=torch.long, device=trace.class_logits.device)
    if labels.shape[0] != trace.class_logits.shape[0]:
        raise UnlabeledSample(f"{labels.shape[0]} labels for {trace.class_logits.shape[0]} windows")
    if bool((labels == NULL_LABEL).any()):
        raise UnlabeledSample(f"{int((labels == NULL_LABEL).sum())} windows in the batch carry no label")
    return F.cross_entropy(trace.class_logits, labels)


def domain_loss(trace: ForwardTrace, source: Optional[Tensor], lambda_weight: float) -> Tensor:
    """
    L_D = mean_i [ λ CE(u_i, global_i) + (1 - λ) mean_k CE(u_i, y_ik) ].
    A term whose discriminator is absent from the trace is dropped (λ forced to 0 or 1).
    """
    if source is None:
        raise MissingSourceLabels("domain loss needs a source label per window")
    source = torch.as_tensor(source, dtype=torch.long, device=trace.class_logits.device)
    n = trace.class_logits.shape[0]
    if source.shape != (n,) or bool(((source != SOURCE_TRAIN) & (source != SOURCE_NEW)).any()):
        raise MissingSourceLabels(f"expected {n} source labels in {{0, 1}}, got shape {tuple(source.shape)}")

    has_global = trace.global_logits is not None
    has_local = trace.local_logits is not None
    if not (has_global or has_local):
        raise ValueError("trace has no domain discriminator outputs")
    lam = float(lambda_weight) if has_global and has_local else (1.0 if has_global else 0.0)

    loss = trace.class_logits.new_zeros(())
    if has_global and lam > 0.0:
        loss = loss + lam * F.cross_entropy(trace.global_logits, source)
    if has_local and lam < 1.0:
        k = trace.local_logits.shape[1]
        local = F.cross_entropy(trace.local_logits.reshape(-1, 2), source.repeat_interleave(k))
        loss = loss + (1.0 - lam) * local
    return loss


def discriminator_accuracy(probs: Tensor, source: Tensor) -> float:
    """Batch accuracy of a (…, 2) discriminator output; local outputs (B, K, 2) are averaged over sensors."""
    pred = probs.argmax(dim=-1)
    target = source.view(-1, *([1] * (pred.dim() - 1))).expand_as(pred)
    return float((pred == target).double().mean())
