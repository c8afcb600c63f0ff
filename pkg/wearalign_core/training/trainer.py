# wearalign_core/training/trainer.py
"""
Three-step alternating optimization, one iteration =

    1. classify     descend L_C   on θ_FE, θ_AN, θ_AC   (training-user batch)
    2. discriminate descend L_D   on θ_LD, θ_GD         (mixed batch)
    3. confuse      ascend  L_D   on θ_FE, θ_AN         (fresh mixed batch)

Each step owns its Adam instance; θ_FE/θ_AN appear in steps 1 and 3 with
independent moments. Steps 2 and 3 are skipped by the base variant, which
never samples the adaptation set.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple

import numpy as np
import pandas as pd
import torch
from tqdm import tqdm

from wearalign_core.config.settings import NetworkConfig, TrainConfig
from wearalign_core.data.windows import WindowSet
from wearalign_core.models.checkpoint import save_checkpoint
from wearalign_core.models.network import SensorAlignNet, WindowBatch, init_state
from wearalign_core.models.variants import VariantSpec, ablation_variant
from wearalign_core.training.losses import (
    SOURCE_NEW,
    SOURCE_TRAIN,
    classification_loss,
    discriminator_accuracy,
    domain_loss,
)
from wearalign_core.utils.app_logging import log_kv, progress_disabled, setup_logger
from wearalign_core.utils.errors import EmptyInput, NonFiniteLoss, SingleSourceBatch, UnlabeledSample

logger = setup_logger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class SourceLabeledBatch:
    batch: WindowBatch
    source: torch.Tensor  # (B,) 0 = training users, 1 = new user


# ---------------------------------------------------------------------
# Audit + log
# ---------------------------------------------------------------------
@dataclass
class DataAccessAudit:
    """Every window id handed to the network during training, by source."""
    train_ids: Set[str] = field(default_factory=set)
    adapt_ids: Set[str] = field(default_factory=set)

    def record(self, window_ids: List[str], source: int) -> None:
        (self.adapt_ids if source == SOURCE_NEW else self.train_ids).update(window_ids)

    @property
    def read_adaptation(self) -> bool:
        return bool(self.adapt_ids)

    @property
    def consumed(self) -> Set[str]:
        return self.train_ids | self.adapt_ids

    def touched(self, window_ids) -> Set[str]:
        return self.consumed.intersection(str(w) for w in window_ids)


class TrainingLog:
    """
    training_log.csv: iteration, loss_c, loss_d, global_acc, local_acc (one row per
    iteration, flushed as written). Wall-clock seconds go to training_log.timing.csv
    so the main log depends on (data, config, seed) only.
    """
    COLUMNS = ("iteration", "loss_c", "loss_d", "global_acc", "local_acc")

    def __init__(self, log_dir: Optional[str | Path] = None):
        self.rows: List[Dict[str, Optional[float]]] = []
        self._fh = self._timing = None
        if log_dir is not None:
            d = Path(log_dir)
            d.mkdir(parents=True, exist_ok=True)
            self.path = d / "training_log.csv"
            self._fh = open(self.path, "w", encoding="utf-8", newline="\n")
            self._fh.write(",".join(self.COLUMNS) + "\n")
            self._timing = open(d / "training_log.timing.csv", "w", encoding="utf-8", newline="\n")
            self._timing.write("iteration,wall_seconds\n")

    @staticmethod
    def _fmt(v) -> str:
        return "" if v is None else repr(float(v))

    def append(self, iteration: int, loss_c: float, loss_d: Optional[float],
               global_acc: Optional[float], local_acc: Optional[float], wall_seconds: float) -> None:
        row = {"iteration": iteration, "loss_c": loss_c, "loss_d": loss_d,
               "global_acc": global_acc, "local_acc": local_acc}
        self.rows.append(row)
        if self._fh is not None:
            self._fh.write(",".join([str(iteration)] + [self._fmt(row[c]) for c in self.COLUMNS[1:]]) + "\n")
            self._fh.flush()
            self._timing.write(f"{iteration},{wall_seconds:.6f}\n")
            self._timing.flush()

    def close(self) -> None:
        for fh in (self._fh, self._timing):
            if fh is not None and not fh.closed:
                fh.close()

    def __len__(self) -> int:
        return len(self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=list(self.COLUMNS))


# ---------------------------------------------------------------------
# Batches
# ---------------------------------------------------------------------
class BatchSampler:
    """Seeded mini-batches; the adaptation set is only touched by mixed_batch()."""

    def __init__(self, train_set: WindowSet, adapt_set: Optional[WindowSet], batch_size: int,
                 rng: np.random.Generator, dtype: torch.dtype, audit: DataAccessAudit):
        self.train_set = train_set
        self.adapt_set = adapt_set
        self.batch_size = batch_size
        self.rng = rng
        self.dtype = dtype
        self.audit = audit

    def _draw(self, pool: int, size: int) -> np.ndarray:
        return self.rng.choice(pool, size=size, replace=pool < size)

    def classify_batch(self) -> WindowBatch:
        batch = WindowBatch.from_windowset(self.train_set, self._draw(len(self.train_set), self.batch_size),
                                           dtype=self.dtype)
        self.audit.record(batch.window_ids, SOURCE_TRAIN)
        return batch

    def mixed_batch(self) -> SourceLabeledBatch:
        if self.adapt_set is None or not len(self.adapt_set):
            raise EmptyInput("mixed batches need adaptation windows of the new user")
        n_train = self.batch_size // 2
        n_new = self.batch_size - n_train
        tu = self.train_set.take(self._draw(len(self.train_set), n_train))
        nu = self.adapt_set.take(self._draw(len(self.adapt_set), n_new))
        self.audit.record([str(w) for w in tu.window_ids], SOURCE_TRAIN)
        self.audit.record([str(w) for w in nu.window_ids], SOURCE_NEW)
        batch = WindowBatch.from_windowset(WindowSet.concat([tu, nu.without_labels()]), dtype=self.dtype)
        source = torch.cat([torch.full((n_train,), SOURCE_TRAIN), torch.full((n_new,), SOURCE_NEW)]).long()
        return SourceLabeledBatch(batch, source)


# ---------------------------------------------------------------------
# Steps
# ---------------------------------------------------------------------
class AdversarialTrainer:
    def __init__(self, net: SensorAlignNet, config: TrainConfig):
        self.net = net
        self.config = config
        self.variant: VariantSpec = net.variant
        self.lambda_weight = self.variant.effective_lambda(config.lambda_weight)
        self.iteration = 0
        groups = net.parameter_groups()

        def adam(names):
            params = [p for n in names for p in groups.get(n, [])]
            return torch.optim.Adam(params, lr=config.learning_rate,
                                    betas=(config.adam_beta1, config.adam_beta2), eps=config.adam_eps)

        self.opt_classify = adam(["theta_FE", "theta_AN", "theta_AC"])
        self.opt_discriminate = adam(["theta_LD", "theta_GD"]) if self.variant.adapts else None
        self.opt_confuse = adam(["theta_FE", "theta_AN"]) if self.variant.adapts else None

    def _check(self, step: str, loss: torch.Tensor) -> None:
        if not torch.isfinite(loss):
            raise NonFiniteLoss(step, self.iteration, float(loss.detach()))

    @staticmethod
    def _require_both_sources(mixed: SourceLabeledBatch) -> None:
        present = set(mixed.source.unique().tolist())
        if present != {SOURCE_TRAIN, SOURCE_NEW}:
            raise SingleSourceBatch(f"mixed batch holds sources {sorted(present)}; need both 0 and 1")

    def step_classify(self, batch: WindowBatch) -> float:
        self.net.train()
        self.net.zero_grad(set_to_none=True)
        loss = classification_loss(self.net(batch), batch.labels)
        self._check("classify", loss)
        loss.backward()
        self.opt_classify.step()
        return float(loss.detach())

    def step_discriminate(self, mixed: SourceLabeledBatch) -> Tuple[float, Optional[float], Optional[float]]:
        """Returns (L_D, global accuracy, mean local accuracy) measured before the update."""
        self._require_both_sources(mixed)
        self.net.train()
        self.net.zero_grad(set_to_none=True)
        trace = self.net(mixed.batch)
        loss = domain_loss(trace, mixed.source, self.lambda_weight)
        self._check("discriminate", loss)
        loss.backward()
        self.opt_discriminate.step()
        with torch.no_grad():
            g_acc = None if trace.global_probs is None else discriminator_accuracy(trace.global_probs, mixed.source)
            l_acc = None if trace.local_probs is None else discriminator_accuracy(trace.local_probs, mixed.source)
        return float(loss.detach()), g_acc, l_acc

    def step_confuse(self, mixed: SourceLabeledBatch) -> float:
        """Gradient ascent on L_D for θ_FE, θ_AN (descent on -L_D); discriminators stay fixed."""
        self._require_both_sources(mixed)
        self.net.train()
        self.net.zero_grad(set_to_none=True)
        loss = domain_loss(self.net(mixed.batch), mixed.source, self.lambda_weight)
        self._check("confuse", loss)
        (-loss).backward()
        self.opt_confuse.step()
        return float(loss.detach())


# ---------------------------------------------------------------------
# Loop
# ---------------------------------------------------------------------
def moving_average_converged(losses: List[float], window: int, patience: int, tol: float) -> bool:
    """True when the window-mean of the loss moved by < tol over the last `patience` iterations."""
    if len(losses) < window + patience:
        return False
    now = float(np.mean(losses[-window:]))
    before = float(np.mean(losses[-window - patience:-patience]))
    return abs(now - before) < tol


@dataclass
class TrainResult:
    net: SensorAlignNet
    log: TrainingLog
    audit: DataAccessAudit
    iterations: int
    converged: bool

    def __iter__(self):
        # (state, log) unpacking
        return iter((self.net, self.log))


def train(train_set: WindowSet, adapt_set: Optional[WindowSet], network_config: NetworkConfig,
          train_config: TrainConfig, variant: str | VariantSpec = "full",
          log_dir: Optional[str | Path] = None, checkpoint_dir: Optional[str | Path] = None,
          audit: Optional[DataAccessAudit] = None) -> TrainResult:
    """
    Train one variant for one held-out user. Batches are drawn fresh for each of
    the three steps from a generator seeded by train_config.seed.
    """
    spec = ablation_variant(variant)
    if not len(train_set):
        raise EmptyInput("no training-user windows")
    if not train_set.is_labeled:
        raise UnlabeledSample("training-user windows must all carry labels")
    if spec.adapts and (adapt_set is None or not len(adapt_set)):
        raise EmptyInput(f"variant {spec.name} needs adaptation windows of the new user")

    dtype = DTYPES[train_config.precision]
    net = init_state(network_config, train_config.seed, spec,
                     detach_local_outputs=train_config.detach_local_outputs, dtype=dtype)
    trainer = AdversarialTrainer(net, train_config)
    audit = audit if audit is not None else DataAccessAudit()
    rng = np.random.default_rng(np.random.SeedSequence(train_config.seed).spawn(1)[0])
    # base never receives the adaptation set at all
    sampler = BatchSampler(train_set, adapt_set if spec.adapts else None,
                           train_config.batch_size, rng, dtype, audit)
    log = TrainingLog(log_dir)
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None

    losses_c: List[float] = []
    converged = False
    it = 0
    log_kv(logger, "train.start", variant=spec.name, seed=train_config.seed, n_train=len(train_set),
           n_adapt=len(adapt_set) if (adapt_set is not None and spec.adapts) else 0,
           max_iterations=train_config.max_iterations)
    try:
        bar = tqdm(range(train_config.max_iterations), desc=f"train[{spec.name}]",
                   disable=progress_disabled(), leave=False)
        for it in bar:
            trainer.iteration = it
            t0 = time.perf_counter()
            loss_c = trainer.step_classify(sampler.classify_batch())
            loss_d = g_acc = l_acc = None
            if spec.adapts:
                loss_d, g_acc, l_acc = trainer.step_discriminate(sampler.mixed_batch())
                trainer.step_confuse(sampler.mixed_batch())
            log.append(it, loss_c, loss_d, g_acc, l_acc, time.perf_counter() - t0)
            losses_c.append(loss_c)

            if ckpt_dir is not None and train_config.checkpoint_every and (it + 1) % train_config.checkpoint_every == 0:
                save_checkpoint(ckpt_dir / f"iter_{it + 1:06d}.pt", net, iteration=it + 1)
            if train_config.use_convergence and moving_average_converged(
                losses_c, train_config.convergence_window, train_config.convergence_patience,
                train_config.convergence_tol,
            ):
                converged = True
                break
    except NonFiniteLoss as e:
        log_kv(logger, "train.abort", level=40, step=e.step, iteration=e.iteration, value=e.value)
        raise
    finally:
        log.close()

    iterations = len(log)
    if ckpt_dir is not None:
        save_checkpoint(ckpt_dir / "final.pt", net, iteration=iterations)
    net.eval()
    last = log.rows[-1] if log.rows else {}
    log_kv(logger, "train.done", variant=spec.name, iterations=iterations, converged=converged,
           loss_c=None if not last else round(last["loss_c"], 5),
           loss_d=None if not last or last["loss_d"] is None else round(last["loss_d"], 5))
    return TrainResult(net=net, log=log, audit=audit, iterations=iterations, converged=converged)


@torch.no_grad()
def predict(net: SensorAlignNet, windows: WindowSet, batch_size: int = 256):
    """(predicted class indices, class logits) for every window, in order."""
    net.eval()
    preds, logits = [], []
    for start in range(0, len(windows), batch_size):
        batch = WindowBatch.from_windowset(windows, np.arange(start, min(start + batch_size, len(windows))),
                                           dtype=net.dtype)
        trace = net(batch)
        logits.append(trace.class_logits)
        preds.append(trace.class_logits.argmax(dim=-1))
    if not preds:
        return np.zeros(0, dtype=np.int64), np.zeros((0, net.config.n_classes))
    return torch.cat(preds).cpu().numpy(), torch.cat(logits).cpu().double().numpy()
