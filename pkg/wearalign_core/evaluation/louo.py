# wearalign_core/evaluation/louo.py
from __future__ import annotations

import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from tqdm import tqdm

from wearalign_core.config.settings import NetworkConfig, TrainConfig
from wearalign_core.data.splits import SplitSpec, make_louo_split, normalize_split
from wearalign_core.data.store import StoredDataset
from wearalign_core.evaluation.metrics import accuracy, confusion_matrix, macro_f1
from wearalign_core.evaluation.reports import FoldMetrics, MetricsReport
from wearalign_core.models.network import SensorAlignNet
from wearalign_core.models.variants import VariantSpec, ablation_variant
from wearalign_core.training.trainer import DataAccessAudit, predict, train
from wearalign_core.utils.app_logging import log_kv, progress_disabled, setup_logger
from wearalign_core.utils.errors import LouoAborted, ProtocolViolation, SingleUserDataset

logger = setup_logger(__name__)


@dataclass
class TrainedFold:
    """What a fold hook receives: the fold's metrics, its trained network and its (normalized) split."""
    metrics: FoldMetrics
    net: SensorAlignNet
    split: SplitSpec
    audit: DataAccessAudit


FoldHook = Callable[[TrainedFold], None]


def network_config_for(dataset: StoredDataset, **overrides) -> NetworkConfig:
    return NetworkConfig(
        sensor_channels=dataset.layout.channel_counts,
        window_frames=dataset.windows.window_frames,
        n_classes=dataset.layout.n_classes,
        sensor_names=dataset.layout.sensor_names,
        **overrides,
    )


def check_exclusivity(split: SplitSpec, audit: DataAccessAudit, variant: VariantSpec) -> None:
    """No test window reaches train(); the base model never reads the adaptation half."""
    leaked = audit.touched(split.test_set.window_ids)
    if leaked:
        raise ProtocolViolation(f"{len(leaked)} test windows of {split.new_user} were consumed during training")
    if split.new_user in set(split.train_set.user_ids.tolist()):
        raise ProtocolViolation(f"new user {split.new_user} present in the training users")
    if not variant.adapts and audit.read_adaptation:
        raise ProtocolViolation(f"variant {variant.name} read adaptation windows")


def evaluate_fold(net: SensorAlignNet, split: SplitSpec, n_classes: int, seed: int, audit: DataAccessAudit,
                  iterations: int, converged: bool) -> FoldMetrics:
    preds, _ = predict(net, split.test_set)
    truth = split.test_set.labels
    return FoldMetrics(
        seed=seed, user=split.new_user,
        accuracy=accuracy(preds, truth),
        macro_f1=macro_f1(preds, truth, n_classes),
        confusion=confusion_matrix(preds, truth, n_classes),
        n_test=len(split.test_set), n_train=len(split.train_set), n_adapt=len(split.adapt_set),
        iterations=iterations, converged=converged, read_adaptation=audit.read_adaptation,
        split_fingerprint=split.fingerprint(),
    )


def run_louo(dataset: StoredDataset, variant: str | VariantSpec, train_config: TrainConfig, seeds: Sequence[int],
             network_config: Optional[NetworkConfig] = None, users: Optional[Sequence[str]] = None,
             out_dir: Optional[str | Path] = None, fold_hook: Optional[FoldHook] = None,
             dataset_name: str = "", config_fingerprint: str = "") -> MetricsReport:
    """
    Every user (or the `users` subset) is the new user once per seed. Folds run
    sequentially; normalization stats come from each fold's train + adapt windows.
    A failing fold raises LouoAborted carrying the report of the folds completed so far.
    """
    spec = ablation_variant(variant)
    all_users = dataset.users
    if len(all_users) < 2:
        raise SingleUserDataset("leave-one-user-out needs at least two users")
    targets = list(users) if users is not None else all_users
    network_config = network_config or network_config_for(dataset)
    report = MetricsReport(variant=spec.name, dataset=dataset_name or dataset.layout.name,
                           class_names=dataset.layout.class_names, seeds=[int(s) for s in seeds],
                           config_fingerprint=config_fingerprint)
    out = Path(out_dir) if out_dir is not None else None

    folds = [(int(seed), user) for seed in seeds for user in targets]
    bar = tqdm(folds, desc=f"louo[{spec.name}]", disable=progress_disabled())
    for seed, user in bar:
        bar.set_postfix(seed=seed, user=user)
        try:
            split = normalize_split(make_louo_split(dataset.windows, user, seed))
            audit = DataAccessAudit()
            fold_dir = out / spec.name / f"seed{seed}" / user if out is not None else None
            result = train(
                split.train_set, split.adapt_set, network_config,
                train_config.model_copy(update={"seed": seed}), spec,
                log_dir=fold_dir / "logs" if fold_dir is not None else None,
                checkpoint_dir=fold_dir / "checkpoints" if fold_dir is not None else None,
                audit=audit,
            )
            check_exclusivity(split, audit, spec)
            metrics = evaluate_fold(result.net, split, dataset.layout.n_classes, seed, audit,
                                    result.iterations, result.converged)
            report.folds.append(metrics)
            log_kv(logger, "louo.fold", variant=spec.name, seed=seed, user=user,
                   accuracy=round(metrics.accuracy, 4), macro_f1=round(metrics.macro_f1, 4))
            if fold_hook is not None:
                fold_hook(TrainedFold(metrics, result.net, split, audit))
        except Exception as e:
            report.error = f"fold seed={seed} user={user}: {type(e).__name__}: {e}\n{traceback.format_exc(limit=6)}"
            log_kv(logger, "louo.abort", level=40, variant=spec.name, seed=seed, user=user, error=type(e).__name__)
            raise LouoAborted(f"LOUO aborted at seed={seed} user={user}: {e}", report) from e

    s = report.summary()
    log_kv(logger, "louo.done", variant=spec.name, folds=len(report.folds),
           accuracy=round(s.get("accuracy", np.nan), 4), macro_f1=round(s.get("macro_f1", np.nan), 4))
    return report
