# wearalign_core/evaluation/reports.py
"""
Report artifacts (schemas in docs/report_format.md):

    report.yaml            MetricsReport: variant, seeds, per-fold metrics, averages, fingerprints
    per_user_metrics.csv   one row per user (mean/min/max over seeds) + one `overall` row
    confusion.csv          long form: seed, user, true, predicted, count
    confusion_normalized.csv  the same cells as fractions of each true-class row
    summary.md             human-readable summary
    attention.csv          per (new_user, activity, sensor): mean α, mean |p_train - p_new|
    <variant>_seed<s>_<user>_<tag>.csv  classifier pre-softmax vectors, one row per window
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import torch
import yaml

from wearalign_core.data.cleaning import NULL_LABEL
from wearalign_core.data.windows import WindowSet
from wearalign_core.evaluation.metrics import row_normalized
from wearalign_core.models.network import SensorAlignNet, WindowBatch
from wearalign_core.utils.errors import VariantWithoutAttention

REPORT_FORMAT_VERSION = 1


# ---------------------------------------------------------------------
# Metrics report
# ---------------------------------------------------------------------
@dataclass
class FoldMetrics:
    seed: int
    user: str
    accuracy: float
    macro_f1: float
    confusion: np.ndarray  # (C, C), rows = true
    n_test: int
    n_train: int
    n_adapt: int
    iterations: int
    converged: bool
    read_adaptation: bool
    split_fingerprint: str

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "seed": int(self.seed),
            "user": self.user,
            "accuracy": float(self.accuracy),
            "macro_f1": float(self.macro_f1),
            "n_test": int(self.n_test),
            "n_train": int(self.n_train),
            "n_adapt": int(self.n_adapt),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "read_adaptation": bool(self.read_adaptation),
            "split_fingerprint": self.split_fingerprint,
            "confusion": self.confusion.astype(int).tolist(),
        }


@dataclass
class MetricsReport:
    variant: str
    dataset: str
    class_names: List[str]
    seeds: List[int]
    config_fingerprint: str = ""
    folds: List[FoldMetrics] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def complete(self) -> bool:
        return self.error is None

    @property
    def users(self) -> List[str]:
        return sorted({f.user for f in self.folds})

    def per_seed(self) -> Dict[int, Dict[str, float]]:
        """Unweighted mean over users, per seed."""
        out = {}
        for seed in self.seeds:
            folds = [f for f in self.folds if f.seed == seed]
            if folds:
                out[seed] = {
                    "accuracy": float(np.mean([f.accuracy for f in folds])),
                    "macro_f1": float(np.mean([f.macro_f1 for f in folds])),
                    "users": len(folds),
                }
        return out

    def summary(self) -> Dict[str, float]:
        """Mean and range over seeds of the per-seed user averages."""
        per_seed = self.per_seed()
        if not per_seed:
            return {}
        acc = np.array([v["accuracy"] for v in per_seed.values()])
        f1 = np.array([v["macro_f1"] for v in per_seed.values()])
        return {
            "accuracy": float(acc.mean()), "accuracy_min": float(acc.min()), "accuracy_max": float(acc.max()),
            "macro_f1": float(f1.mean()), "macro_f1_min": float(f1.min()), "macro_f1_max": float(f1.max()),
        }

    def split_fingerprint(self) -> str:
        h = hashlib.sha256()
        for f in sorted(self.folds, key=lambda f: (f.seed, f.user)):
            h.update(f"{f.seed}|{f.user}|{f.split_fingerprint}\n".encode())
        return h.hexdigest()

    # ---------- tables ----------
    def per_user_frame(self) -> pd.DataFrame:
        rows = []
        for user in self.users:
            folds = [f for f in self.folds if f.user == user]
            acc = np.array([f.accuracy for f in folds])
            f1 = np.array([f.macro_f1 for f in folds])
            rows.append({
                "user": user, "accuracy": acc.mean(), "accuracy_min": acc.min(), "accuracy_max": acc.max(),
                "macro_f1": f1.mean(), "macro_f1_min": f1.min(), "macro_f1_max": f1.max(),
                "n_test": folds[0].n_test, "seeds": len(folds),
            })
        if rows:
            s = self.summary()
            rows.append({"user": "overall", **s, "n_test": sum(r["n_test"] for r in rows),
                         "seeds": len(self.per_seed())})
        return pd.DataFrame(rows, columns=["user", "accuracy", "accuracy_min", "accuracy_max", "macro_f1",
                                           "macro_f1_min", "macro_f1_max", "n_test", "seeds"])

    def confusion_frame(self) -> pd.DataFrame:
        rows = []
        for f in sorted(self.folds, key=lambda f: (f.seed, f.user)):
            for t in range(f.confusion.shape[0]):
                for p in range(f.confusion.shape[1]):
                    rows.append((f.seed, f.user, t, p, int(f.confusion[t, p])))
        return pd.DataFrame(rows, columns=["seed", "user", "true", "predicted", "count"])

    def normalized_confusion_frame(self) -> pd.DataFrame:
        """Per fold, each true-class row divided by its support; empty rows stay 0."""
        rows = []
        for f in sorted(self.folds, key=lambda f: (f.seed, f.user)):
            m = row_normalized(f.confusion)
            for t in range(m.shape[0]):
                for p in range(m.shape[1]):
                    rows.append((f.seed, f.user, t, p, float(m[t, p])))
        return pd.DataFrame(rows, columns=["seed", "user", "true", "predicted", "fraction"])

    def to_mapping(self) -> Dict[str, Any]:
        return {
            "format_version": REPORT_FORMAT_VERSION,
            "variant": self.variant,
            "dataset": self.dataset,
            "status": "complete" if self.complete else "partial",
            "error": self.error,
            "seeds": [int(s) for s in self.seeds],
            "class_names": list(self.class_names),
            "config_fingerprint": self.config_fingerprint,
            "split_fingerprint": self.split_fingerprint(),
            "summary": self.summary(),
            "per_seed": {int(k): v for k, v in self.per_seed().items()},
            "folds": [f.to_mapping() for f in sorted(self.folds, key=lambda f: (f.seed, f.user))],
        }

    def to_markdown(self) -> str:
        s = self.summary()
        lines = [
            f"# LOUO report: {self.dataset} / {self.variant}",
            "",
            f"- Status: **{'COMPLETE' if self.complete else 'PARTIAL'}**",
            f"- Seeds: {', '.join(str(x) for x in self.seeds)}",
            f"- Users: {len(self.users)}",
        ]
        if s:
            lines += [
                f"- Accuracy: {s['accuracy']:.4f} (range {s['accuracy_min']:.4f}–{s['accuracy_max']:.4f})",
                f"- Macro F1: {s['macro_f1']:.4f} (range {s['macro_f1_min']:.4f}–{s['macro_f1_max']:.4f})",
            ]
        lines += ["", "## Per user", "", "| user | accuracy | macro F1 | n_test |", "|---|---|---|---|"]
        for _, r in self.per_user_frame().iterrows():
            lines.append(f"| {r['user']} | {r['accuracy']:.4f} | {r['macro_f1']:.4f} | {int(r['n_test'])} |")
        if self.error:
            lines += ["", "## Error", "", "```\n" + self.error + "\n```"]
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> Path:
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        (d / "report.yaml").write_text(yaml.safe_dump(self.to_mapping(), sort_keys=False), encoding="utf-8")
        self.per_user_frame().to_csv(d / "per_user_metrics.csv", index=False, lineterminator="\n")
        self.confusion_frame().to_csv(d / "confusion.csv", index=False, lineterminator="\n")
        self.normalized_confusion_frame().to_csv(d / "confusion_normalized.csv", index=False, lineterminator="\n")
        (d / "summary.md").write_text(self.to_markdown(), encoding="utf-8")
        return d


# ---------------------------------------------------------------------
# Attention / alignment report
# ---------------------------------------------------------------------
@dataclass
class AttentionReport:
    table: pd.DataFrame  # new_user, activity, sensor, mean_attention, mean_output_difference, n_windows

    def sensor_summary(self) -> pd.DataFrame:
        """Per sensor means over every (user, activity) cell, weighted by window count."""
        t = self.table.assign(
            wa=self.table["mean_attention"] * self.table["n_windows"],
            wd=self.table["mean_output_difference"] * self.table["n_windows"],
        )
        g = t.groupby("sensor", sort=False)[["wa", "wd", "n_windows"]].sum()
        return pd.DataFrame({
            "sensor": g.index,
            "mean_attention": (g["wa"] / g["n_windows"]).to_numpy(),
            "mean_output_difference": (g["wd"] / g["n_windows"]).to_numpy(),
        })

    def least_aligned_sensor(self) -> str:
        s = self.sensor_summary()
        return str(s.loc[s["mean_output_difference"].idxmax(), "sensor"])

    def write(self, path: str | Path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        self.table.to_csv(p, index=False, lineterminator="\n")
        return p


@torch.no_grad()
def attention_report(net: SensorAlignNet, test_windows: WindowSet, activity_filter: Optional[Sequence[int]] = None,
                     new_user: Optional[str] = None, class_names: Optional[Sequence[str]] = None,
                     batch_size: int = 256) -> AttentionReport:
    """Mean attention weight and mean local-discriminator output difference per sensor and activity."""
    if net.attention is None or net.local_discriminators is None:
        raise VariantWithoutAttention(f"variant {net.variant.name} has no attention network")
    ws = test_windows
    if activity_filter is not None:
        ws = ws.take(np.flatnonzero(np.isin(ws.labels, list(activity_filter))))
    names = net.config.sensor_names or [f"sensor_{k}" for k in range(net.config.n_sensors)]

    net.eval()
    alphas, diffs = [], []
    for start in range(0, len(ws), batch_size):
        trace = net(WindowBatch.from_windowset(ws, np.arange(start, min(start + batch_size, len(ws))), dtype=net.dtype))
        alphas.append(trace.alpha.double().cpu().numpy())
        diffs.append((trace.local_probs[..., 0] - trace.local_probs[..., 1]).abs().double().cpu().numpy())
    rows = []
    if alphas:
        alpha, diff = np.concatenate(alphas), np.concatenate(diffs)
        users = ws.user_ids.astype(str) if new_user is None else np.full(len(ws), new_user)
        for user in sorted(set(users.tolist())):
            for label in sorted(set(ws.labels[users == user].tolist())):
                m = (users == user) & (ws.labels == label)
                if label == NULL_LABEL:
                    activity = "unlabeled"
                else:
                    activity = class_names[label] if class_names is not None else str(label)
                for k, name in enumerate(names):
                    rows.append({
                        "new_user": user, "activity": activity, "sensor": name,
                        "mean_attention": float(alpha[m, k].mean()),
                        "mean_output_difference": float(diff[m, k].mean()),
                        "n_windows": int(m.sum()),
                    })
    return AttentionReport(pd.DataFrame(rows, columns=["new_user", "activity", "sensor", "mean_attention",
                                                       "mean_output_difference", "n_windows"]))


# ---------------------------------------------------------------------
# Feature export
# ---------------------------------------------------------------------
@torch.no_grad()
def export_features(net: SensorAlignNet, windows: WindowSet, tag: str, path: str | Path,
                    batch_size: int = 256) -> pd.DataFrame:
    """One row per window: user, window id, label (blank if none), tag, pre-softmax classifier vector."""
    net.eval()
    logits = []
    for start in range(0, len(windows), batch_size):
        batch = WindowBatch.from_windowset(windows, np.arange(start, min(start + batch_size, len(windows))),
                                           dtype=net.dtype)
        logits.append(net(batch).class_logits.double().cpu().numpy())
    width = net.config.n_classes
    values = np.concatenate(logits) if logits else np.zeros((0, width))
    df = pd.DataFrame({
        "user_id": windows.user_ids.astype(str),
        "window_id": windows.window_ids.astype(str),
        "label": pd.array([None if v == NULL_LABEL else int(v) for v in windows.labels], dtype="Int64"),
        "tag": tag,
    })
    for c in range(width):
        df[f"f{c}"] = values[:, c]
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(p, index=False, lineterminator="\n")
    return df
