from __future__ import annotations

import hashlib
import shutil
import sys
import traceback
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import pandas as pd
import yaml

from wearalign_core.config.config import CONFIG, dataset_defaults
from wearalign_core.config.path_utils import safe_filename, to_abs
from wearalign_core.config.settings import (
    VARIANTS,
    NetworkConfig,
    RunConfig,
    SynthConfig,
    load_config_file,
    load_run_config,
    serialize_config,
)
from wearalign_core.data.ingestion import load_real_dataset
from wearalign_core.data.layouts import SensorLayout, load_layout
from wearalign_core.data.preprocess import build_dataset
from wearalign_core.data.splits import SplitSpec, make_louo_split, normalize_split
from wearalign_core.data.store import StoredDataset, check_store_target, read_store, write_store
from wearalign_core.data.synthetic import generate_synthetic, synthetic_layout
from wearalign_core.data.windows import window_geometry
from wearalign_core.evaluation.louo import FoldHook, TrainedFold, evaluate_fold, run_louo
from wearalign_core.evaluation.reports import MetricsReport, attention_report, export_features
from wearalign_core.models.checkpoint import load_checkpoint
from wearalign_core.models.variants import ablation_variant
from wearalign_core.training.trainer import DataAccessAudit, train
from wearalign_core.utils.app_logging import log_kv, setup_logger
from wearalign_core.utils.errors import InvalidConfig, LouoAborted, RunDirectoryExists, WearAlignError
from wearalign_core.utils.quality import check_store, store_summary

logger = setup_logger(__name__)

EXIT_OK, EXIT_STAGE_FAILED, EXIT_USAGE = 0, 1, 2

Info = Dict[str, Any]


@dataclass
class StageResult:
    ok: bool
    info: Info
    error: Optional[str] = None
    value: Any = None


class StageFailed(RuntimeError):
    def __init__(self, stage: str, error: str):
        super().__init__(f"stage '{stage}' failed: {error}")
        self.stage = stage


def _run_stage(name: str, fn: Callable[[], Tuple[Any, Info]], stage_infos: Dict[str, Info]) -> Any:
    try:
        value, info = fn()
        res = StageResult(ok=True, info=info, value=value)
    except Exception as e:
        res = StageResult(ok=False, info={}, error=f"{type(e).__name__}: {e}")
        log_kv(logger, "stage.failed", level=40, stage=name, error=res.error)
    stage_infos[name] = {"ok": res.ok} | res.info | ({"error": res.error} if res.error else {})
    if not res.ok:
        raise StageFailed(name, res.error)
    return res.value


# ---------------------------------------------------------------------
# Run directory + reports
# ---------------------------------------------------------------------
def _now_iso() -> str:
    return datetime.now().isoformat(timespec="seconds")


def prepare_run_dir(cfg: RunConfig, command: str) -> Path:
    """config.yaml is written first, then logs/, checkpoints/, reports/."""
    out = to_abs(cfg.out_dir or f"{CONFIG['paths']['runs_dir']}/{cfg.dataset}/{command}-{cfg.variant}")
    if out.exists() and any(out.iterdir()):
        if not cfg.overwrite:
            raise RunDirectoryExists(f"run directory {out} exists (pass --overwrite to replace it)")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(serialize_config(cfg), encoding="utf-8")
    for sub in ("logs", "checkpoints", "reports"):
        (out / sub).mkdir(exist_ok=True)
    return out


def write_report(path: Path, command: str, success: bool, stage_infos: Dict[str, Info],
                 err: Optional[str]) -> Path:
    lines = [
        f"# WearAlign run — {command}",
        "",
        f"- Status: **{'SUCCESS' if success else 'ERROR'}**",
        "",
        "## Stages",
    ]
    for stage, info in stage_infos.items():
        lines.append(f"### {stage}")
        for k, v in info.items():
            lines.append(f"- {k}: {v}")
        lines.append("")
    if err:
        lines += ["## Error", "", "```\n" + err + "\n```", ""]
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines), encoding="utf-8")
    return path


def _write_meta(path: Path, command: str, started: str, status: str) -> None:
    meta = {"command": command, "started_at": started, "finished_at": _now_iso(), "status": status}
    path.write_text(yaml.safe_dump(meta, sort_keys=False), encoding="utf-8")


def _orchestrate(command: str, cfg: RunConfig, body: Callable[[Optional[Path], Dict[str, Info]], None],
                 report_path: Path, run_dir: Optional[Path] = None) -> int:
    started = _now_iso()
    stage_infos: Dict[str, Info] = {}
    try:
        log_kv(logger, "START", command=command, dataset=cfg.dataset, variant=cfg.variant)
        body(run_dir, stage_infos)
        write_report(report_path, command, True, stage_infos, err=None)
        status, code = "success", EXIT_OK
        log_kv(logger, "DONE", command=command, report=report_path)
    except StageFailed as e:
        tb = traceback.format_exc(limit=6)
        write_report(report_path, command, False, stage_infos, err=f"{e}\n{tb}")
        print(f"[run_experiment] {command}: {e}", file=sys.stderr)
        status, code = f"failed:{e.stage}", EXIT_STAGE_FAILED
    if run_dir is not None:
        _write_meta(run_dir / "run_meta.yaml", command, started, status)
    return code


def config_fingerprint(cfg: RunConfig) -> str:
    # fields that do not change results are left out
    keep = cfg.model_dump(mode="json", exclude={"overwrite", "out_dir", "log_level", "export_features",
                                                "attention_report", "checkpoint"})
    return hashlib.sha256(yaml.safe_dump(keep, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------
# Stage bodies: each returns (value, info)
# ---------------------------------------------------------------------
def _check_geometry(cfg: RunConfig, sampling_rate_hz: float) -> None:
    """l and T' are validated before any data is read."""
    length, _ = window_geometry(sampling_rate_hz, cfg.window_seconds, cfg.overlap_seconds, cfg.step_seconds)
    cfg.network_config([3], length, 1).check_geometry()


def _ingest(data_dir: str, layout: SensorLayout):
    seqs = load_real_dataset(data_dir, layout)
    return seqs, {"directory": data_dir, "preset": layout.name, "sequences": len(seqs)}


def _generate(synth: SynthConfig, seed: int):
    seqs = generate_synthetic(synth, seed)
    return seqs, {"users": synth.n_users, "classes": synth.n_classes, "seed": seed}


def _segment(seqs, layout: SensorLayout, cfg: RunConfig):
    ds = build_dataset(seqs, layout, cfg.window_seconds, cfg.overlap_seconds, cfg.step_seconds)
    return ds, {"users": len(ds.users), "windows": len(ds.windows), "window_frames": ds.windows.window_frames,
                "step_frames": ds.step_frames}


def _store(cfg: RunConfig, ds: StoredDataset):
    return write_store(cfg.store_dir, ds, overwrite=cfg.overwrite), {"path": cfg.store_dir}


def _quality(cfg: RunConfig):
    return None, {"users_checked": len(check_store(cfg.store_dir))}


def _summary(cfg: RunConfig):
    return None, store_summary(cfg.store_dir)


def _load_store(cfg: RunConfig):
    ds = read_store(cfg.store_dir)
    return ds, {"store": cfg.store_dir, "users": len(ds.users), "windows": len(ds.windows)}


def _network(cfg: RunConfig, ds: StoredDataset):
    net_cfg = cfg.network_config(ds.layout.channel_counts, ds.windows.window_frames,
                                 ds.layout.n_classes, ds.layout.sensor_names)
    net_cfg.check_geometry()
    return net_cfg, {"window_frames": net_cfg.window_frames, "feature_length": net_cfg.feature_length}


def _split(cfg: RunConfig, ds: StoredDataset, seed: int):
    split = normalize_split(make_louo_split(ds.windows, cfg.new_user, seed))
    return split, {"new_user": cfg.new_user, "n_train": len(split.train_set), "n_adapt": len(split.adapt_set),
                   "n_test": len(split.test_set), "split_fingerprint": split.fingerprint()}


def _train(cfg: RunConfig, net_cfg: NetworkConfig, split: SplitSpec, seed: int, run_dir: Path):
    spec = ablation_variant(cfg.variant)
    result = train(split.train_set, split.adapt_set, net_cfg, cfg.train_config(seed), spec,
                   log_dir=run_dir / "logs", checkpoint_dir=run_dir / "checkpoints")
    info = {"variant": spec.name, "seed": seed, "iterations": result.iterations, "converged": result.converged,
            "read_adaptation": result.audit.read_adaptation, "checkpoint": "checkpoints/final.pt"}
    summary = info | {"new_user": cfg.new_user, "split_fingerprint": split.fingerprint()}
    (run_dir / "reports" / "train_summary.yaml").write_text(yaml.safe_dump(summary, sort_keys=False),
                                                           encoding="utf-8")
    return result, info


def _louo(cfg: RunConfig, ds: StoredDataset, net_cfg: NetworkConfig, variant: str, run_dir: Path,
          out: Path, hook: Optional[FoldHook] = None):
    users = [cfg.new_user] if cfg.new_user else None
    try:
        report = run_louo(ds, variant, cfg.train_config(cfg.seeds[0]), cfg.seeds, network_config=net_cfg,
                          users=users, out_dir=run_dir / "logs", fold_hook=hook, dataset_name=cfg.dataset,
                          config_fingerprint=config_fingerprint(cfg))
    except LouoAborted as e:
        e.report.write(out)  # partial
        raise
    report.write(out)
    s = report.summary()
    return report, {"variant": variant, "folds": len(report.folds), "accuracy": round(s["accuracy"], 4),
                    "macro_f1": round(s["macro_f1"], 4), "split_fingerprint": report.split_fingerprint()}


def _evaluate_checkpoint(cfg: RunConfig, ds: StoredDataset, out: Path):
    net, iteration = load_checkpoint(to_abs(cfg.checkpoint))
    seed = cfg.seeds[0]
    split = normalize_split(make_louo_split(ds.windows, cfg.new_user, seed))
    report = MetricsReport(variant=net.variant.name, dataset=cfg.dataset, class_names=ds.layout.class_names,
                           seeds=[seed], config_fingerprint=config_fingerprint(cfg))
    report.folds.append(evaluate_fold(net, split, ds.layout.n_classes, seed, DataAccessAudit(), iteration, False))
    report.write(out)
    return report, {"checkpoint": cfg.checkpoint, "accuracy": round(report.folds[0].accuracy, 4)}


def _fold_exports(cfg: RunConfig, run_dir: Path, class_names: List[str],
                  attention_tables: List[pd.DataFrame]) -> FoldHook:
    feature_dir = run_dir / "reports" / "features"

    def hook(fold: TrainedFold) -> None:
        name = safe_filename(f"{fold.net.variant.name}_seed{fold.metrics.seed}_{fold.metrics.user}")
        if cfg.export_features:
            for tag, ws in (("train", fold.split.train_set), ("adapt", fold.split.adapt_set),
                            ("test", fold.split.test_set)):
                export_features(fold.net, ws, tag, feature_dir / f"{name}_{tag}.csv")
        if cfg.attention_report and fold.net.attention is not None:
            rep = attention_report(fold.net, fold.split.test_set, new_user=fold.metrics.user,
                                   class_names=class_names)
            attention_tables.append(rep.table.assign(seed=fold.metrics.seed))

    return hook


def _write_attention(tables: List[pd.DataFrame], out: Path):
    table = pd.concat(tables, ignore_index=True)
    table.to_csv(out / "attention.csv", index=False, lineterminator="\n")
    return table, {"rows": len(table), "path": "reports/attention.csv"}


# ---------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------
def cmd_preprocess(cfg: RunConfig) -> int:
    """Raw per-user files -> processed-window store, then SQL checks and the summary."""
    if cfg.dataset == "synthetic":
        return cmd_synth(cfg)
    layout = load_layout(dataset_defaults(cfg.dataset).get("preset", cfg.dataset))
    _check_geometry(cfg, layout.sampling_rate_hz)
    check_store_target(cfg.store_dir)
    data_dir = cfg.data_dir or f"{CONFIG['paths']['data_root']}/{cfg.dataset}"

    def body(_, stages):
        seqs = _run_stage("ingest", lambda: _ingest(data_dir, layout), stages)
        ds = _run_stage("segment", lambda: _segment(seqs, layout, cfg), stages)
        _run_stage("store", lambda: _store(cfg, ds), stages)
        _run_stage("quality", lambda: _quality(cfg), stages)
        _run_stage("summary", lambda: _summary(cfg), stages)

    report = to_abs(CONFIG["paths"]["runs_dir"]) / "reports" / f"preprocess_{cfg.dataset}.md"
    return _orchestrate("preprocess", cfg, body, report_path=report)


def cmd_synth(cfg: RunConfig) -> int:
    synth = load_config_file(SynthConfig, to_abs(cfg.synth_config)) if cfg.synth_config else SynthConfig()
    layout = synthetic_layout(synth)
    _check_geometry(cfg, layout.sampling_rate_hz)
    check_store_target(cfg.store_dir)
    seed = cfg.seeds[0]

    def body(_, stages):
        seqs = _run_stage("generate", lambda: _generate(synth, seed), stages)
        ds = _run_stage("segment", lambda: _segment(seqs, layout, cfg), stages)
        _run_stage("store", lambda: _store(cfg, ds), stages)
        _run_stage("quality", lambda: _quality(cfg), stages)
        _run_stage("summary", lambda: _summary(cfg), stages)

    report = to_abs(CONFIG["paths"]["runs_dir"]) / "reports" / f"synth_{Path(cfg.store_dir).name}.md"
    return _orchestrate("synth", cfg, body, report_path=report)


def cmd_train(cfg: RunConfig) -> int:
    if not cfg.new_user:
        raise InvalidConfig("train needs --new-user")
    ablation_variant(cfg.variant)
    run_dir = prepare_run_dir(cfg, "train")
    seed = cfg.seeds[0]

    def body(run_dir, stages):
        ds = _run_stage("load_store", lambda: _load_store(cfg), stages)
        net_cfg = _run_stage("geometry", lambda: _network(cfg, ds), stages)
        split = _run_stage("split", lambda: _split(cfg, ds, seed), stages)
        _run_stage("train", lambda: _train(cfg, net_cfg, split, seed, run_dir), stages)

    return _orchestrate("train", cfg, body, run_dir / "reports" / "run_report.md", run_dir=run_dir)


def cmd_evaluate(cfg: RunConfig) -> int:
    if cfg.checkpoint and not cfg.new_user:
        raise InvalidConfig("evaluating a checkpoint needs --new-user")
    ablation_variant(cfg.variant)
    run_dir = prepare_run_dir(cfg, "evaluate")

    def body(run_dir, stages):
        out = run_dir / "reports"
        ds = _run_stage("load_store", lambda: _load_store(cfg), stages)
        if cfg.checkpoint:
            _run_stage("evaluate_checkpoint", lambda: _evaluate_checkpoint(cfg, ds, out), stages)
            return
        net_cfg = _run_stage("geometry", lambda: _network(cfg, ds), stages)
        tables: List[pd.DataFrame] = []
        hook = _fold_exports(cfg, run_dir, ds.layout.class_names, tables)
        _run_stage("louo", lambda: _louo(cfg, ds, net_cfg, cfg.variant, run_dir, out, hook), stages)
        if tables:
            _run_stage("attention_report", lambda: _write_attention(tables, out), stages)

    return _orchestrate("evaluate", cfg, body, run_dir / "reports" / "run_report.md", run_dir=run_dir)


def cmd_ablate(cfg: RunConfig) -> int:
    """All five variants on identical splits and seeds; a failed variant is marked and the rest proceed."""
    run_dir = prepare_run_dir(cfg, "ablate")

    def body(run_dir, stages):
        ds = _run_stage("load_store", lambda: _load_store(cfg), stages)
        net_cfg = _run_stage("geometry", lambda: _network(cfg, ds), stages)
        rows = []
        for variant in VARIANTS:
            out = run_dir / "reports" / variant
            try:
                report = _run_stage(f"louo.{variant}",
                                    lambda v=variant, o=out: _louo(cfg, ds, net_cfg, v, run_dir, o), stages)
                rows.append({"variant": variant, "status": "ok", **report.summary(),
                             "split_fingerprint": report.split_fingerprint()})
            except StageFailed as e:
                rows.append({"variant": variant, "status": "failed", "error": str(e)})

        table = pd.DataFrame(rows)
        ok = table["status"] == "ok"
        fingerprints = set(table.loc[ok, "split_fingerprint"]) if ok.any() else set()
        table.to_csv(run_dir / "reports" / "ablation.csv", index=False, lineterminator="\n")
        stages["ablation"] = {"ok": bool(ok.all()) and len(fingerprints) <= 1, "variants": len(rows),
                              "failed": int((~ok).sum()), "splits_match": len(fingerprints) <= 1}
        if len(fingerprints) > 1:
            raise StageFailed("ablation", "variants were evaluated on different splits")
        if not ok.all():
            raise StageFailed("ablation", f"variants failed: {table.loc[~ok, 'variant'].tolist()}")

    return _orchestrate("ablate", cfg, body, run_dir / "reports" / "run_report.md", run_dir=run_dir)


COMMANDS = {
    "preprocess": cmd_preprocess,
    "synth": cmd_synth,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
}


# ---------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------
def _parse_args(argv: List[str]):
    import argparse
    p = argparse.ArgumentParser(description="Sensor-level adversarial alignment experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=str, default=None, help="Run config (flat YAML)")
    p.add_argument("--dataset", choices=["pamap2", "opportunity", "synthetic"], default=None)
    p.add_argument("--variant", type=str, default=None, help="base | LD | GD | LDGD | full")
    p.add_argument("--new-user", dest="new_user", type=str, default=None, help="Held-out user id")
    p.add_argument("--seeds", type=str, default=None, help="Comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--out", dest="out_dir", type=str, default=None, help="Run directory")
    p.add_argument("--store", dest="store_dir", type=str, default=None, help="Processed-window store")
    p.add_argument("--data-dir", dest="data_dir", type=str, default=None, help="Raw dataset directory")
    p.add_argument("--synth-config", dest="synth_config", type=str, default=None)
    p.add_argument("--checkpoint", type=str, default=None, help="Evaluate this checkpoint (with --new-user)")
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=None)
    p.add_argument("--export-features", dest="export_features", action="store_true", default=None)
    p.add_argument("--attention-report", dest="attention_report", action="store_true", default=None)
    p.add_argument("--overwrite", action="store_true", default=None)
    p.add_argument("--log-level", dest="log_level", type=str, default=None)
    return p.parse_args(argv)


def _overrides(args) -> Dict[str, Any]:
    out = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    if args.seeds is not None:
        try:
            out["seeds"] = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError as e:
            raise InvalidConfig(f"--seeds: {e}") from e
    return out


def main(argv: Optional[List[str]] = None) -> int:
    args = _parse_args(sys.argv[1:] if argv is None else argv)
    try:
        cfg = load_run_config(args.config, _overrides(args))
        setup_logger(level=cfg.log_level)
        return COMMANDS[args.command](cfg)
    except WearAlignError as e:
        # raised before any stage ran: configuration or usage problem
        print(f"[run_experiment] {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
