"""End-to-end helpers shared by the CLI and the ablation suite."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import CLIP_SECONDS, load_corpus_examples, select_condition_channels
from .events import roll_to_events
from .labels import TECHNIQUE_LABELS
from .metrics import SegmentMetrics, binarize, segment_metrics, conditions_table
from .model import Checkpoint, save_checkpoint
from .runconfig import RunConfig, ABLATION_CONDITIONS
from .training import make_fold_plan, predict_activations, split_examples, train


def evaluate_examples(
    examples,
    activations,
    threshold: float = 0.5,
    segment_seconds: float = 0.100,
    clip_seconds: float = CLIP_SECONDS,
) -> SegmentMetrics:
    """Merge per-clip segment metrics of thresholded activations."""
    parts = []
    for ex, act in zip(examples, activations):
        pred_events = roll_to_events(binarize(act, threshold))
        ref_events = ex.events if ex.events is not None else roll_to_events(ex.labels)
        parts.append(segment_metrics(ref_events, pred_events, clip_seconds, segment_seconds))
    return SegmentMetrics.merge(parts)


@dataclass
class ConditionResult:
    condition: str
    metrics: SegmentMetrics | None
    checkpoint: Checkpoint | None
    log: list
    error: str | None = None


def run_condition(
    base_config: RunConfig,
    condition: str,
    examples_full,
    plan,
    fold_index: int,
    log_path=None,
) -> ConditionResult:
    """Train and evaluate one ablation condition on a fixed fold plan."""
    cfg = base_config.with_condition(condition)
    use_pitch, single_res = cfg.channel_flags()
    examples = select_condition_channels(examples_full, use_pitch, single_res)
    tr, val, test = split_examples(examples, plan, fold_index)
    model_config = cfg.effective_model_config()
    result = train(tr, val, model_config, cfg.train, log_path=log_path)
    acts = predict_activations(
        test, result.model, model_config, stats=result.stats, batch_size=cfg.train.batch_size
    )
    metrics = evaluate_examples(
        test, acts, threshold=cfg.threshold, segment_seconds=cfg.segment_seconds
    )
    ckpt = Checkpoint(
        config=model_config,
        model=result.model,
        stats=result.stats,
        extra={
            "condition": condition,
            "fold": fold_index,
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
            "train_config": cfg.train.to_dict(),
        },
    )
    return ConditionResult(condition=condition, metrics=metrics, checkpoint=ckpt, log=result.log)


def run_ablation_suite(
    base_config: RunConfig,
    corpus_dir,
    fold_index: int,
    out_dir,
    manifest: dict | None = None,
) -> list:
    """Train/evaluate the full model and the five ablations on one fold.

    All conditions share the same fold plan and seed; a failing
    condition is reported with a failure marker instead of aborting.
    """
    from .synth import load_manifest

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = manifest or load_manifest(corpus_dir)
    examples_full = load_corpus_examples(manifest, corpus_dir, base_config.frontend)
    singers = sorted({e.singer_id for e in examples_full})
    plan = make_fold_plan(singers, k=base_config.n_folds, seed=base_config.train.seed)

    results = []
    for condition in ABLATION_CONDITIONS:
        tag = condition.replace("3x3", "k3x3")
        try:
            res = run_condition(
                base_config,
                condition,
                examples_full,
                plan,
                fold_index,
                log_path=out / f"{tag}.log.jsonl",
            )
            save_checkpoint(out / f"{tag}.pdnc", res.checkpoint)
        except Exception as e:  # partial report with failure markers
            res = ConditionResult(condition=condition, metrics=None, checkpoint=None, log=[], error=str(e))
        results.append(res)

    table = conditions_table([(r.condition, r.metrics) for r in results])
    (out / "report.txt").write_text(table + "\n")
    report = {
        "fold": fold_index,
        "plan": [list(g) for g in plan.groups],
        "conditions": {
            r.condition: (r.metrics.to_dict() if r.metrics else {"error": r.error})
            for r in results
        },
    }
    with open(out / "report.json", "w") as f:
        json.dump(report, f, sort_keys=True, indent=2)
    _write_per_class_f(out / "per_class_f.csv", results)
    return results


def _write_per_class_f(path, results) -> None:
    import csv

    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["condition"] + list(TECHNIQUE_LABELS))
        for r in results:
            if r.metrics is None:
                w.writerow([r.condition] + ["failed"] * len(TECHNIQUE_LABELS))
            else:
                w.writerow(
                    [r.condition]
                    + [f"{r.metrics.per_class[l].f_measure:.4f}" for l in TECHNIQUE_LABELS]
                )
