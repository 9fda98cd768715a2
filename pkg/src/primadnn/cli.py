"""Command-line interface for batch corpus generation, feature
extraction, training, inference, evaluation and reporting."""
from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .audio import FRAME_SECONDS, read_wav
from .dataset import (
    CLIP_SECONDS,
    Example,
    FRAMES_PER_CLIP,
    extract_features,
    load_corpus_examples,
    select_condition_channels,
)
from .events import load_annotations, save_annotations, roll_to_events, events_to_roll
from .frontend import (
    FeatureStack,
    build_mel_filterbank,
    read_feature_file,
    write_feature_file,
)
from .labels import TECHNIQUE_LABELS
from .metrics import SegmentMetrics, binarize, segment_metrics
from .model import Checkpoint, load_checkpoint, save_checkpoint, grad_check, tiny_config
from .pipeline import evaluate_examples, run_ablation_suite
from .pitch import load_pitch_csv
from .runconfig import RunConfig, load_run_config
from .synth import SynthSpec, load_manifest, synth_corpus
from .training import make_fold_plan, predict_activations, split_examples

GRADCHECK_TOLERANCE = 1e-4


def _threads(value) -> int:
    if value:
        return int(value)
    return int(os.environ.get("PRIMADNN_THREADS", "1"))


def _run_config(path) -> RunConfig:
    return load_run_config(path) if path else RunConfig()


def _with_seed(cfg: RunConfig, seed) -> RunConfig:
    if seed is None:
        return cfg
    from dataclasses import replace

    return replace(cfg, train=replace(cfg.train, seed=int(seed)))


@click.group()
def main():
    """Singing technique detection pipeline."""


@main.command()
@click.option("--out", required=True, type=click.Path(), help="Corpus output directory.")
@click.option("--clips", default=200, show_default=True)
@click.option("--singers", default=14, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--clip-seconds", default=10.0, show_default=True)
@click.option("--threads", type=int, default=None, help="Defaults to $PRIMADNN_THREADS or 1.")
def synth(out, clips, singers, seed, clip_seconds, threads):
    """Generate the synthetic technique corpus with ground truth."""
    manifest = synth_corpus(
        SynthSpec(), clips, singers, seed, out, clip_seconds, n_workers=_threads(threads)
    )
    click.echo(f"wrote {len(manifest['clips'])} clips to {out}")


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", type=click.Path(exists=True))
@click.option("--threads", type=int, default=None, help="Defaults to $PRIMADNN_THREADS or 1.")
def extract(corpus, out, config, threads):
    """Write a PDNF feature file per corpus clip."""
    cfg = _run_config(config)
    manifest = load_manifest(corpus)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    root = Path(corpus)
    jobs = [(rec, str(root), str(out_dir), cfg.frontend) for rec in manifest["clips"]]
    n_workers = _threads(threads)
    if n_workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            list(pool.map(_extract_one, jobs))
    else:
        for job in jobs:
            _extract_one(job)
    click.echo(f"extracted features for {len(manifest['clips'])} clips")


def _extract_one(job):
    rec, root, out_dir, frontend_cfg = job
    root = Path(root)
    clip = read_wav(root / rec["wav"])
    fb = build_mel_filterbank(frontend_cfg, clip.sample_rate)
    contour = load_pitch_csv(root / rec["pitch_csv"]) if rec.get("pitch_csv") else None
    stack = extract_features(clip, frontend_cfg, fb=fb, pitch_contour=contour)
    write_feature_file(Path(out_dir) / (Path(rec["wav"]).stem + ".pdnf"), stack)


def _load_examples(corpus, cfg: RunConfig):
    manifest = load_manifest(corpus)
    return manifest, load_corpus_examples(manifest, corpus, cfg.frontend)


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--config", type=click.Path(exists=True))
@click.option("--fold", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", type=int, default=None, help="Override the configured seed.")
def train(corpus, config, fold, out, seed):
    """Train one fold; writes checkpoint.pdnc and train_log.jsonl."""
    cfg = _with_seed(_run_config(config), seed)
    manifest, examples_full = _load_examples(corpus, cfg)
    singers = sorted({e.singer_id for e in examples_full})
    plan = make_fold_plan(singers, k=cfg.n_folds, seed=cfg.train.seed)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = _run_flagged(cfg, examples_full, plan, fold, out_dir)
    save_checkpoint(out_dir / "checkpoint.pdnc", res.checkpoint)
    with open(out_dir / "metrics.json", "w") as f:
        f.write(res.metrics.to_json() + "\n")
    click.echo(res.metrics.to_table("fold %d" % fold))


def _run_flagged(cfg, examples_full, plan, fold, out_dir):
    """Train with the ablation flags exactly as configured."""
    from .pipeline import ConditionResult
    from .training import train as train_fn

    use_pitch, single_res = cfg.channel_flags()
    examples = select_condition_channels(examples_full, use_pitch, single_res)
    tr, val, test = split_examples(examples, plan, fold)
    model_config = cfg.effective_model_config()
    result = train_fn(tr, val, model_config, cfg.train, log_path=out_dir / "train_log.jsonl")
    acts = predict_activations(
        test, result.model, model_config, stats=result.stats, batch_size=cfg.train.batch_size
    )
    metrics = evaluate_examples(test, acts, cfg.threshold, cfg.segment_seconds)
    ckpt = Checkpoint(
        config=model_config,
        model=result.model,
        stats=result.stats,
        extra={"fold": fold, "best_epoch": result.best_epoch, "train_config": cfg.train.to_dict()},
    )
    return ConditionResult("flagged", metrics, ckpt, result.log)


@main.command()
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--corpus", type=click.Path(exists=True))
@click.option("--wav", type=click.Path(exists=True), help="Single clip instead of a corpus.")
@click.option("--pitch", type=click.Path(exists=True), help="Pitch CSV for --wav.")
@click.option("--fold", type=int, default=None, help="Restrict a corpus to this fold's test split.")
@click.option("--config", type=click.Path(exists=True))
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--out", required=True, type=click.Path())
def infer(checkpoint_path, corpus, wav, pitch, fold, config, threshold, out):
    """Write per-clip activation (.act.npy) and detection (.det.csv) files."""
    if (corpus is None) == (wav is None):
        raise click.UsageError("give exactly one of --corpus or --wav")
    cfg = _run_config(config)
    ckpt = load_checkpoint(checkpoint_path)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if corpus:
        manifest, examples_full = _load_examples(corpus, cfg)
        examples = _select_for_checkpoint(examples_full, ckpt)
        if fold is not None:
            singers = sorted({e.singer_id for e in examples})
            plan = make_fold_plan(singers, k=cfg.n_folds, seed=cfg.train.seed)
            _, _, test_singers = plan.fold(fold)
            examples = [e for e in examples if e.singer_id in set(test_singers)]
    else:
        clip = read_wav(wav)
        contour = load_pitch_csv(pitch) if pitch else None
        stack = extract_features(clip, cfg.frontend, pitch_contour=contour)
        stack = stack.select_channels(_ckpt_channels(ckpt))
        examples = [
            Example(
                singer_id="input",
                features=stack,
                labels=np.zeros((ckpt.config.n_classes, stack.n_frames)),
                clip_id=Path(wav).name,
            )
        ]
    acts = predict_activations(examples, ckpt.model, ckpt.config, stats=ckpt.stats)
    for ex, act in zip(examples, acts):
        stem = Path(ex.clip_id).stem
        np.save(out_dir / f"{stem}.act.npy", np.asarray(act))
        save_annotations(roll_to_events(binarize(act, threshold)), out_dir / f"{stem}.det.csv")
    click.echo(f"wrote {len(examples)} activation/detection pairs to {out}")


def _ckpt_channels(ckpt: Checkpoint):
    if ckpt.stats is not None:
        return tuple(ckpt.stats.channel_names)
    from .dataset import channel_names_for

    return channel_names_for(use_pitch=ckpt.config.in_channels in (2, 4))


def _select_for_checkpoint(examples, ckpt):
    names = _ckpt_channels(ckpt)
    return [
        Example(
            singer_id=e.singer_id,
            features=e.features.select_channels(names),
            labels=e.labels,
            clip_id=e.clip_id,
            events=e.events,
        )
        for e in examples
    ]


@main.command("eval")
@click.option("--ref", type=click.Path(exists=True), help="Reference annotation CSV.")
@click.option("--pred", type=click.Path(exists=True), help="Predicted annotation CSV.")
@click.option("--duration", type=float, help="Timeline duration in seconds.")
@click.option("--corpus", type=click.Path(exists=True), help="Corpus with reference annotations.")
@click.option("--pred-dir", type=click.Path(exists=True), help="Directory of .det.csv predictions.")
@click.option("--segment-seconds", default=0.100, show_default=True)
@click.option("--out", type=click.Path(), help="Write the metrics JSON here.")
def eval_cmd(ref, pred, duration, corpus, pred_dir, segment_seconds, out):
    """Segment-based metrics between reference and predicted events."""
    if ref and pred:
        if duration is None:
            raise click.UsageError("--duration is required with --ref/--pred")
        metrics = segment_metrics(
            load_annotations(ref), load_annotations(pred), duration, segment_seconds
        )
    elif corpus and pred_dir:
        manifest = load_manifest(corpus)
        root = Path(corpus)
        pred_root = Path(pred_dir)
        clip_seconds = manifest.get("clip_seconds", CLIP_SECONDS)
        parts = []
        for rec in manifest["clips"]:
            det = pred_root / (Path(rec["wav"]).stem + ".det.csv")
            if not det.exists():
                continue
            parts.append(
                segment_metrics(
                    load_annotations(root / rec["annotation_csv"]),
                    load_annotations(det),
                    clip_seconds,
                    segment_seconds,
                )
            )
        if not parts:
            click.echo("no matching prediction files found", err=True)
            sys.exit(1)
        metrics = SegmentMetrics.merge(parts)
    else:
        raise click.UsageError("give --ref/--pred/--duration or --corpus/--pred-dir")
    click.echo(metrics.to_table())
    for label in TECHNIQUE_LABELS:
        c = metrics.per_class[label]
        click.echo(f"  {label:12s} P={c.precision:.3f} R={c.recall:.3f} F={c.f_measure:.3f}")
    if out:
        with open(out, "w") as f:
            f.write(metrics.to_json() + "\n")


@main.command()
@click.option("--seed", default=0, show_default=True)
def gradcheck(seed):
    """Analytic vs finite-difference gradients on the tiny config."""
    worst = 0.0
    for name, cfg in (
        ("instance-norm", tiny_config()),
        ("batch-norm", tiny_config(norm_kind="batch")),
        ("no-se", tiny_config(se_enabled=False)),
    ):
        report = grad_check(cfg, seed=seed)
        click.echo(f"[{name}]")
        click.echo(report.format())
        worst = max(worst, report.max_error)
    from .model.gradcheck import loss_grad_check

    for kind in ("focal", "bce"):
        err = loss_grad_check(seed=seed, loss_kind=kind)
        click.echo(f"{kind:8s} max_rel_err = {err:.3e}")
        worst = max(worst, err)
    ok = worst < GRADCHECK_TOLERANCE
    click.echo(f"overall {'PASS' if ok else 'FAIL'} (max {worst:.3e}, tol {GRADCHECK_TOLERANCE:g})")
    if not ok:
        sys.exit(1)


@main.command()
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--wav", required=True, type=click.Path(exists=True))
@click.option("--pitch", type=click.Path(exists=True))
@click.option("--ref", type=click.Path(exists=True), help="Reference annotation CSV.")
@click.option("--config", type=click.Path(exists=True))
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--out", required=True, type=click.Path())
def viz(checkpoint_path, wav, pitch, ref, config, threshold, out):
    """Per-clip timeline CSV: time, class, reference, activation, detection."""
    import csv

    cfg = _run_config(config)
    ckpt = load_checkpoint(checkpoint_path)
    clip = read_wav(wav)
    contour = load_pitch_csv(pitch) if pitch else None
    stack = extract_features(clip, cfg.frontend, pitch_contour=contour)
    stack = stack.select_channels(_ckpt_channels(ckpt))
    example = Example(
        singer_id="input",
        features=stack,
        labels=np.zeros((ckpt.config.n_classes, stack.n_frames)),
        clip_id=Path(wav).name,
    )
    act = predict_activations([example], ckpt.model, ckpt.config, stats=ckpt.stats)[0]
    det = binarize(act, threshold)
    n_frames = act.shape[1]
    ref_roll = (
        events_to_roll(load_annotations(ref), n_frames)
        if ref
        else np.zeros((len(TECHNIQUE_LABELS), n_frames))
    )
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time", "class", "reference", "activation", "detection"])
        for t in range(n_frames):
            for k, label in enumerate(TECHNIQUE_LABELS):
                w.writerow(
                    [
                        f"{t * FRAME_SECONDS:.3f}",
                        label,
                        int(ref_roll[k, t]),
                        f"{act[k, t]:.6f}",
                        int(det[k, t]),
                    ]
                )
    click.echo(f"wrote timeline for {n_frames} frames to {out}")


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--config", type=click.Path(exists=True))
@click.option("--fold", default=0, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def ablation(corpus, config, fold, seed, out):
    """Train/evaluate the full model plus the five ablation conditions."""
    cfg = _with_seed(_run_config(config), seed)
    results = run_ablation_suite(cfg, corpus, fold, out)
    click.echo((Path(out) / "report.txt").read_text().rstrip())
    if any(r.metrics is None for r in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
