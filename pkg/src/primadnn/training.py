"""Training harness: singer-wise folds, focal/BCE objective, RAdam,
validation-based early stopping, JSON-lines logging."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, asdict, field

import numpy as np

from .frontend import ChannelStats, compute_channel_stats
from .losses import FocalLossParams, bce_loss, focal_loss
from .model import ModelConfig, ModelParams, init_params, model_forward, model_backward
from .optim import RAdam


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    patience_epochs: int = 20
    batch_size: int = 16
    max_epochs: int = 100
    seed: int = 0
    loss_kind: str = "focal"
    alpha: float = 0.13
    gamma: float = 1.33
    alpha_mode: str = "balanced"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    min_delta: float = 0.0

    def __post_init__(self):
        if self.patience_epochs < 1:
            raise ValueError("patience_epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.loss_kind not in ("focal", "bce"):
            raise ValueError(f"loss_kind must be 'focal' or 'bce', got {self.loss_kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass(frozen=True)
class FoldPlan:
    """Disjoint singer groups; fold i tests on group i, validates on i+1."""

    groups: tuple  # tuple of tuples of singer ids

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(tuple(g) for g in self.groups))
        seen = [s for g in self.groups for s in g]
        if len(seen) != len(set(seen)):
            raise ValueError("a singer appears in more than one group")

    @property
    def n_folds(self) -> int:
        return len(self.groups)

    def fold(self, i: int):
        """(train_singers, val_singers, test_singers) for fold i."""
        k = self.n_folds
        if not 0 <= i < k:
            raise ValueError(f"fold index {i} out of range for {k} folds")
        test = set(self.groups[i])
        val = set(self.groups[(i + 1) % k])
        train = set(s for g in self.groups for s in g) - test - val
        return sorted(train), sorted(val), sorted(test)


def make_fold_plan(singers, k: int = 7, seed: int = 0) -> FoldPlan:
    """Seeded shuffle, round-robin assignment into k groups."""
    singers = list(singers)
    if len(singers) < k:
        raise ValueError(f"need at least {k} singers, got {len(singers)}")
    rng = np.random.default_rng(seed)
    order = [singers[i] for i in rng.permutation(len(singers))]
    groups = [tuple(order[i::k]) for i in range(k)]
    return FoldPlan(groups=tuple(groups))


def split_examples(examples, plan: FoldPlan, fold_index: int):
    train_s, val_s, test_s = plan.fold(fold_index)
    pick = lambda names: [e for e in examples if e.singer_id in set(names)]
    return pick(train_s), pick(val_s), pick(test_s)


@dataclass
class TrainResult:
    model: ModelParams
    stats: ChannelStats
    log: list  # one dict per epoch
    best_epoch: int
    best_val_loss: float


def _loss_fn(cfg: TrainConfig):
    if cfg.loss_kind == "bce":
        return lambda act, labels: bce_loss(act, labels)
    params = FocalLossParams(alpha=cfg.alpha, gamma=cfg.gamma, alpha_mode=cfg.alpha_mode)
    return lambda act, labels: focal_loss(act, labels, params)


def _batched(items, batch_size):
    for i in range(0, len(items), batch_size):
        yield items[i : i + batch_size]


def _stack_batch(examples, idx, dtype, moments=None):
    x = np.stack([examples[i].features.data for i in idx]).astype(dtype)
    if moments is not None:
        mean, std = moments
        x = (x - mean[None, :, None, None].astype(dtype)) / std[None, :, None, None].astype(dtype)
    y = np.stack([examples[i].labels for i in idx]).astype(dtype)
    return x, y


def _moments_for(examples, stats: ChannelStats | None):
    if stats is None:
        return None
    from .frontend import channel_moment_vectors

    return channel_moment_vectors(stats, examples[0].features.channel_names)


def evaluate_loss(
    examples, mp, model_config, cfg: TrainConfig, stats: ChannelStats | None = None, dtype=np.float32
) -> float:
    """Mean per-cell loss over a split (forward only)."""
    fn = _loss_fn(cfg)
    moments = _moments_for(examples, stats)
    total = 0.0
    cells = 0
    for batch in _batched(list(range(len(examples))), cfg.batch_size):
        x, y = _stack_batch(examples, batch, dtype, moments)
        act, _ = model_forward(x, mp, model_config, train=False)
        loss, _ = fn(act, y)
        total += loss * act.size
        cells += act.size
    return total / cells


def train(
    train_examples,
    val_examples,
    model_config: ModelConfig,
    cfg: TrainConfig,
    stats: ChannelStats | None = None,
    log_path=None,
    dtype=np.float32,
    step_callback=None,
) -> TrainResult:
    """Epoch loop with seeded shuffling and early stopping.

    Features are standardized with training-split statistics (computed
    here unless supplied); the best-validation parameters are returned.
    """
    if not train_examples or not val_examples:
        raise TrainingError("empty train or validation split")
    if stats is None:
        stats = compute_channel_stats([e.features for e in train_examples])
    moments = _moments_for(train_examples, stats)

    rng = np.random.default_rng(cfg.seed)
    mp = init_params(model_config, rng, dtype=dtype)
    opt = RAdam(
        learning_rate=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps
    )
    fn = _loss_fn(cfg)
    best = None
    best_epoch = -1
    best_val = np.inf
    log = []
    log_file = open(log_path, "a") if log_path else None
    try:
        for epoch in range(cfg.max_epochs):
            t0 = time.monotonic()
            order = rng.permutation(len(train_examples))
            epoch_loss = 0.0
            n_cells = 0
            for batch in _batched(list(order), cfg.batch_size):
                x, y = _stack_batch(train_examples, batch, dtype, moments)
                act, cache = model_forward(x, mp, model_config, train=True)
                loss, dact = fn(act, y)
                if not np.isfinite(loss):
                    raise TrainingError(f"non-finite training loss at epoch {epoch}")
                grads = model_backward(cache, dact.astype(dtype))
                opt.step(mp.params, grads)
                epoch_loss += loss * act.size
                n_cells += act.size
                if step_callback is not None:
                    step_callback(opt.t, loss)
            train_loss = epoch_loss / n_cells
            val_loss = evaluate_loss(val_examples, mp, model_config, cfg, stats, dtype)
            if not np.isfinite(val_loss):
                raise TrainingError(f"non-finite validation loss at epoch {epoch}")
            improved = val_loss < best_val - cfg.min_delta
            if improved:
                best_val = val_loss
                best_epoch = epoch
                best = mp.copy()
            record = {
                "epoch": epoch,
                "train_loss": train_loss,
                "val_loss": val_loss,
                "best_so_far": best_val,
                "wall_ms": int((time.monotonic() - t0) * 1000),
            }
            log.append(record)
            if log_file:
                log_file.write(json.dumps(record, sort_keys=True) + "\n")
                log_file.flush()
            if epoch - best_epoch >= cfg.patience_epochs:
                break
    finally:
        if log_file:
            log_file.close()
    return TrainResult(
        model=best if best is not None else mp,
        stats=stats,
        log=log,
        best_epoch=best_epoch,
        best_val_loss=float(best_val),
    )


def predict_activations(examples, mp, model_config, stats=None, batch_size=16, dtype=np.float32):
    """Activation rolls for a list of examples (standardizing if stats given)."""
    moments = _moments_for(examples, stats) if examples else None
    outs = []
    for batch in _batched(list(range(len(examples))), batch_size):
        x, _ = _stack_batch(examples, batch, dtype, moments)
        act, _ = model_forward(x, mp, model_config, train=False)
        outs.extend(np.asarray(act))
    return outs
