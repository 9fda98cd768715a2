"""Verification harness: analytic gradients vs central finite differences.

Runs the full model plus loss on a small configuration in double
precision and reports the worst relative error per layer type.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig
from .network import init_params, model_forward, model_backward, ModelParams
from ..losses import focal_loss, FocalLossParams

FD_STEP = 1e-5
# denominator floor: central differences on an O(0.1) loss carry ~1e-12
# of cancellation noise at step 1e-5, so ratios below this are meaningless
REL_DENOM_FLOOR = 1e-6
LAYER_TYPES = ("conv", "norm", "se", "lstm", "fc")


def tiny_config(norm_kind: str = "instance", se_enabled: bool = True) -> ModelConfig:
    """Small configuration used for gradient checking."""
    return ModelConfig(
        in_channels=2,
        conv_channels=(2, 4, 4, 4),
        kernel_sizes=((3, 3), (3, 3), (3, 3), (3, 3)),
        freq_pool=(2, 2, 2, 1),
        se_enabled=se_enabled,
        se_ratio=2,
        norm_kind=norm_kind,
        lstm_hidden=3,
        n_classes=9,
        n_mels=8,
    )


@dataclass
class GradCheckReport:
    per_layer: dict  # layer type -> max relative error
    per_param: dict  # parameter name -> max relative error
    max_error: float

    def format(self) -> str:
        lines = [f"{name:8s} max_rel_err = {err:.3e}" for name, err in self.per_layer.items()]
        lines.append(f"{'overall':8s} max_rel_err = {self.max_error:.3e}")
        return "\n".join(lines)


def _layer_type(name: str) -> str:
    for t in LAYER_TYPES:
        if name.startswith(t):
            return t
    return "other"


def grad_check(
    config: ModelConfig | None = None,
    seed: int = 0,
    n_samples_per_param: int = 6,
    time_steps: int = 6,
    step: float = FD_STEP,
) -> GradCheckReport:
    """Compare analytic vs finite-difference gradients on random cells."""
    config = config or tiny_config()
    rng = np.random.default_rng(seed)
    mp = init_params(config, rng, dtype=np.float64)
    x = rng.standard_normal((2, config.in_channels, config.n_mels, time_steps))
    labels = (rng.random((2, config.n_classes, time_steps)) < 0.3).astype(np.float64)
    loss_params = FocalLossParams()

    def loss_of(m: ModelParams) -> float:
        act, _ = model_forward(x, m, config, train=False)
        loss, _ = focal_loss(act, labels, loss_params)
        return loss

    act, cache = model_forward(x, mp, config, train=False)
    _, dact = focal_loss(act, labels, loss_params)
    grads = model_backward(cache, dact)

    per_param = {}
    for name in sorted(grads):
        arr = mp.params[name]
        flat = arr.reshape(-1)
        k = min(n_samples_per_param, flat.size)
        idx = rng.choice(flat.size, size=k, replace=False)
        worst = 0.0
        for i in idx:
            orig = flat[i]
            flat[i] = orig + step
            lp = loss_of(mp)
            flat[i] = orig - step
            lm = loss_of(mp)
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * step)
            analytic = grads[name].reshape(-1)[i]
            denom = max(REL_DENOM_FLOOR, abs(numeric) + abs(analytic))
            worst = max(worst, abs(numeric - analytic) / denom)
        per_param[name] = worst

    per_layer: dict = {}
    for name, err in per_param.items():
        t = _layer_type(name)
        per_layer[t] = max(per_layer.get(t, 0.0), err)
    return GradCheckReport(
        per_layer=dict(sorted(per_layer.items())),
        per_param=per_param,
        max_error=max(per_param.values()),
    )


def loss_grad_check(seed: int = 0, loss_kind: str = "focal", step: float = FD_STEP) -> float:
    """Finite-difference check of the loss gradient w.r.t. activations."""
    from ..losses import bce_loss

    rng = np.random.default_rng(seed)
    act = rng.uniform(0.05, 0.95, size=(9, 10))
    labels = (rng.random((9, 10)) < 0.4).astype(np.float64)
    if loss_kind == "focal":
        fn = lambda a: focal_loss(a, labels, FocalLossParams())
    else:
        fn = lambda a: bce_loss(a, labels)
    _, grad = fn(act)
    worst = 0.0
    for i in range(act.size):
        a = act.reshape(-1)
        orig = a[i]
        a[i] = orig + step
        lp = fn(act)[0]
        a[i] = orig - step
        lm = fn(act)[0]
        a[i] = orig
        numeric = (lp - lm) / (2.0 * step)
        analytic = grad.reshape(-1)[i]
        denom = max(REL_DENOM_FLOOR, abs(numeric) + abs(analytic))
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst
