"""Assembly of the SE/IN CRNN: parameter init, forward and backward.

Per conv stage: conv -> norm -> ReLU -> SE (optional) -> frequency max
pool. After the last stage the frequency axis is fully collapsed; the
per-frame channel vector feeds a BiLSTM, then a frame-wise affine map
and a sigmoid yield one activation per class per 10 ms frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers
from .config import ModelConfig
from .lstm import bilstm_forward, bilstm_backward


@dataclass
class ModelParams:
    """Trainable parameters plus non-trainable buffers (BN running stats)."""

    params: dict
    buffers: dict = field(default_factory=dict)

    def copy(self) -> "ModelParams":
        return ModelParams(
            params={k: v.copy() for k, v in self.params.items()},
            buffers={k: v.copy() for k, v in self.buffers.items()},
        )

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            params={k: v.astype(dtype) for k, v in self.params.items()},
            buffers={k: v.astype(dtype) for k, v in self.buffers.items()},
        )


def _uniform(rng, shape, bound, dtype):
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def init_params(config: ModelConfig, rng: np.random.Generator, dtype=np.float64) -> ModelParams:
    """Seeded init: uniform fan-in scaling, forget-gate bias 1."""
    p: dict = {}
    buffers: dict = {}
    c_in = config.in_channels
    for s, (c_out, (kf, kt)) in enumerate(zip(config.conv_channels, config.kernel_sizes), start=1):
        bound = 1.0 / np.sqrt(c_in * kf * kt)
        p[f"conv{s}.w"] = _uniform(rng, (c_out, c_in, kf, kt), bound, dtype)
        p[f"conv{s}.b"] = _uniform(rng, (c_out,), bound, dtype)
        p[f"norm{s}.gamma"] = np.ones(c_out, dtype=dtype)
        p[f"norm{s}.beta"] = np.zeros(c_out, dtype=dtype)
        if config.norm_kind == "batch":
            buffers[f"norm{s}.running_mean"] = np.zeros(c_out, dtype=dtype)
            buffers[f"norm{s}.running_var"] = np.ones(c_out, dtype=dtype)
        if config.se_enabled:
            c_mid = c_out // config.se_ratio
            b1 = 1.0 / np.sqrt(c_out)
            b2 = 1.0 / np.sqrt(c_mid)
            p[f"se{s}.w1"] = _uniform(rng, (c_mid, c_out), b1, dtype)
            p[f"se{s}.b1"] = _uniform(rng, (c_mid,), b1, dtype)
            p[f"se{s}.w2"] = _uniform(rng, (c_out, c_mid), b2, dtype)
            p[f"se{s}.b2"] = _uniform(rng, (c_out,), b2, dtype)
        c_in = c_out
    h = config.lstm_hidden
    for d in ("fw", "bw"):
        bound = 1.0 / np.sqrt(h)
        p[f"lstm.{d}.w_ih"] = _uniform(rng, (4 * h, c_in), bound, dtype)
        p[f"lstm.{d}.w_hh"] = _uniform(rng, (4 * h, h), bound, dtype)
        b = np.zeros(4 * h, dtype=dtype)
        b[h : 2 * h] = 1.0
        p[f"lstm.{d}.b"] = b
    bound = 1.0 / np.sqrt(2 * h)
    p["fc.w"] = _uniform(rng, (config.n_classes, 2 * h), bound, dtype)
    # classifier bias starts at the logit of a low positive prior so the
    # sigmoid outputs begin near the sparse class frequency instead of 0.5;
    # this removes the initial epochs otherwise spent suppressing outputs
    p["fc.b"] = np.full(config.n_classes, config.head_bias_init, dtype=dtype)
    return ModelParams(params=p, buffers=buffers)


def model_forward(
    x: np.ndarray, mp: ModelParams, config: ModelConfig, train: bool = False
):
    """x (N, C, F, T) -> activations (N, n_classes, T) in (0, 1), plus cache.

    With norm_kind="batch" and train=True the running statistics in
    ``mp.buffers`` are updated in place.
    """
    if x.ndim != 4:
        raise ValueError(f"expected (N, C, F, T) input, got shape {x.shape}")
    if x.shape[1] != config.in_channels:
        raise ValueError(f"model expects {config.in_channels} input channels, got {x.shape[1]}")
    if x.shape[2] != config.n_mels:
        raise ValueError(f"model expects {config.n_mels} mel bands, got {x.shape[2]}")
    p = mp.params
    caches = []
    h = x
    for s in range(1, config.n_stages + 1):
        h, c_conv = layers.conv2d_forward(h, p[f"conv{s}.w"], p[f"conv{s}.b"])
        if config.norm_kind == "instance":
            h, c_norm = layers.instance_norm_forward(h, p[f"norm{s}.gamma"], p[f"norm{s}.beta"])
        else:
            h, c_norm, rm, rv = layers.batch_norm_forward(
                h,
                p[f"norm{s}.gamma"],
                p[f"norm{s}.beta"],
                mp.buffers[f"norm{s}.running_mean"],
                mp.buffers[f"norm{s}.running_var"],
                train=train,
            )
            if train:
                mp.buffers[f"norm{s}.running_mean"] = rm
                mp.buffers[f"norm{s}.running_var"] = rv
        h, c_relu = layers.relu_forward(h)
        if config.se_enabled:
            h, c_se = layers.se_forward(
                h, p[f"se{s}.w1"], p[f"se{s}.b1"], p[f"se{s}.w2"], p[f"se{s}.b2"]
            )
        else:
            c_se = None
        h, c_pool = layers.maxpool_freq_forward(h, config.freq_pool[s - 1])
        caches.append((c_conv, c_norm, c_relu, c_se, c_pool))
    # (N, C, 1, T) -> (N, T, C)
    n, c, f, t = h.shape
    if f != 1:
        raise ValueError(f"frequency axis not fully pooled: {f} bands remain")
    seq = np.ascontiguousarray(h[:, :, 0, :].transpose(0, 2, 1))
    fw = {k: p[f"lstm.fw.{k}"] for k in ("w_ih", "w_hh", "b")}
    bw = {k: p[f"lstm.bw.{k}"] for k in ("w_ih", "w_hh", "b")}
    rnn_out, c_lstm = bilstm_forward(seq, fw, bw)
    logits, c_fc = layers.affine_forward(rnn_out, p["fc.w"], p["fc.b"])
    act = layers.sigmoid(logits)  # (N, T, K)
    cache = (caches, c_lstm, c_fc, act, config)
    return np.ascontiguousarray(act.transpose(0, 2, 1)), cache


def model_backward(cache, dact: np.ndarray) -> dict:
    """Gradients of a scalar loss for every parameter.

    ``dact`` is the upstream gradient on the (N, n_classes, T)
    activations; the sigmoid is differentiated here.
    """
    caches, c_lstm, c_fc, act, config = cache
    grads: dict = {}
    da = dact.transpose(0, 2, 1)  # (N, T, K)
    dlogits = da * act * (1.0 - act)
    drnn, grads["fc.w"], grads["fc.b"] = layers.affine_backward(dlogits, c_fc)
    dseq, g_fw, g_bw = bilstm_backward(drnn, c_lstm)
    for d, g in (("fw", g_fw), ("bw", g_bw)):
        for k, v in g.items():
            grads[f"lstm.{d}.{k}"] = v
    dh = dseq.transpose(0, 2, 1)[:, :, None, :]  # (N, C, 1, T)
    for s in range(config.n_stages, 0, -1):
        c_conv, c_norm, c_relu, c_se, c_pool = caches[s - 1]
        dh = layers.maxpool_freq_backward(np.ascontiguousarray(dh), c_pool)
        if c_se is not None:
            dh, dw1, db1, dw2, db2 = layers.se_backward(dh, c_se)
            grads[f"se{s}.w1"], grads[f"se{s}.b1"] = dw1, db1
            grads[f"se{s}.w2"], grads[f"se{s}.b2"] = dw2, db2
        dh = layers.relu_backward(dh, c_relu)
        if config.norm_kind == "instance":
            dh, dgamma, dbeta = layers.instance_norm_backward(dh, c_norm)
        else:
            dh, dgamma, dbeta = layers.batch_norm_backward(dh, c_norm)
        grads[f"norm{s}.gamma"], grads[f"norm{s}.beta"] = dgamma, dbeta
        dh, grads[f"conv{s}.w"], grads[f"conv{s}.b"] = layers.conv2d_backward(
            dh, c_conv, need_dx=(s > 1)
        )
    return grads
