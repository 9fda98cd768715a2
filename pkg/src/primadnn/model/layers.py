"""Network layer primitives with exact reverse-mode gradients.

Each forward returns (output, cache); the matching backward consumes the
cache and the upstream gradient. All operations accept batched tensors
shaped (N, C, F, T) unless noted, preserve dtype, and are deterministic.
"""
from __future__ import annotations

import numpy as np

SIGMOID_CLAMP = 30.0
NORM_EPS = 1e-5


def sigmoid(z: np.ndarray) -> np.ndarray:
    # clamp keeps exp in range; changes values by < 1e-13
    return 1.0 / (1.0 + np.exp(-np.clip(z, -SIGMOID_CLAMP, SIGMOID_CLAMP)))


# ---------------------------------------------------------------- conv2d


def _im2col(xp_n: np.ndarray, kf: int, kt: int, F: int, T: int) -> np.ndarray:
    # xp_n (C, F+kf-1, T+kt-1) -> (C*kf*kt, F*T); one block copy per
    # kernel tap keeps the time axis innermost and the gather near
    # memcpy speed
    C = xp_n.shape[0]
    cols = np.empty((C, kf, kt, F, T), dtype=xp_n.dtype)
    for i in range(kf):
        for j in range(kt):
            cols[:, i, j] = xp_n[:, i : i + F, j : j + T]
    return cols.reshape(C * kf * kt, F * T)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Same-padded cross-correlation. x (N,C,F,T), w (O,C,kf,kt), b (O,)."""
    N, C, F, T = x.shape
    O, Cw, kf, kt = w.shape
    if Cw != C:
        raise ValueError(f"conv weight expects {Cw} input channels, got {C}")
    pf, pt = kf // 2, kt // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pf, pf), (pt, pt)))
    wm = w.reshape(O, -1)
    y = np.empty((N, O, F, T), dtype=x.dtype)
    for n in range(N):
        cols = _im2col(xp[n], kf, kt, F, T)
        np.matmul(wm, cols, out=y[n].reshape(O, F * T))
    y += b.reshape(1, O, 1, 1)
    return y, (xp, w, x.shape)


def conv2d_backward(dy: np.ndarray, cache, need_dx: bool = True):
    xp, w, xshape = cache
    N, C, F, T = xshape
    O, _, kf, kt = w.shape
    pf, pt = kf // 2, kt // 2
    wm = w.reshape(O, -1)
    dw = np.zeros_like(wm)
    db = dy.sum(axis=(0, 2, 3))
    dxp = np.zeros_like(xp) if need_dx else None
    for n in range(N):
        cols = _im2col(xp[n], kf, kt, F, T)
        dyn = dy[n].reshape(O, F * T)
        dw += dyn @ cols.T
        if need_dx:
            dcols = (wm.T @ dyn).reshape(C, kf, kt, F, T)
            for i in range(kf):
                for j in range(kt):
                    dxp[n, :, i : i + F, j : j + T] += dcols[:, i, j]
    dx = dxp[:, :, pf : pf + F, pt : pt + T].copy() if need_dx else None
    return dx, dw.reshape(w.shape), db


# ---------------------------------------------------------------- normalization


def instance_norm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray, eps: float = NORM_EPS):
    """Normalize each (instance, channel) over its F x T extent, then affine."""
    N, C = x.shape[:2]
    xv = x.reshape(N * C, -1)
    mean = xv.mean(axis=1)
    # one extra pass: Var = E[x^2] - E[x]^2
    var = np.maximum(np.square(xv).mean(axis=1) - mean * mean, 0.0)
    mean = mean.reshape(N, C, 1, 1)
    inv = 1.0 / np.sqrt(var.reshape(N, C, 1, 1) + eps)
    xhat = (x - mean) * inv
    y = gamma.reshape(1, -1, 1, 1) * xhat + beta.reshape(1, -1, 1, 1)
    return y, (xhat, inv, gamma)


def instance_norm_backward(dy: np.ndarray, cache):
    xhat, inv, gamma = cache
    m = xhat.shape[2] * xhat.shape[3]
    t = dy * xhat
    dgamma = t.sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gamma.reshape(1, -1, 1, 1)
    s1 = dxhat.sum(axis=(2, 3), keepdims=True)
    s2 = gamma.reshape(1, -1, 1, 1) * t.sum(axis=(2, 3), keepdims=True)
    # dx = inv * (dxhat - (s1 + xhat*s2)/m), reusing t as scratch
    np.multiply(xhat, s2 / m, out=t)
    t += s1 / m
    np.subtract(dxhat, t, out=t)
    t *= inv
    return t, dgamma, dbeta


def batch_norm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool,
    momentum: float = 0.1,
    eps: float = NORM_EPS,
):
    """Per-channel normalization over (N, F, T); running stats for inference.

    Returns (y, cache, running_mean, running_var); the running buffers
    are returned updated when train=True.
    """
    g = gamma.reshape(1, -1, 1, 1)
    bt = beta.reshape(1, -1, 1, 1)
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        running_mean = (1 - momentum) * running_mean + momentum * mean
        running_var = (1 - momentum) * running_var + momentum * var
    else:
        mean, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps).reshape(1, -1, 1, 1)
    xhat = (x - mean.reshape(1, -1, 1, 1)) * inv
    y = g * xhat + bt
    return y, (xhat, inv, gamma, train), running_mean, running_var


def batch_norm_backward(dy: np.ndarray, cache):
    xhat, inv, gamma, train = cache
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gamma.reshape(1, -1, 1, 1)
    if not train:
        return dxhat * inv, dgamma, dbeta
    m = xhat.shape[0] * xhat.shape[2] * xhat.shape[3]
    s1 = dxhat.sum(axis=(0, 2, 3), keepdims=True)
    s2 = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
    dx = inv / m * (m * dxhat - s1 - xhat * s2)
    return dx, dgamma, dbeta


# ---------------------------------------------------------------- relu


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, mask: np.ndarray):
    return dy * mask


# ---------------------------------------------------------------- squeeze-and-excitation


def se_forward(x: np.ndarray, w1, b1, w2, b2):
    """Channel attention: global average squeeze, bottleneck excitation.

    w1 maps C -> C/r, w2 maps C/r -> C; the sigmoid gate rescales each
    input channel by a weight in (0, 1).
    """
    N, C, F, T = x.shape
    s = x.mean(axis=(2, 3))  # (N, C)
    # batched row-wise products keep each sample's reduction order
    # independent of the batch size (bit-exact alone vs in-batch)
    z1 = (s[:, None, :] @ w1.T)[:, 0] + b1
    a1 = np.maximum(z1, 0.0)
    z2 = (a1[:, None, :] @ w2.T)[:, 0] + b2
    gate = sigmoid(z2)  # (N, C)
    y = x * gate[:, :, None, None]
    return y, (x, s, z1, a1, gate, w1, w2)


def se_backward(dy: np.ndarray, cache):
    x, s, z1, a1, gate, w1, w2 = cache
    N, C, F, T = x.shape
    t = dy * x
    dgate = t.sum(axis=(2, 3))
    dz2 = dgate * gate * (1.0 - gate)
    dw2 = dz2.T @ a1
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ w2
    dz1 = da1 * (z1 > 0)
    dw1 = dz1.T @ s
    db1 = dz1.sum(axis=0)
    ds = dz1 @ w1
    # dx = dy * gate + ds / (F*T), reusing t as scratch
    np.multiply(dy, gate[:, :, None, None], out=t)
    t += (ds / (F * T))[:, :, None, None]
    return t, dw1, db1, dw2, db2


# ---------------------------------------------------------------- frequency max-pool


def maxpool_freq_forward(x: np.ndarray, pool: int):
    """Max pool along the frequency axis only (time untouched)."""
    N, C, F, T = x.shape
    if F % pool:
        raise ValueError(f"frequency extent {F} not divisible by pool {pool}")
    xr = x.reshape(N, C, F // pool, pool, T)
    arg = xr.argmax(axis=3)  # first index on ties
    y = np.take_along_axis(xr, arg[:, :, :, None, :], axis=3).squeeze(3)
    return y, (arg, x.shape, pool)


def maxpool_freq_backward(dy: np.ndarray, cache):
    arg, shape, pool = cache
    N, C, F, T = shape
    dxr = np.zeros((N, C, F // pool, pool, T), dtype=dy.dtype)
    np.put_along_axis(dxr, arg[:, :, :, None, :], dy[:, :, :, None, :], axis=3)
    return dxr.reshape(N, C, F, T)


# ---------------------------------------------------------------- frame-wise affine


def affine_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x (N, T, D) @ w.T + b, applied per frame."""
    return x @ w.T + b, (x, w)


def affine_backward(dy: np.ndarray, cache):
    x, w = cache
    dw = np.einsum("ntk,ntd->kd", dy, x)
    db = dy.sum(axis=(0, 1))
    dx = dy @ w
    return dx, dw, db
