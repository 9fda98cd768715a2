"""Bidirectional LSTM with hand-derived backpropagation through time.

Gate layout in the stacked weight matrices is (input, forget, cell,
output). Initial hidden and cell states are zero.
"""
from __future__ import annotations

import numpy as np

from .layers import sigmoid


def lstm_forward(x: np.ndarray, w_ih: np.ndarray, w_hh: np.ndarray, b: np.ndarray):
    """Single-direction LSTM. x (N, T, D) -> outputs (N, T, H)."""
    N, T, D = x.shape
    H = w_hh.shape[1]
    pre = x @ w_ih.T + b  # (N, T, 4H)
    hs = np.zeros((N, T, H), dtype=x.dtype)
    gi = np.empty((N, T, H), dtype=x.dtype)
    gf = np.empty((N, T, H), dtype=x.dtype)
    gg = np.empty((N, T, H), dtype=x.dtype)
    go = np.empty((N, T, H), dtype=x.dtype)
    cs = np.empty((N, T, H), dtype=x.dtype)
    tc = np.empty((N, T, H), dtype=x.dtype)
    h = np.zeros((N, H), dtype=x.dtype)
    c = np.zeros((N, H), dtype=x.dtype)
    for t in range(T):
        # batched (1, H) @ (H, 4H) products keep each sample's reduction
        # order independent of the batch size, so a clip's activations are
        # bit-identical alone or inside a batch
        z = pre[:, t] + (h[:, None, :] @ w_hh.T)[:, 0]
        i = sigmoid(z[:, :H])
        f = sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = sigmoid(z[:, 3 * H :])
        c = f * c + i * g
        th = np.tanh(c)
        h = o * th
        gi[:, t], gf[:, t], gg[:, t], go[:, t] = i, f, g, o
        cs[:, t], tc[:, t], hs[:, t] = c, th, h
    cache = (x, hs, gi, gf, gg, go, cs, tc, w_ih, w_hh)
    return hs, cache


def lstm_backward(dhs: np.ndarray, cache):
    x, hs, gi, gf, gg, go, cs, tc, w_ih, w_hh = cache
    N, T, D = x.shape
    H = w_hh.shape[1]
    dw_ih = np.zeros_like(w_ih)
    dw_hh = np.zeros_like(w_hh)
    db = np.zeros(4 * H, dtype=x.dtype)
    dx = np.empty_like(x)
    dh_next = np.zeros((N, H), dtype=x.dtype)
    dc_next = np.zeros((N, H), dtype=x.dtype)
    for t in range(T - 1, -1, -1):
        i, f, g, o = gi[:, t], gf[:, t], gg[:, t], go[:, t]
        th = tc[:, t]
        c_prev = cs[:, t - 1] if t > 0 else np.zeros((N, H), dtype=x.dtype)
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((N, H), dtype=x.dtype)
        dh = dhs[:, t] + dh_next
        do = dh * th
        dc = dh * o * (1.0 - th * th) + dc_next
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ],
            axis=1,
        )
        dw_ih += dz.T @ x[:, t]
        dw_hh += dz.T @ h_prev
        db += dz.sum(axis=0)
        dx[:, t] = dz @ w_ih
        dh_next = dz @ w_hh
    return dx, dw_ih, dw_hh, db


def bilstm_forward(x: np.ndarray, fw: dict, bw: dict):
    """Forward and time-reversed passes, outputs concatenated per frame."""
    out_f, cache_f = lstm_forward(x, fw["w_ih"], fw["w_hh"], fw["b"])
    out_b_rev, cache_b = lstm_forward(x[:, ::-1], bw["w_ih"], bw["w_hh"], bw["b"])
    out = np.concatenate([out_f, out_b_rev[:, ::-1]], axis=2)
    return out, (cache_f, cache_b)


def bilstm_backward(dy: np.ndarray, cache):
    cache_f, cache_b = cache
    H = dy.shape[2] // 2
    dx_f, dwi_f, dwh_f, db_f = lstm_backward(np.ascontiguousarray(dy[:, :, :H]), cache_f)
    dx_b, dwi_b, dwh_b, db_b = lstm_backward(np.ascontiguousarray(dy[:, ::-1, H:]), cache_b)
    dx = dx_f + dx_b[:, ::-1]
    return dx, {"w_ih": dwi_f, "w_hh": dwh_f, "b": db_f}, {"w_ih": dwi_b, "w_hh": dwh_b, "b": db_b}
