"""Focal and binary cross-entropy losses on sigmoid activations.

Both return the mean cell loss over every (batch, class, frame) cell
together with the analytic gradient with respect to the activations.
Activations are clamped to [1e-7, 1 - 1e-7] before evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATION_CLAMP = 1e-7

ALPHA_MODES = ("balanced", "constant", "unweighted")


@dataclass(frozen=True)
class FocalLossParams:
    alpha: float = 0.13
    gamma: float = 1.33
    alpha_mode: str = "balanced"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.gamma < 0.0:
            raise ValueError("gamma must be >= 0")
        if self.alpha_mode not in ALPHA_MODES:
            raise ValueError(f"alpha_mode must be one of {ALPHA_MODES}")


def _clamp(activations: np.ndarray) -> np.ndarray:
    return np.clip(activations, ACTIVATION_CLAMP, 1.0 - ACTIVATION_CLAMP)


def _alpha_weight(labels: np.ndarray, p: FocalLossParams) -> np.ndarray:
    if p.alpha_mode == "balanced":
        return np.where(labels > 0.5, p.alpha, 1.0 - p.alpha)
    if p.alpha_mode == "constant":
        return np.full_like(labels, p.alpha, dtype=np.float64)
    return np.ones_like(labels, dtype=np.float64)


def focal_loss(activations: np.ndarray, labels: np.ndarray, params: FocalLossParams):
    """Mean of -alpha_t * (1 - p_t)^gamma * ln(p_t) over all cells."""
    if activations.shape != labels.shape:
        raise ValueError(f"shape mismatch: {activations.shape} vs {labels.shape}")
    p = _clamp(np.asarray(activations, dtype=np.float64))
    y = labels > 0.5
    pt = np.where(y, p, 1.0 - p)
    at = _alpha_weight(labels, params)
    one_m = 1.0 - pt
    log_pt = np.log(pt)
    cell = -at * one_m**params.gamma * log_pt
    loss = float(cell.mean())
    # d cell / d pt, then chain through pt = p or 1 - p
    if params.gamma == 0.0:
        dcell_dpt = -at / pt
    else:
        dcell_dpt = at * (params.gamma * one_m ** (params.gamma - 1.0) * log_pt - one_m**params.gamma / pt)
    grad = dcell_dpt * np.where(y, 1.0, -1.0) / activations.size
    return loss, grad


def bce_loss(activations: np.ndarray, labels: np.ndarray):
    """Mean binary cross-entropy with the same clamping."""
    if activations.shape != labels.shape:
        raise ValueError(f"shape mismatch: {activations.shape} vs {labels.shape}")
    p = _clamp(np.asarray(activations, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64)
    cell = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    loss = float(cell.mean())
    grad = ((p - y) / (p * (1.0 - p))) / activations.size
    return loss, grad
