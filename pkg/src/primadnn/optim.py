"""Rectified Adam optimizer over named parameter dictionaries.

The variance-rectified adaptive step is applied once the rectification
term rho_t exceeds 4; earlier steps fall back to bias-corrected
momentum SGD without adaptive scaling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RAdam:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # testing hook: force the un-rectified adaptive branch with r_t = 1,
    # which reproduces plain Adam with bias correction
    force_adam: bool = False

    m: dict = field(default_factory=dict, repr=False)
    v: dict = field(default_factory=dict, repr=False)
    t: int = 0

    @property
    def rho_inf(self) -> float:
        return 2.0 / (1.0 - self.beta2) - 1.0

    def rho_t(self, t: int) -> float:
        b2t = self.beta2**t
        return self.rho_inf - 2.0 * t * b2t / (1.0 - b2t)

    def step(self, params: dict, grads: dict) -> None:
        """Update ``params`` in place from matching-keyed ``grads``."""
        self.t += 1
        t = self.t
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**t
        bias2 = 1.0 - b2**t
        rho = self.rho_t(t)
        rectify = rho > 4.0 or self.force_adam
        if self.force_adam:
            r_t = 1.0
        elif rectify:
            ri = self.rho_inf
            r_t = np.sqrt(((rho - 4.0) * (rho - 2.0) * ri) / ((ri - 4.0) * (ri - 2.0) * rho))
        for name in sorted(params):
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(params[name])
                self.v[name] = np.zeros_like(params[name])
            m = self.m[name]
            v = self.v[name]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            m_hat = m / bias1
            if rectify:
                v_hat = np.sqrt(v / bias2)
                params[name] -= self.learning_rate * r_t * m_hat / (v_hat + self.eps)
            else:
                params[name] -= self.learning_rate * m_hat
