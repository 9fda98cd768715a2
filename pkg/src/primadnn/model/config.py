"""Architecture configuration for the SE/IN CRNN detector."""
from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np


class ModelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 4
    conv_channels: tuple = (32, 64, 64, 64)
    kernel_sizes: tuple = ((5, 5), (5, 5), (3, 3), (3, 3))
    freq_pool: tuple = (4, 4, 2, 5)
    se_enabled: bool = True
    se_ratio: int = 2
    norm_kind: str = "instance"
    lstm_hidden: int = 128
    n_classes: int = 9
    n_mels: int = 160
    # initial classifier bias; the logit of the expected positive rate
    head_bias_init: float = -2.0

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        object.__setattr__(
            self, "kernel_sizes", tuple((int(a), int(b)) for a, b in self.kernel_sizes)
        )
        object.__setattr__(self, "freq_pool", tuple(int(p) for p in self.freq_pool))
        if len(self.conv_channels) != len(self.kernel_sizes) or len(self.conv_channels) != len(
            self.freq_pool
        ):
            raise ModelConfigError("conv_channels, kernel_sizes and freq_pool lengths must match")
        if int(np.prod(self.freq_pool)) != self.n_mels:
            raise ModelConfigError(
                f"freq_pool product {np.prod(self.freq_pool)} must equal n_mels {self.n_mels}"
            )
        for kf, kt in self.kernel_sizes:
            if kf % 2 == 0 or kt % 2 == 0:
                raise ModelConfigError("kernel sizes must be odd for same-padding")
        if self.se_enabled:
            for c in self.conv_channels:
                if c % self.se_ratio:
                    raise ModelConfigError(
                        f"se_ratio {self.se_ratio} must divide every conv channel count"
                    )
        if self.norm_kind not in ("instance", "batch"):
            raise ModelConfigError(f"unknown norm_kind {self.norm_kind!r}")
        if self.in_channels < 1 or self.lstm_hidden < 1 or self.n_classes < 1:
            raise ModelConfigError("in_channels, lstm_hidden and n_classes must be positive")

    @property
    def n_stages(self) -> int:
        return len(self.conv_channels)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)
