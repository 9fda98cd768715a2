"""Run configuration files (TOML or JSON) and ablation conditions.

A config combines the frontend, model and training settings plus the
ablation switches; defaults reproduce the full detector configuration.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .frontend import FrontendConfig
from .model import ModelConfig
from .training import TrainConfig

ABLATION_CONDITIONS = ("full", "no_pitch", "single_resolution", "no_se", "batch_norm", "3x3")


@dataclass(frozen=True)
class RunConfig:
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    segment_seconds: float = 0.100
    threshold: float = 0.5
    n_folds: int = 7
    # ablation switches
    no_pitch: bool = False
    single_resolution: bool = False
    no_se: bool = False
    batch_norm: bool = False
    kernels_3x3: bool = False

    def channel_flags(self) -> tuple:
        """(use_pitch, single_resolution) for feature channel selection."""
        return (not self.no_pitch, self.single_resolution)

    def effective_model_config(self) -> ModelConfig:
        n_mel_channels = 1 if self.single_resolution else 3
        in_channels = n_mel_channels + (0 if self.no_pitch else 1)
        kernels = (
            tuple((3, 3) for _ in self.model.kernel_sizes)
            if self.kernels_3x3
            else self.model.kernel_sizes
        )
        return replace(
            self.model,
            in_channels=in_channels,
            kernel_sizes=kernels,
            se_enabled=self.model.se_enabled and not self.no_se,
            norm_kind="batch" if self.batch_norm else self.model.norm_kind,
        )

    def with_condition(self, condition: str) -> "RunConfig":
        """Base config restricted to one named ablation condition."""
        if condition not in ABLATION_CONDITIONS:
            raise ValueError(f"unknown ablation condition {condition!r}")
        base = replace(
            self,
            no_pitch=False,
            single_resolution=False,
            no_se=False,
            batch_norm=False,
            kernels_3x3=False,
        )
        flags = {
            "full": {},
            "no_pitch": {"no_pitch": True},
            "single_resolution": {"single_resolution": True},
            "no_se": {"no_se": True},
            "batch_norm": {"batch_norm": True},
            "3x3": {"kernels_3x3": True},
        }[condition]
        return replace(base, **flags)


def _tupled(d: dict) -> dict:
    return {k: tuple(tuple(x) if isinstance(x, list) else x for x in v) if isinstance(v, list) else v for k, v in d.items()}


def run_config_from_dict(d: dict) -> RunConfig:
    kwargs = {}
    if "frontend" in d:
        kwargs["frontend"] = FrontendConfig(**_tupled(d["frontend"]))
    if "model" in d:
        kwargs["model"] = ModelConfig(**_tupled(d["model"]))
    if "train" in d:
        kwargs["train"] = TrainConfig(**d["train"])
    for key in (
        "segment_seconds",
        "threshold",
        "n_folds",
        "no_pitch",
        "single_resolution",
        "no_se",
        "batch_norm",
        "kernels_3x3",
    ):
        if key in d:
            kwargs[key] = d[key]
    return RunConfig(**kwargs)


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if path.suffix.lower() == ".json":
        with open(path) as f:
            data = json.load(f)
    elif path.suffix.lower() == ".toml":
        with open(path, "rb") as f:
            data = tomllib.load(f)
    else:
        raise ValueError(f"unsupported config format: {path.suffix!r} (use .toml or .json)")
    return run_config_from_dict(data)
