"""Shared fixtures: session-scoped synthetic corpora and tiny model helpers."""
from __future__ import annotations

import numpy as np
import pytest

from primadnn.dataset import Example
from primadnn.frontend import FeatureStack
from primadnn.model import ModelConfig
from primadnn.synth import SynthSpec, synth_corpus


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """14 clips from 7 pseudo-singers; enough for a 7-fold plan."""
    out = tmp_path_factory.mktemp("corpus-small")
    manifest = synth_corpus(SynthSpec(), n_clips=14, n_singers=7, seed=7, out_dir=out)
    return out, manifest


@pytest.fixture(scope="session")
def benchmark_corpus(tmp_path_factory):
    """The full 200-clip, 14-singer corpus used by the end-to-end checks."""
    out = tmp_path_factory.mktemp("corpus-bench")
    manifest = synth_corpus(SynthSpec(), n_clips=200, n_singers=14, seed=0, out_dir=out)
    return out, manifest


def tiny_model_config(**overrides) -> ModelConfig:
    """A minute configuration for fast training-harness tests."""
    base = dict(
        in_channels=2,
        conv_channels=(2, 4, 4, 4),
        kernel_sizes=((3, 3), (3, 3), (3, 3), (3, 3)),
        freq_pool=(2, 2, 2, 1),
        se_enabled=True,
        se_ratio=2,
        norm_kind="instance",
        lstm_hidden=3,
        n_classes=9,
        n_mels=8,
    )
    base.update(overrides)
    return ModelConfig(**base)


def tiny_examples(n: int, seed: int = 0, t: int = 20, separable: bool = False):
    """Random Examples matching tiny_model_config; one singer per clip.

    With separable=True the features encode the labels directly, giving
    an easily learnable mapping.
    """
    rng = np.random.default_rng(seed)
    cfg = tiny_model_config()
    out = []
    for i in range(n):
        labels = (rng.random((cfg.n_classes, t)) < 0.3).astype(np.float64)
        if separable:
            x = np.zeros((cfg.in_channels, cfg.n_mels, t))
            for m in range(cfg.n_mels):
                x[0, m] = 4.0 * labels[m % cfg.n_classes] - 2.0
            x[1] = rng.standard_normal((cfg.n_mels, t)) * 0.05
        else:
            x = rng.standard_normal((cfg.in_channels, cfg.n_mels, t))
        stack = FeatureStack(x, tuple(f"ch{j}" for j in range(cfg.in_channels)))
        out.append(
            Example(singer_id=f"s{i}", features=stack, labels=labels, clip_id=f"clip{i}")
        )
    return out
