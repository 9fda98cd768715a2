"""scikit-learn style wrapper around the detector pipeline.

``X`` is a list of feature tensors shaped (channels, mel_bands, frames)
or ``FeatureStack`` objects; ``y`` is a list of binary label rolls
shaped (n_classes, frames). ``fit`` holds out a validation slice for
early stopping, ``predict_proba`` returns activation rolls and
``predict`` thresholds them at 0.5.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import Example, channel_names_for
from .frontend import FeatureStack
from .metrics import binarize, segment_metrics, SegmentMetrics
from .events import roll_to_events
from .model import ModelConfig
from .training import TrainConfig, train, predict_activations


class SingingTechniqueDetector(BaseEstimator):
    """Frame-wise multi-label technique detector with sigmoid outputs."""

    def __init__(
        self,
        model_config: ModelConfig | None = None,
        train_config: TrainConfig | None = None,
        validation_fraction: float = 0.15,
        threshold: float = 0.5,
    ):
        self.model_config = model_config
        self.train_config = train_config
        self.validation_fraction = validation_fraction
        self.threshold = threshold

    def _as_examples(self, X, y=None):
        examples = []
        for i, x in enumerate(X):
            if isinstance(x, FeatureStack):
                stack = x
            else:
                x = np.asarray(x)
                names = channel_names_for(use_pitch=x.shape[0] in (2, 4))
                if len(names) != x.shape[0]:
                    names = tuple(f"ch{j}" for j in range(x.shape[0]))
                stack = FeatureStack(x, names)
            labels = (
                np.asarray(y[i], dtype=np.float64)
                if y is not None
                else np.zeros((self._model_config().n_classes, stack.n_frames))
            )
            examples.append(Example(singer_id=f"sample{i}", features=stack, labels=labels))
        return examples

    def _model_config(self) -> ModelConfig:
        return self.model_config or ModelConfig()

    def fit(self, X, y):
        if len(X) != len(y):
            raise ValueError("X and y must have equal length")
        if len(X) < 2:
            raise ValueError("need at least 2 clips to hold out validation data")
        examples = self._as_examples(X, y)
        cfg = self.train_config or TrainConfig()
        n_val = max(1, int(round(self.validation_fraction * len(examples))))
        rng = np.random.default_rng(cfg.seed)
        order = rng.permutation(len(examples))
        val = [examples[i] for i in order[:n_val]]
        tr = [examples[i] for i in order[n_val:]]
        result = train(tr, val, self._model_config(), cfg)
        self.model_params_ = result.model
        self.stats_ = result.stats
        self.training_log_ = result.log
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_params_"):
            raise RuntimeError("detector is not fitted; call fit first")

    def predict_proba(self, X):
        """Per-clip activation rolls, each (n_classes, n_frames) in (0, 1)."""
        self._check_fitted()
        examples = self._as_examples(X)
        return predict_activations(
            examples, self.model_params_, self._model_config(), stats=self.stats_
        )

    def predict(self, X):
        """Binary detection rolls at the configured threshold."""
        return [binarize(a, self.threshold) for a in self.predict_proba(X)]

    def score(self, X, y) -> float:
        """Segment-based macro-F against reference label rolls."""
        from .audio import FRAME_SECONDS

        rolls = self.predict(X)
        parts = []
        for pred_roll, ref_roll in zip(rolls, y):
            duration = pred_roll.shape[1] * FRAME_SECONDS
            parts.append(
                segment_metrics(
                    roll_to_events(np.asarray(ref_roll)), roll_to_events(pred_roll), duration
                )
            )
        return SegmentMetrics.merge(parts).macro_f
