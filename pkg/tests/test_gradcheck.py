"""The finite-difference verification harness itself."""
from __future__ import annotations

import numpy as np
import pytest

from primadnn.model import gradcheck
from primadnn.model.gradcheck import grad_check, loss_grad_check, tiny_config
from primadnn.model.network import model_backward


class TestGradCheck:
    def test_tiny_config_passes(self):
        report = grad_check(seed=0)
        assert report.max_error < 1e-4
        assert set(report.per_layer) >= {"conv", "norm", "se", "lstm", "fc"}
        for layer, err in report.per_layer.items():
            assert err < 1e-4, layer

    def test_no_se_variant_passes(self):
        report = grad_check(config=tiny_config(se_enabled=False), seed=1)
        assert report.max_error < 1e-4
        assert "se" not in report.per_layer

    def test_repeated_seed_identical_report(self):
        a = grad_check(seed=3)
        b = grad_check(seed=3)
        assert a.per_param == b.per_param
        assert a.max_error == b.max_error

    def test_detects_corrupted_gradient(self, monkeypatch):
        # fault injection: scale one parameter gradient and the harness
        # must report a large error
        real_backward = model_backward

        def corrupted(cache, dact):
            grads = real_backward(cache, dact)
            grads["fc.w"] = grads["fc.w"] * 1.5
            return grads

        monkeypatch.setattr(gradcheck, "model_backward", corrupted)
        report = grad_check(seed=0)
        assert report.max_error > 1e-2
        assert report.per_param["fc.w"] > 1e-2

    def test_report_format_lists_layers(self):
        report = grad_check(seed=0)
        text = report.format()
        assert "overall" in text
        for layer in report.per_layer:
            assert layer in text


class TestLossGradCheck:
    @pytest.mark.parametrize("kind", ["focal", "bce"])
    def test_loss_gradients_tight(self, kind):
        assert loss_grad_check(seed=0, loss_kind=kind) < 1e-6
