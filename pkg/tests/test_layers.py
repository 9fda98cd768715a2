"""Unit checks for the individual network layers."""
from __future__ import annotations

import numpy as np
import pytest

from primadnn.model import layers


def fd_check(f, x, analytic, step=1e-6, rtol=1e-5, n_probe=30, seed=0):
    """Central-difference spot check of d f(x).sum-weighted / dx."""
    rng = np.random.default_rng(seed)
    idx = [np.unravel_index(i, x.shape) for i in rng.choice(x.size, min(n_probe, x.size), replace=False)]
    for ij in idx:
        xp, xm = x.copy(), x.copy()
        xp[ij] += step
        xm[ij] -= step
        fd = (f(xp) - f(xm)) / (2 * step)
        denom = max(abs(fd), abs(analytic[ij]), 1e-6)
        assert abs(fd - analytic[ij]) / denom < rtol


class TestConv2d:
    def test_identity_kernel(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((2, 3, 6, 7))
        w = np.zeros((3, 3, 3, 3))
        for c in range(3):
            w[c, c, 1, 1] = 1.0
        y, _ = layers.conv2d_forward(x, w, np.zeros(3))
        np.testing.assert_allclose(y, x, atol=1e-14)

    def test_zero_weights_give_bias(self):
        x = np.ones((1, 2, 4, 5))
        b = np.array([1.5, -2.0])
        y, _ = layers.conv2d_forward(x, np.zeros((2, 2, 3, 3)), b)
        np.testing.assert_allclose(y[0, 0], 1.5)
        np.testing.assert_allclose(y[0, 1], -2.0)

    def test_matches_direct_convolution(self):
        # naive quadruple loop as the oracle
        rng = np.random.default_rng(1)
        x = rng.standard_normal((1, 2, 5, 6))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        y, _ = layers.conv2d_forward(x, w, b)
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        for o in range(3):
            for f in range(5):
                for t in range(6):
                    ref = b[o] + float(np.sum(w[o] * xp[0, :, f : f + 3, t : t + 3]))
                    assert y[0, o, f, t] == pytest.approx(ref, rel=1e-12, abs=1e-12)

    def test_backward_finite_difference(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((2, 2, 4, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        b = rng.standard_normal(3)
        dy = rng.standard_normal((2, 3, 4, 5))
        _, cache = layers.conv2d_forward(x, w, b)
        dx, dw, db = layers.conv2d_backward(dy, cache)

        fd_check(lambda xx: float((layers.conv2d_forward(xx, w, b)[0] * dy).sum()), x, dx)
        fd_check(lambda ww: float((layers.conv2d_forward(x, ww, b)[0] * dy).sum()), w, dw)
        fd_check(lambda bb: float((layers.conv2d_forward(x, w, bb)[0] * dy).sum()), b, db)

    def test_need_dx_false_skips_input_gradient(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 2, 4, 4))
        w = rng.standard_normal((2, 2, 3, 3))
        _, cache = layers.conv2d_forward(x, w, np.zeros(2))
        dx, dw, db = layers.conv2d_backward(np.ones((1, 2, 4, 4)), cache, need_dx=False)
        assert dx is None
        assert dw.shape == w.shape

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            layers.conv2d_forward(np.zeros((1, 2, 4, 4)), np.zeros((2, 3, 3, 3)), np.zeros(2))


class TestInstanceNorm:
    def test_constant_input_maps_to_beta(self):
        x = np.full((2, 3, 4, 5), 7.0)
        gamma, beta = np.ones(3), np.array([0.1, -0.2, 0.3])
        y, _ = layers.instance_norm_forward(x, gamma, beta)
        for c in range(3):
            np.testing.assert_allclose(y[:, c], beta[c], atol=1e-6)

    def test_zero_mean_unit_var_near_identity(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((1, 1, 40, 50))
        x = (x - x.mean()) / x.std()
        y, _ = layers.instance_norm_forward(x, np.ones(1), np.zeros(1))
        np.testing.assert_allclose(y, x, atol=1e-4)

    def test_output_moments(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((3, 4, 8, 9)) * 5 + 2
        y, _ = layers.instance_norm_forward(x, np.ones(4), np.zeros(4))
        for n in range(3):
            for c in range(4):
                assert abs(y[n, c].mean()) < 1e-10
                assert y[n, c].var() == pytest.approx(1.0, abs=1e-4)

    def test_instances_independent(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((2, 2, 6, 7))
        gamma, beta = np.ones(2), np.zeros(2)
        batch, _ = layers.instance_norm_forward(x, gamma, beta)
        solo, _ = layers.instance_norm_forward(x[:1], gamma, beta)
        np.testing.assert_array_equal(batch[:1], solo)

    def test_backward_finite_difference(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((2, 3, 4, 5))
        gamma = rng.uniform(0.5, 1.5, 3)
        beta = rng.standard_normal(3)
        dy = rng.standard_normal(x.shape)
        _, cache = layers.instance_norm_forward(x, gamma, beta)
        dx, dgamma, dbeta = layers.instance_norm_backward(dy, cache)
        fd_check(lambda xx: float((layers.instance_norm_forward(xx, gamma, beta)[0] * dy).sum()), x, dx)
        fd_check(lambda gg: float((layers.instance_norm_forward(x, gg, beta)[0] * dy).sum()), gamma, dgamma)
        fd_check(lambda bb: float((layers.instance_norm_forward(x, gamma, bb)[0] * dy).sum()), beta, dbeta)


class TestSqueezeExcitation:
    def _params(self, rng, c=4, r=2):
        return (
            rng.standard_normal((c // r, c)) * 0.5,
            rng.standard_normal(c // r) * 0.1,
            rng.standard_normal((c, c // r)) * 0.5,
            rng.standard_normal(c) * 0.1,
        )

    def test_zero_second_affine_halves_input(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((2, 4, 5, 6))
        w1, b1, _, _ = self._params(rng)
        y, _ = layers.se_forward(x, w1, b1, np.zeros((4, 2)), np.zeros(4))
        np.testing.assert_allclose(y, 0.5 * x, atol=1e-14)

    def test_gate_bounds_respected(self):
        rng = np.random.default_rng(9)
        x = np.abs(rng.standard_normal((2, 4, 5, 6))) + 0.1
        y, cache = layers.se_forward(x, *self._params(rng))
        gate = cache[4]
        assert np.all(gate > 0) and np.all(gate < 1)
        assert np.all(np.abs(y) < np.abs(x))

    def test_channel_symmetry(self):
        # swapping two input channels and the matching parameter rows/cols
        # swaps the two output channels
        rng = np.random.default_rng(10)
        x = rng.standard_normal((1, 4, 3, 3))
        w1, b1, w2, b2 = self._params(rng)
        y, _ = layers.se_forward(x, w1, b1, w2, b2)
        perm = [1, 0, 2, 3]
        y2, _ = layers.se_forward(
            x[:, perm], w1[:, perm], b1, w2[perm], b2[perm]
        )
        np.testing.assert_allclose(y2, y[:, perm], atol=1e-12)

    def test_backward_finite_difference(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((2, 4, 3, 4))
        w1, b1, w2, b2 = self._params(rng)
        dy = rng.standard_normal(x.shape)
        _, cache = layers.se_forward(x, w1, b1, w2, b2)
        dx, dw1, db1, dw2, db2 = layers.se_backward(dy, cache)
        fd_check(lambda v: float((layers.se_forward(v, w1, b1, w2, b2)[0] * dy).sum()), x, dx)
        fd_check(lambda v: float((layers.se_forward(x, v, b1, w2, b2)[0] * dy).sum()), w1, dw1)
        fd_check(lambda v: float((layers.se_forward(x, w1, v, w2, b2)[0] * dy).sum()), b1, db1)
        fd_check(lambda v: float((layers.se_forward(x, w1, b1, v, b2)[0] * dy).sum()), w2, dw2)
        fd_check(lambda v: float((layers.se_forward(x, w1, b1, w2, v)[0] * dy).sum()), b2, db2)


class TestMaxPoolFreq:
    def test_reduces_frequency_only(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((2, 3, 8, 10))
        y, _ = layers.maxpool_freq_forward(x, 2)
        assert y.shape == (2, 3, 4, 10)
        np.testing.assert_array_equal(y, x.reshape(2, 3, 4, 2, 10).max(axis=3))

    def test_tie_routes_gradient_to_first_index(self):
        x = np.zeros((1, 1, 2, 1))  # both pooled values equal
        y, cache = layers.maxpool_freq_forward(x, 2)
        dx = layers.maxpool_freq_backward(np.ones_like(y), cache)
        np.testing.assert_array_equal(dx[0, 0, :, 0], [1.0, 0.0])

    def test_backward_scatters_to_argmax(self):
        rng = np.random.default_rng(13)
        x = rng.standard_normal((1, 2, 6, 4))
        y, cache = layers.maxpool_freq_forward(x, 3)
        dy = rng.standard_normal(y.shape)
        dx = layers.maxpool_freq_backward(dy, cache)
        assert dx.shape == x.shape
        # gradient mass preserved per pooled group
        np.testing.assert_allclose(dx.reshape(1, 2, 2, 3, 4).sum(axis=3), dy, atol=1e-14)
        # nonzero only at maxima
        mask = dx != 0
        assert mask.sum() == y.size

    def test_indivisible_extent_rejected(self):
        with pytest.raises(ValueError):
            layers.maxpool_freq_forward(np.zeros((1, 1, 5, 3)), 2)

    def test_pool_one_is_identity(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((1, 2, 4, 3))
        y, cache = layers.maxpool_freq_forward(x, 1)
        np.testing.assert_array_equal(y, x)
        dy = rng.standard_normal(y.shape)
        np.testing.assert_array_equal(layers.maxpool_freq_backward(dy, cache), dy)


class TestAffineAndRelu:
    def test_affine_matches_matmul(self):
        rng = np.random.default_rng(15)
        x = rng.standard_normal((2, 7, 5))
        w = rng.standard_normal((3, 5))
        b = rng.standard_normal(3)
        y, _ = layers.affine_forward(x, w, b)
        np.testing.assert_allclose(y, np.einsum("ntd,kd->ntk", x, w) + b, atol=1e-12)

    def test_affine_backward_finite_difference(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((2, 6, 4))
        w = rng.standard_normal((3, 4))
        b = rng.standard_normal(3)
        dy = rng.standard_normal((2, 6, 3))
        _, cache = layers.affine_forward(x, w, b)
        dx, dw, db = layers.affine_backward(dy, cache)
        fd_check(lambda v: float((layers.affine_forward(v, w, b)[0] * dy).sum()), x, dx)
        fd_check(lambda v: float((layers.affine_forward(x, v, b)[0] * dy).sum()), w, dw)
        fd_check(lambda v: float((layers.affine_forward(x, w, v)[0] * dy).sum()), b, db)

    def test_relu_masks_negative(self):
        x = np.array([-2.0, -0.0, 0.5, 3.0])
        y, mask = layers.relu_forward(x)
        np.testing.assert_array_equal(y, [0.0, 0.0, 0.5, 3.0])
        dy = np.ones(4)
        np.testing.assert_array_equal(layers.relu_backward(dy, mask), mask * 1.0)

    def test_sigmoid_saturates_finite(self):
        z = np.array([-1e4, 0.0, 1e4])
        s = layers.sigmoid(z)
        assert np.all(np.isfinite(s))
        assert s[1] == 0.5
        assert s[0] > 0.0 and s[2] < 1.0
