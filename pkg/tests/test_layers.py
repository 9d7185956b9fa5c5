import numpy as np
import pytest

from wavecnn import layers as L
from wavecnn.errors import OddSpatial, ShapeMismatch


def _init(layer, seed=0, dtype=np.float64):
    layer.init_params(np.random.default_rng(seed), np.dtype(dtype))
    return layer


class TestConv2d:
    def test_matches_naive_convolution(self):
        conv = _init(L.Conv2d(3, 2, 4, stride=1))
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 2, 5, 6))
        out = conv.forward(x)
        p = 1
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        naive = np.empty_like(out)
        for n in range(2):
            for co in range(4):
                for i in range(5):
                    for j in range(6):
                        patch = xp[n, :, i:i + 3, j:j + 3]
                        naive[n, co, i, j] = (patch * conv.weight[co]).sum() + conv.bias[co]
        assert np.allclose(out, naive, atol=1e-12)

    def test_stride_two_halves_odd_and_even(self):
        conv = _init(L.Conv2d(3, 1, 1, stride=2))
        assert conv.forward(np.zeros((1, 1, 8, 8))).shape == (1, 1, 4, 4)
        assert conv.forward(np.zeros((1, 1, 7, 7))).shape == (1, 1, 4, 4)
        assert conv.output_shape((1, 7, 7)) == (1, 4, 4)

    def test_rejects_wrong_channels(self):
        conv = _init(L.Conv2d(3, 2, 1))
        with pytest.raises(ShapeMismatch):
            conv.forward(np.zeros((1, 3, 4, 4)))

    def test_even_kernel_rejected(self):
        with pytest.raises(ValueError):
            L.Conv2d(4, 1, 1)

    def test_madds_formula(self):
        conv = L.Conv2d(3, 2, 5, stride=1)
        assert conv.madds((2, 8, 8)) == 9 * 2 * 5 * 8 * 8
        conv2 = L.Conv2d(3, 2, 5, stride=2)
        assert conv2.madds((2, 8, 8)) == 9 * 2 * 5 * 4 * 4


class TestBatchNorm:
    def test_training_normalizes_batch(self):
        bn = _init(L.BatchNorm2d(3))
        rng = np.random.default_rng(2)
        x = rng.standard_normal((8, 3, 6, 6)) * 4.0 + 2.0
        y = bn.forward(x, training=True)
        mean = y.mean(axis=(0, 2, 3))
        var = y.var(axis=(0, 2, 3))
        assert np.max(np.abs(mean)) < 1e-10
        assert np.max(np.abs(var - 1.0)) < 1e-6

    def test_running_stats_blend_and_drive_eval(self):
        bn = _init(L.BatchNorm2d(1))
        x = np.full((4, 1, 2, 2), 3.0)
        bn.forward(x, training=True)
        # one step from zero-init mean: (1 - 0.1) * 0 + 0.1 * 3
        assert np.allclose(bn.running_mean, 0.3)
        y = bn.forward(np.zeros((1, 1, 2, 2)), training=False)
        expected = (0.0 - 0.3) / np.sqrt(bn.running_var[0] + 1e-5)
        assert np.allclose(y, expected)

    def test_eval_does_not_touch_running_stats(self):
        bn = _init(L.BatchNorm2d(2))
        before = bn.running_mean.copy()
        bn.forward(np.ones((2, 2, 4, 4)), training=False)
        assert np.array_equal(bn.running_mean, before)


class TestPooling:
    def test_maxpool_values_and_ties(self):
        x = np.array([[[[1.0, 2.0, 5.0, 5.0],
                        [3.0, 4.0, 5.0, 5.0]]]])
        pool = L.MaxPool2()
        out = pool.forward(x, training=True)
        assert np.array_equal(out, [[[[4.0, 5.0]]]])
        g = pool.backward(np.ones_like(out))
        # ties route the gradient to the first occurrence in row-major order
        assert np.array_equal(g[0, 0], [[0, 0, 1, 0], [0, 1, 0, 0]])

    def test_avgpool_window_means(self):
        x = np.arange(16, dtype=np.float64).reshape(1, 1, 4, 4)
        out = L.AvgPool2().forward(x)
        assert np.array_equal(out[0, 0], [[2.5, 4.5], [10.5, 12.5]])

    def test_odd_input_rejected(self):
        for pool in (L.MaxPool2(), L.AvgPool2()):
            with pytest.raises(OddSpatial):
                pool.forward(np.zeros((1, 1, 5, 4)))


class TestWaveletDown:
    def test_ll_reduces_shape(self):
        down = L.WaveletDown("ll", "haar")
        out = down.forward(np.ones((2, 3, 8, 8)))
        assert out.shape == (2, 3, 4, 4)
        assert np.allclose(out, 2.0)  # ll of a constant 1 under haar is 2

    def test_avg_is_mean_of_subbands(self):
        x = np.zeros((1, 1, 2, 2))
        x[0, 0] = [[1.0, 2.0], [3.0, 4.0]]
        out = L.WaveletDown("avg", "haar").forward(x)
        assert np.allclose(out, (5.0 - 2.0 - 1.0 + 0.0) / 4.0)

    def test_cat_stacks_channels_in_subband_order(self):
        x = np.zeros((1, 1, 2, 2))
        x[0, 0] = [[1.0, 2.0], [3.0, 4.0]]
        out = L.WaveletDown("cat", "haar").forward(x)
        assert out.shape == (1, 4, 1, 1)
        assert np.allclose(out[0, :, 0, 0], [5.0, -2.0, -1.0, 0.0])

    def test_cat_groups_by_subband_not_by_channel(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((1, 2, 4, 4))
        out = L.WaveletDown("cat", "haar").forward(x)
        solo0 = L.WaveletDown("cat", "haar").forward(x[:, :1])
        # first block of channels is ll for every input channel
        assert np.allclose(out[0, 0], solo0[0, 0])
        assert np.allclose(out[0, 2], solo0[0, 1])

    def test_odd_spatial_rejected(self):
        with pytest.raises(OddSpatial):
            L.WaveletDown("ll", "haar").forward(np.zeros((1, 1, 7, 8)))

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            L.WaveletDown("bandpass", "haar")

    def test_output_shape_and_madds_delegation(self):
        down = L.WaveletDown("cat", "db2")
        assert down.output_shape((3, 8, 10)) == (12, 4, 5)
        from wavecnn.complexity import dwt2d_madds
        assert down.madds((3, 8, 10)) == dwt2d_madds(8, 10, 3)


class TestPadToEven:
    def test_pads_bottom_right_only_when_odd(self):
        pad = L.PadToEven()
        x = np.ones((1, 1, 7, 8))
        y = pad.forward(x, training=True)
        assert y.shape == (1, 1, 8, 8)
        assert np.all(y[..., 7, :] == 0.0)
        g = pad.backward(np.ones_like(y))
        assert g.shape == x.shape
        assert np.all(g == 1.0)

    def test_identity_on_even(self):
        pad = L.PadToEven()
        x = np.arange(16.0).reshape(1, 1, 4, 4)
        assert np.array_equal(pad.forward(x, training=True), x)
        assert pad.output_shape((1, 4, 4)) == (1, 4, 4)
        assert pad.output_shape((1, 5, 5)) == (1, 6, 6)


class TestLoss:
    def test_uniform_logits_give_log_k(self):
        loss = L.SoftmaxCrossEntropy()
        value = loss.forward(np.zeros((4, 10)), np.arange(4) % 10)
        assert value == pytest.approx(np.log(10.0), abs=1e-12)

    def test_gradient_sums_to_zero_over_classes(self):
        loss = L.SoftmaxCrossEntropy()
        rng = np.random.default_rng(4)
        logits = rng.standard_normal((6, 5))
        loss.forward(logits, rng.integers(0, 5, 6))
        g = loss.backward()
        assert np.max(np.abs(g.sum(axis=1))) < 1e-12

    def test_extreme_logits_stay_finite(self):
        loss = L.SoftmaxCrossEntropy()
        logits = np.array([[1e4, -1e4], [-1e4, 1e4]])
        value = loss.forward(logits, np.array([0, 1]))
        assert np.isfinite(value) and value < 1e-6
