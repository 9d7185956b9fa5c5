import numpy as np
import pytest

from wavecnn.errors import ShapeMismatch, TooShort
from wavecnn.filterbank import get_wavelet, wavelet_names
from wavecnn.transform import (Decomposition2D, build_operator, dwt1d,
                               dwt1d_vjp, dwt2d, dwt2d_batch, dwt2d_batch_vjp,
                               dwt2d_vjp, idwt1d, idwt2d, idwt2d_batch,
                               idwt2d_vjp)

ALL = wavelet_names()
HAAR = get_wavelet("haar")


def interior_margin(spec) -> int:
    return 2 * len(spec.analysis_low)


class TestOperator:
    def test_matrix_shapes_and_placement(self):
        op = build_operator(HAAR, 6)
        assert op.L.shape == op.H.shape == (3, 6)
        # row k holds filter coefficient j at column 2k + j
        expected = np.zeros((3, 6))
        for k in range(3):
            expected[k, 2 * k] = HAAR.analysis_low[0]
            expected[k, 2 * k + 1] = HAAR.analysis_low[1]
        assert np.array_equal(op.L, expected)

    def test_odd_length_rows_truncate(self):
        op = build_operator(HAAR, 7)
        assert op.L.shape == (3, 7)

    def test_truncation_drops_overhanging_taps(self):
        spec = get_wavelet("db2")
        op = build_operator(spec, 6)
        # last row starts at column 4; taps 2 and 3 would land at 6, 7
        assert op.L[2, 4] == spec.analysis_low[0]
        assert op.L[2, 5] == spec.analysis_low[1]
        assert np.count_nonzero(op.L[2]) == 2

    def test_haar_rows_orthonormal_and_cross_orthogonal(self):
        op = build_operator(HAAR, 8)
        gram = op.L @ op.L.T
        off = gram - np.diag(np.diag(gram))
        assert np.max(np.abs(off)) == 0.0
        assert np.max(np.abs(np.diag(gram) - 1.0)) < 1e-15
        # not exactly zero: BLAS may fuse c*c - c*c into an fma residual
        assert np.max(np.abs(op.L @ op.H.T)) < 1e-15

    def test_too_short_rejected(self):
        with pytest.raises(TooShort):
            build_operator(HAAR, 1)


class TestDwt1d:
    def test_hand_values_haar(self):
        low, high = dwt1d([1.0, 2.0, 3.0, 4.0], HAAR)
        c = 2.0 ** -0.5
        assert np.allclose(low, [3 * c, 7 * c])
        assert np.allclose(high, [-c, -c])

    def test_round_trip_even_haar(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal(32)
        low, high = dwt1d(x, HAAR)
        assert np.max(np.abs(idwt1d(low, high, HAAR, 32) - x)) < 1e-12

    @pytest.mark.parametrize("name", ALL)
    def test_interior_round_trip(self, name):
        spec = get_wavelet(name)
        rng = np.random.default_rng(1)
        n = 64
        x = rng.standard_normal(n)
        back = idwt1d(*dwt1d(x, spec), spec, n)
        m = interior_margin(spec)
        assert np.max(np.abs(back[m:n - m] - x[m:n - m])) < 1e-10

    def test_rejects_bad_shapes(self):
        with pytest.raises(ShapeMismatch):
            dwt1d(np.zeros((2, 2)), HAAR)
        with pytest.raises(TooShort):
            dwt1d(np.zeros(1), HAAR)
        with pytest.raises(ShapeMismatch):
            idwt1d(np.zeros(3), np.zeros(2), HAAR, 6)

    def test_float32_stays_float32(self):
        low, high = dwt1d(np.zeros(8, dtype=np.float32), HAAR)
        assert low.dtype == np.float32 and high.dtype == np.float32

    def test_integer_input_computes_double(self):
        low, _ = dwt1d(np.arange(8), HAAR)
        assert low.dtype == np.float64


class TestDwt2d:
    def test_hand_values_haar(self):
        d = dwt2d(np.array([[1.0, 2.0], [3.0, 4.0]]), HAAR)
        assert np.allclose(d.ll, [[5.0]])
        assert np.allclose(d.lh, [[-2.0]])  # row high-pass picks top-bottom
        assert np.allclose(d.hl, [[-1.0]])
        assert np.allclose(d.hh, [[0.0]])
        assert d.original_shape == (2, 2)

    def test_subband_shapes_odd(self):
        d = dwt2d(np.zeros((7, 9)), HAAR)
        assert d.ll.shape == (3, 4)
        assert d.original_shape == (7, 9)

    def test_energy_split_orthogonal_even(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((16, 16))
        d = dwt2d(x, HAAR)
        energy = sum(float((b * b).sum()) for b in d.subbands())
        assert abs(energy - float((x * x).sum())) < 1e-10

    @pytest.mark.parametrize("name", ALL)
    def test_interior_round_trip_rectangular(self, name):
        spec = get_wavelet(name)
        rng = np.random.default_rng(3)
        h, w = 64, 80
        x = rng.standard_normal((h, w))
        back = idwt2d(dwt2d(x, spec), spec)
        m = interior_margin(spec)
        assert back.shape == (h, w)
        assert m < h // 2  # interior must be non-empty for the longest filter
        assert np.max(np.abs(back[m:h - m, m:w - m] - x[m:h - m, m:w - m])) < 1e-10

    def test_ll_only_reconstruction_is_linear(self):
        # blurred reconstruction from ll alone must respect superposition
        rng = np.random.default_rng(4)
        x, y = rng.standard_normal((2, 12, 12))

        def blur(z):
            d = dwt2d(z, HAAR)
            zeros = np.zeros_like(d.ll)
            return idwt2d(Decomposition2D(d.ll, zeros, zeros, zeros,
                                          d.original_shape), HAAR)

        lhs = blur(2.5 * x - 1.5 * y)
        rhs = 2.5 * blur(x) - 1.5 * blur(y)
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_idwt2d_rejects_inconsistent_subbands(self):
        d = dwt2d(np.zeros((8, 8)), HAAR)
        bad = Decomposition2D(d.ll, d.lh, d.hl, np.zeros((3, 3)), (8, 8))
        with pytest.raises(ShapeMismatch):
            idwt2d(bad, HAAR)


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(a), abs(b))


class TestVjps:
    @pytest.mark.parametrize("name", ["haar", "db3", "ch3.3"])
    def test_dwt1d_vjp_is_the_adjoint(self, name):
        spec = get_wavelet(name)
        rng = np.random.default_rng(5)
        n = 20
        x = rng.standard_normal(n)
        wl, wh = rng.standard_normal((2, n // 2))
        low, high = dwt1d(x, spec)
        lhs = float(low @ wl + high @ wh)
        rhs = float(x @ dwt1d_vjp(wl, wh, spec, n))
        assert _rel(lhs, rhs) < 1e-12

    @pytest.mark.parametrize("name", ["haar", "db2", "ch4.4"])
    def test_dwt2d_vjp_is_the_adjoint(self, name):
        spec = get_wavelet(name)
        rng = np.random.default_rng(6)
        x = rng.standard_normal((10, 14))
        d = dwt2d(x, spec)
        ws = [rng.standard_normal(b.shape) for b in d.subbands()]
        lhs = sum(float((w * b).sum()) for w, b in zip(ws, d.subbands()))
        grad = dwt2d_vjp(Decomposition2D(*ws, d.original_shape), spec)
        assert _rel(lhs, float((grad * x).sum())) < 1e-12

    @pytest.mark.parametrize("name", ["haar", "db4", "ch2.2"])
    def test_idwt2d_vjp_is_the_adjoint(self, name):
        spec = get_wavelet(name)
        rng = np.random.default_rng(7)
        d = dwt2d(rng.standard_normal((12, 12)), spec)
        w = rng.standard_normal((12, 12))
        y = idwt2d(d, spec)
        g = idwt2d_vjp(w, spec)
        lhs = float((w * y).sum())
        rhs = sum(float((gb * b).sum()) for gb, b in zip(g.subbands(), d.subbands()))
        assert _rel(lhs, rhs) < 1e-12

    def test_vjp_differs_from_synthesis_for_biorthogonal(self):
        # the adjoint of analysis uses the analysis matrices, not the duals
        spec = get_wavelet("ch2.2")
        rng = np.random.default_rng(8)
        wl, wh = rng.standard_normal((2, 8))
        n = 16
        adj = dwt1d_vjp(wl, wh, spec, n)
        synth = idwt1d(wl, wh, spec, n)
        assert np.max(np.abs(adj - synth)) > 1e-3


class TestBatch:
    def test_batch_matches_per_plane(self):
        rng = np.random.default_rng(9)
        x = rng.standard_normal((2, 3, 12, 16))
        ll, lh, hl, hh = dwt2d_batch(x, HAAR)
        assert ll.shape == (2, 3, 6, 8)
        for i in range(2):
            for c in range(3):
                d = dwt2d(x[i, c], HAAR)
                assert np.allclose(ll[i, c], d.ll, atol=1e-14)
                assert np.allclose(hh[i, c], d.hh, atol=1e-14)

    def test_batch_round_trip(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal((2, 2, 16, 16))
        bands = dwt2d_batch(x, HAAR)
        back = idwt2d_batch(*bands, HAAR, (16, 16))
        assert np.max(np.abs(back - x)) < 1e-12

    def test_batch_vjp_is_the_adjoint(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((2, 2, 8, 8))
        bands = dwt2d_batch(x, HAAR)
        ws = [rng.standard_normal(b.shape) for b in bands]
        lhs = sum(float((w * b).sum()) for w, b in zip(ws, bands))
        grad = dwt2d_batch_vjp(*ws, HAAR, (8, 8))
        assert _rel(lhs, float((grad * x).sum())) < 1e-12

    def test_batch_rejects_non_nchw(self):
        with pytest.raises(ShapeMismatch):
            dwt2d_batch(np.zeros((4, 4)), HAAR)
