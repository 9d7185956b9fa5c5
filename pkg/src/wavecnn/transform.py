"""Wavelet transforms as truncated-matrix products, with exact backward passes.

For a signal of length N the analysis operators L and H are the rectangular
``floor(N/2) x N`` matrices whose row k carries the filter starting at column
2k; entries falling outside the signal are simply dropped (zero-extension
boundary semantics).  Reconstruction uses the transposed synthesis operators.
With truncation the round trip is exact only away from the boundaries, except
for Haar on even lengths where it is globally exact.

2D transforms apply the 1D operators to rows and columns:
``ll = L @ X @ L.T`` and so on, channel by channel for batched tensors.
Every forward has a matching vector-Jacobian product built from the same
matrices, so the layers in :mod:`wavecnn.layers` backpropagate exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ShapeMismatch, TooShort
from .filterbank import WaveletSpec


@dataclass(frozen=True)
class AnalysisOperator:
    """Truncated analysis/synthesis matrices for one (wavelet, length) pair."""

    wavelet: WaveletSpec
    signal_length: int
    L: np.ndarray
    H: np.ndarray
    L_syn: np.ndarray
    H_syn: np.ndarray


def _place(coeffs, n: int) -> np.ndarray:
    rows = n // 2
    mat = np.zeros((rows, n))
    for k in range(rows):
        for j, c in enumerate(coeffs):
            col = 2 * k + j
            if col < n:
                mat[k, col] = c
    return mat


@lru_cache(maxsize=None)
def build_operator(spec: WaveletSpec, n: int) -> AnalysisOperator:
    """Materialize the four operator matrices for signal length ``n``.

    Results are cached per (wavelet, n); the cache is transparent in the
    sense that a freshly built operator is bit-identical to a cached one.

    Raises:
        TooShort: if ``n < 2``.
    """
    if n < 2:
        raise TooShort(f"operator length must be >= 2, got {n}")
    return AnalysisOperator(
        wavelet=spec,
        signal_length=n,
        L=_place(spec.analysis_low, n),
        H=_place(spec.analysis_high, n),
        L_syn=_place(spec.synthesis_low, n),
        H_syn=_place(spec.synthesis_high, n),
    )


@lru_cache(maxsize=None)
def _mats(spec: WaveletSpec, n: int, dtype_char: str):
    op = build_operator(spec, n)
    if dtype_char == "d":
        return op.L, op.H, op.L_syn, op.H_syn
    dt = np.dtype(dtype_char)
    return (op.L.astype(dt), op.H.astype(dt),
            op.L_syn.astype(dt), op.H_syn.astype(dt))


def _work_dtype(x: np.ndarray) -> np.dtype:
    # transforms run in the tensor's element type; anything non-float32
    # (ints, float64) computes in double
    return np.dtype(np.float32) if x.dtype == np.float32 else np.dtype(np.float64)


def _operator_pair(spec, n, dtype):
    return _mats(spec, n, np.dtype(dtype).char)


# --- 1D ---


def dwt1d(signal, spec: WaveletSpec):
    """One analysis step: returns ``(L @ s, H @ s)``, each of length N//2."""
    s = np.asarray(signal)
    if s.ndim != 1:
        raise ShapeMismatch(f"expected a 1-D signal, got shape {s.shape}")
    if s.shape[0] < 2:
        raise TooShort(f"signal length must be >= 2, got {s.shape[0]}")
    dt = _work_dtype(s)
    s = s.astype(dt, copy=False)
    L, H, _, _ = _operator_pair(spec, s.shape[0], dt)
    return L @ s, H @ s


def idwt1d(low, high, spec: WaveletSpec, n: int) -> np.ndarray:
    """Synthesis step: ``L_syn.T @ low + H_syn.T @ high`` of length ``n``.

    ``n`` must be passed explicitly because ``N//2`` does not determine
    whether the original length was even or odd.
    """
    lo = np.asarray(low)
    hi = np.asarray(high)
    if lo.shape != (n // 2,) or hi.shape != (n // 2,):
        raise ShapeMismatch(
            f"subband lengths {lo.shape}/{hi.shape} do not match n={n} (need {n // 2})")
    dt = _work_dtype(lo)
    _, _, Ls, Hs = _operator_pair(spec, n, dt)
    return Ls.T @ lo.astype(dt, copy=False) + Hs.T @ hi.astype(dt, copy=False)


def dwt1d_vjp(upstream_low, upstream_high, spec: WaveletSpec, n: int) -> np.ndarray:
    """Backward of :func:`dwt1d`: ``L.T @ g_low + H.T @ g_high``.

    Uses the analysis matrices (transposed), not the synthesis duals.
    """
    gl = np.asarray(upstream_low)
    gh = np.asarray(upstream_high)
    if gl.shape != (n // 2,) or gh.shape != (n // 2,):
        raise ShapeMismatch(
            f"upstream lengths {gl.shape}/{gh.shape} do not match n={n} (need {n // 2})")
    dt = _work_dtype(gl)
    L, H, _, _ = _operator_pair(spec, n, dt)
    return L.T @ gl.astype(dt, copy=False) + H.T @ gh.astype(dt, copy=False)


# --- 2D ---


@dataclass(frozen=True)
class Decomposition2D:
    """The four subbands of one 2D analysis step plus the original shape."""

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    original_shape: tuple

    def subbands(self):
        return self.ll, self.lh, self.hl, self.hh


def dwt2d(x, spec: WaveletSpec) -> Decomposition2D:
    """Single-level 2D analysis of a matrix.

    Row operators act from the left, column operators from the right:
    ``ll = L @ X @ L.T``, ``lh = H @ X @ L.T``, ``hl = L @ X @ H.T``,
    ``hh = H @ X @ H.T`` (lh carries the row high-pass).
    """
    X = np.asarray(x)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {X.shape}")
    m, n = X.shape
    if m < 2 or n < 2:
        raise TooShort(f"both dimensions must be >= 2, got {X.shape}")
    dt = _work_dtype(X)
    X = X.astype(dt, copy=False)
    Lm, Hm, _, _ = _operator_pair(spec, m, dt)
    Ln, Hn, _, _ = _operator_pair(spec, n, dt)
    return Decomposition2D(
        ll=Lm @ X @ Ln.T,
        lh=Hm @ X @ Ln.T,
        hl=Lm @ X @ Hn.T,
        hh=Hm @ X @ Hn.T,
        original_shape=(m, n),
    )


def _check_subbands(d: Decomposition2D):
    m, n = d.original_shape
    want = (m // 2, n // 2)
    for name, band in (("ll", d.ll), ("lh", d.lh), ("hl", d.hl), ("hh", d.hh)):
        if np.asarray(band).shape != want:
            raise ShapeMismatch(
                f"subband {name} has shape {np.asarray(band).shape}, expected {want} "
                f"for original shape {d.original_shape}")


def idwt2d(d: Decomposition2D, spec: WaveletSpec) -> np.ndarray:
    """Reconstruct a matrix of ``d.original_shape`` from its four subbands."""
    _check_subbands(d)
    m, n = d.original_shape
    dt = _work_dtype(np.asarray(d.ll))
    _, _, Lms, Hms = _operator_pair(spec, m, dt)
    _, _, Lns, Hns = _operator_pair(spec, n, dt)
    ll, lh, hl, hh = (np.asarray(b).astype(dt, copy=False) for b in d.subbands())
    return (Lms.T @ ll @ Lns + Hms.T @ lh @ Lns
            + Lms.T @ hl @ Hns + Hms.T @ hh @ Hns)


def dwt2d_vjp(grads: Decomposition2D, spec: WaveletSpec) -> np.ndarray:
    """Backward of :func:`dwt2d`: routes subband gradients to the input.

    ``grads`` holds the upstream gradients of the four subbands together with
    the input shape; the result is
    ``L.T @ g_ll @ L + H.T @ g_lh @ L + L.T @ g_hl @ H + H.T @ g_hh @ H``
    built from the analysis matrices.
    """
    _check_subbands(grads)
    m, n = grads.original_shape
    dt = _work_dtype(np.asarray(grads.ll))
    Lm, Hm, _, _ = _operator_pair(spec, m, dt)
    Ln, Hn, _, _ = _operator_pair(spec, n, dt)
    gll, glh, ghl, ghh = (np.asarray(b).astype(dt, copy=False) for b in grads.subbands())
    return (Lm.T @ gll @ Ln + Hm.T @ glh @ Ln
            + Lm.T @ ghl @ Hn + Hm.T @ ghh @ Hn)


def idwt2d_vjp(upstream, spec: WaveletSpec) -> Decomposition2D:
    """Backward of :func:`idwt2d`: the exact transpose of the synthesis map.

    ``upstream`` is the gradient at the reconstructed matrix; the returned
    decomposition holds the gradients of the four subbands,
    ``(Ls @ G @ Ls.T, Hs @ G @ Ls.T, Ls @ G @ Hs.T, Hs @ G @ Hs.T)``.
    """
    G = np.asarray(upstream)
    if G.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {G.shape}")
    m, n = G.shape
    if m < 2 or n < 2:
        raise TooShort(f"both dimensions must be >= 2, got {G.shape}")
    dt = _work_dtype(G)
    G = G.astype(dt, copy=False)
    _, _, Lms, Hms = _operator_pair(spec, m, dt)
    _, _, Lns, Hns = _operator_pair(spec, n, dt)
    return Decomposition2D(
        ll=Lms @ G @ Lns.T,
        lh=Hms @ G @ Lns.T,
        hl=Lms @ G @ Hns.T,
        hh=Hms @ G @ Hns.T,
        original_shape=(m, n),
    )


# --- batched NCHW ---


def _check_nchw(x) -> np.ndarray:
    X = np.asarray(x)
    if X.ndim != 4:
        raise ShapeMismatch(f"expected an NCHW tensor, got shape {X.shape}")
    if X.shape[2] < 2 or X.shape[3] < 2:
        raise TooShort(f"spatial dims must be >= 2, got {X.shape}")
    return X


def dwt2d_batch(x, spec: WaveletSpec):
    """Channel-by-channel 2D analysis of an NCHW tensor.

    Returns the four subband tensors ``(ll, lh, hl, hh)``, each of shape
    ``[N, C, H//2, W//2]``.
    """
    X = _check_nchw(x)
    h, w = X.shape[2], X.shape[3]
    dt = _work_dtype(X)
    X = X.astype(dt, copy=False)
    Lh, Hh, _, _ = _operator_pair(spec, h, dt)
    Lw, Hw, _, _ = _operator_pair(spec, w, dt)
    low = np.matmul(Lh, X)
    high = np.matmul(Hh, X)
    return (np.matmul(low, Lw.T), np.matmul(high, Lw.T),
            np.matmul(low, Hw.T), np.matmul(high, Hw.T))


def idwt2d_batch(ll, lh, hl, hh, spec: WaveletSpec, shape_hw: tuple) -> np.ndarray:
    """Reconstruct an NCHW tensor of spatial shape ``shape_hw`` from subbands."""
    h, w = shape_hw
    bands = [np.asarray(b) for b in (ll, lh, hl, hh)]
    want = (h // 2, w // 2)
    for b in bands:
        if b.ndim != 4 or b.shape[2:] != want:
            raise ShapeMismatch(
                f"subband shape {b.shape} does not match spatial target {shape_hw}")
    dt = _work_dtype(bands[0])
    _, _, Lhs, Hhs = _operator_pair(spec, h, dt)
    _, _, Lws, Hws = _operator_pair(spec, w, dt)
    ll, lh, hl, hh = (b.astype(dt, copy=False) for b in bands)
    return (np.matmul(Lhs.T, np.matmul(ll, Lws))
            + np.matmul(Hhs.T, np.matmul(lh, Lws))
            + np.matmul(Lhs.T, np.matmul(hl, Hws))
            + np.matmul(Hhs.T, np.matmul(hh, Hws)))


def dwt2d_batch_vjp(gll, glh, ghl, ghh, spec: WaveletSpec, shape_hw: tuple) -> np.ndarray:
    """Backward of :func:`dwt2d_batch` for NCHW subband gradients."""
    h, w = shape_hw
    bands = [np.asarray(b) for b in (gll, glh, ghl, ghh)]
    want = (h // 2, w // 2)
    for b in bands:
        if b.ndim != 4 or b.shape[2:] != want:
            raise ShapeMismatch(
                f"gradient shape {b.shape} does not match spatial target {shape_hw}")
    dt = _work_dtype(bands[0])
    Lh, Hh, _, _ = _operator_pair(spec, h, dt)
    Lw, Hw, _, _ = _operator_pair(spec, w, dt)
    gll, glh, ghl, ghh = (b.astype(dt, copy=False) for b in bands)
    return (np.matmul(Lh.T, np.matmul(gll, Lw))
            + np.matmul(Hh.T, np.matmul(glh, Lw))
            + np.matmul(Lh.T, np.matmul(ghl, Hw))
            + np.matmul(Hh.T, np.matmul(ghh, Hw)))
