"""From-scratch network layers over NCHW numpy tensors.

Every layer implements ``forward(x, training)`` and ``backward(grad)`` where
backward is the exact adjoint of the forward linearization; the gradient
suite checks each one against central finite differences.  Layers cache what
they need for backward on ``self``, so a layer instance is used by one
training loop at a time.

Shape bookkeeping for model validation and multiply-add accounting lives in
``output_shape``/``madds``; spatial shapes are (C, H, W) tuples before
flatten and (F,) after.
"""

from __future__ import annotations

import numpy as np

from .errors import OddSpatial, ShapeMismatch
from .filterbank import get_wavelet
from .transform import dwt2d_batch, dwt2d_batch_vjp
from . import complexity


class Layer:
    """Base layer: stateless by default, no parameters."""

    def init_params(self, rng: np.random.Generator, dtype) -> None:
        pass

    def params(self) -> dict:
        return {}

    def grads(self) -> dict:
        return {}

    def buffers(self) -> dict:
        """Non-learnable state that must survive checkpointing."""
        return {}

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def output_shape(self, in_shape: tuple) -> tuple:
        return tuple(in_shape)

    def madds(self, in_shape: tuple) -> int:
        return 0


def _require_chw(in_shape, who: str) -> tuple:
    if len(in_shape) != 3:
        raise ShapeMismatch(f"{who} expects a (C,H,W) input shape, got {in_shape}")
    return tuple(in_shape)


class Conv2d(Layer):
    """Same-padded cross-correlation with a square odd kernel, stride 1 or 2."""

    def __init__(self, kernel: int, c_in: int, c_out: int, stride: int = 1):
        if kernel % 2 != 1 or kernel < 1:
            raise ShapeMismatch(f"kernel size must be odd and positive, got {kernel}")
        if stride not in (1, 2):
            raise ShapeMismatch(f"stride must be 1 or 2, got {stride}")
        self.kernel = kernel
        self.c_in = c_in
        self.c_out = c_out
        self.stride = stride
        self.weight = None
        self.bias = None
        self.grad_weight = None
        self.grad_bias = None
        self._cols = None
        self._x_shape = None

    def init_params(self, rng, dtype):
        k, ci, co = self.kernel, self.c_in, self.c_out
        bound = 1.0 / np.sqrt(ci * k * k)
        self.weight = rng.uniform(-bound, bound, size=(co, ci, k, k)).astype(dtype)
        self.bias = rng.uniform(-bound, bound, size=(co,)).astype(dtype)

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}

    def _out_hw(self, h, w):
        k, s, p = self.kernel, self.stride, self.kernel // 2
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise ShapeMismatch(
                f"conv expects NCHW with C={self.c_in}, got shape {x.shape}")
        n, _, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.kernel // 2
        ho, wo = self._out_hw(h, w)
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        cols = np.empty((self.c_in, k, k, n, ho, wo), dtype=x.dtype)
        for ki in range(k):
            for kj in range(k):
                cols[:, ki, kj] = np.moveaxis(
                    xp[:, :, ki:ki + s * ho:s, kj:kj + s * wo:s], 0, 1)
        self._cols = cols
        self._x_shape = x.shape
        out = np.tensordot(self.weight, cols, axes=([1, 2, 3], [0, 1, 2]))
        out += self.bias[:, None, None, None]
        return np.moveaxis(out, 0, 1)

    def backward(self, grad):
        n, _, h, w = self._x_shape
        k, s, p = self.kernel, self.stride, self.kernel // 2
        ho, wo = self._out_hw(h, w)
        gm = np.moveaxis(grad, 1, 0)  # (c_out, N, Ho, Wo)
        self.grad_bias = gm.sum(axis=(1, 2, 3))
        self.grad_weight = np.tensordot(gm, self._cols, axes=([1, 2, 3], [3, 4, 5]))
        gcols = np.tensordot(self.weight, gm, axes=([0], [0]))  # (c_in,k,k,N,Ho,Wo)
        gxp = np.zeros((n, self.c_in, h + 2 * p, w + 2 * p), dtype=grad.dtype)
        for ki in range(k):
            for kj in range(k):
                gxp[:, :, ki:ki + s * ho:s, kj:kj + s * wo:s] += np.moveaxis(
                    gcols[:, ki, kj], 1, 0)
        if p:
            return gxp[:, :, p:-p, p:-p]
        return gxp

    def output_shape(self, in_shape):
        c, h, w = _require_chw(in_shape, "conv")
        if c != self.c_in:
            raise ShapeMismatch(f"conv declared c_in={self.c_in} but input has {c}")
        ho, wo = self._out_hw(h, w)
        return (self.c_out, ho, wo)

    def madds(self, in_shape):
        _, ho, wo = self.output_shape(in_shape)
        return self.kernel * self.kernel * self.c_in * self.c_out * ho * wo


class BatchNorm2d(Layer):
    """Per-channel batch normalization; running stats use momentum 0.1."""

    EPS = 1e-5
    MOMENTUM = 0.1

    def __init__(self, channels: int):
        self.channels = channels
        self.gamma = None
        self.beta = None
        self.grad_gamma = None
        self.grad_beta = None
        self.running_mean = None
        self.running_var = None
        self._cache = None

    def init_params(self, rng, dtype):
        c = self.channels
        self.gamma = np.ones(c, dtype=dtype)
        self.beta = np.zeros(c, dtype=dtype)
        self.running_mean = np.zeros(c, dtype=dtype)
        self.running_var = np.ones(c, dtype=dtype)

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.grad_gamma, "beta": self.grad_beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def forward(self, x, training=False):
        if x.ndim != 4 or x.shape[1] != self.channels:
            raise ShapeMismatch(
                f"batchnorm expects NCHW with C={self.channels}, got {x.shape}")
        if training:
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            m = self.MOMENTUM
            self.running_mean = ((1 - m) * self.running_mean + m * mean).astype(x.dtype)
            self.running_var = ((1 - m) * self.running_var + m * var).astype(x.dtype)
        else:
            mean, var = self.running_mean, self.running_var
        inv_std = 1.0 / np.sqrt(var + self.EPS)
        xhat = (x - mean[:, None, None]) * inv_std[:, None, None]
        self._cache = (xhat, inv_std, training)
        return self.gamma[:, None, None] * xhat + self.beta[:, None, None]

    def backward(self, grad):
        xhat, inv_std, training = self._cache
        self.grad_gamma = (grad * xhat).sum(axis=(0, 2, 3))
        self.grad_beta = grad.sum(axis=(0, 2, 3))
        gxhat = grad * self.gamma[:, None, None]
        if not training:
            return gxhat * inv_std[:, None, None]
        m = grad.shape[0] * grad.shape[2] * grad.shape[3]
        sum_g = gxhat.sum(axis=(0, 2, 3), keepdims=True)
        sum_gx = (gxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
        return (inv_std[:, None, None] / m) * (m * gxhat - sum_g - xhat * sum_gx)


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x, training=False):
        self._mask = x > 0
        return np.where(self._mask, x, 0)

    def backward(self, grad):
        return np.where(self._mask, grad, 0)


def _window4(x):
    """(N,C,H,W) -> (N,C,H/2,W/2,4) with the 2x2 window unrolled row-major."""
    n, c, h, w = x.shape
    v = x.reshape(n, c, h // 2, 2, w // 2, 2)
    return np.moveaxis(v, 3, 4).reshape(n, c, h // 2, w // 2, 4)


def _check_even(x, who):
    if x.ndim != 4:
        raise ShapeMismatch(f"{who} expects an NCHW tensor, got shape {x.shape}")
    if x.shape[2] % 2 or x.shape[3] % 2:
        raise OddSpatial(f"{who} needs even spatial dims, got {x.shape[2:]}")


class MaxPool2(Layer):
    """2x2 stride-2 max pooling; ties route to the first (row-major) argmax."""

    def __init__(self):
        self._arg = None
        self._shape = None

    def forward(self, x, training=False):
        _check_even(x, "max pooling")
        win = _window4(x)
        self._arg = win.argmax(axis=-1)
        self._shape = x.shape
        return np.take_along_axis(win, self._arg[..., None], axis=-1)[..., 0]

    def backward(self, grad):
        n, c, h, w = self._shape
        gwin = np.zeros((n, c, h // 2, w // 2, 4), dtype=grad.dtype)
        np.put_along_axis(gwin, self._arg[..., None], grad[..., None], axis=-1)
        v = gwin.reshape(n, c, h // 2, w // 2, 2, 2)
        return np.moveaxis(v, 4, 3).reshape(n, c, h, w)

    def output_shape(self, in_shape):
        c, h, w = _require_chw(in_shape, "max pooling")
        if h % 2 or w % 2:
            raise OddSpatial(f"max pooling needs even spatial dims, got {(h, w)}")
        return (c, h // 2, w // 2)


class AvgPool2(Layer):
    """2x2 stride-2 average pooling."""

    def __init__(self):
        self._shape = None

    def forward(self, x, training=False):
        _check_even(x, "average pooling")
        self._shape = x.shape
        return _window4(x).mean(axis=-1)

    def backward(self, grad):
        n, c, h, w = self._shape
        gwin = np.broadcast_to((grad / 4.0)[..., None], grad.shape + (4,))
        v = gwin.reshape(n, c, h // 2, w // 2, 2, 2)
        return np.moveaxis(v, 4, 3).reshape(n, c, h, w)

    output_shape = MaxPool2.output_shape


class WaveletDown(Layer):
    """Wavelet down-sampling: keep ll, average the subbands, or stack them.

    ``kind`` is one of ``"ll"``, ``"avg"``, ``"cat"``.  ``"cat"`` concatenates
    (ll, lh, hl, hh) along channels in that fixed order, quadrupling the
    channel count; the other kinds preserve it.  The backward pass routes the
    upstream gradient through the 2D analysis vjp (zero gradients for the
    dropped subbands in ``"ll"`` mode).
    """

    def __init__(self, kind: str, wavelet: str):
        if kind not in ("ll", "avg", "cat"):
            raise ShapeMismatch(f"unknown wavelet downsample kind {kind!r}")
        self.kind = kind
        self.wavelet = wavelet
        self.spec = get_wavelet(wavelet)
        self._hw = None

    def forward(self, x, training=False):
        _check_even(x, "wavelet downsample")
        self._hw = (x.shape[2], x.shape[3])
        ll, lh, hl, hh = dwt2d_batch(x, self.spec)
        if self.kind == "ll":
            return ll
        if self.kind == "avg":
            return (ll + lh + hl + hh) / 4.0
        return np.concatenate([ll, lh, hl, hh], axis=1)

    def backward(self, grad):
        if self.kind == "ll":
            zero = np.zeros_like(grad)
            return dwt2d_batch_vjp(grad, zero, zero, zero, self.spec, self._hw)
        if self.kind == "avg":
            q = grad / 4.0
            return dwt2d_batch_vjp(q, q, q, q, self.spec, self._hw)
        c = grad.shape[1] // 4
        gll, glh, ghl, ghh = (grad[:, i * c:(i + 1) * c] for i in range(4))
        return dwt2d_batch_vjp(gll, glh, ghl, ghh, self.spec, self._hw)

    def output_shape(self, in_shape):
        c, h, w = _require_chw(in_shape, "wavelet downsample")
        if h % 2 or w % 2:
            raise OddSpatial(f"wavelet downsample needs even spatial dims, got {(h, w)}")
        cout = 4 * c if self.kind == "cat" else c
        return (cout, h // 2, w // 2)

    def madds(self, in_shape):
        c, h, w = _require_chw(in_shape, "wavelet downsample")
        return complexity.dwt2d_madds(h, w, c)


class PadToEven(Layer):
    """Zero-pad the bottom/right edge so spatial dims become even.

    Glue inserted ahead of a downsample layer when the model config allows odd
    inputs there; identity on already-even maps.
    """

    def __init__(self):
        self._crop = None

    def forward(self, x, training=False):
        if x.ndim != 4:
            raise ShapeMismatch(f"pad expects an NCHW tensor, got shape {x.shape}")
        h, w = x.shape[2], x.shape[3]
        if h % 2 == 0 and w % 2 == 0:
            self._crop = None
            return x
        self._crop = (h, w)
        return np.pad(x, ((0, 0), (0, 0), (0, h % 2), (0, w % 2)))

    def backward(self, grad):
        if self._crop is None:
            return grad
        h, w = self._crop
        return grad[:, :, :h, :w]

    def output_shape(self, in_shape):
        c, h, w = _require_chw(in_shape, "pad")
        return (c, h + h % 2, w + w % 2)


class Flatten(Layer):
    def __init__(self):
        self._shape = None

    def forward(self, x, training=False):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)


class Dense(Layer):
    def __init__(self, n_in: int, n_out: int):
        self.n_in = n_in
        self.n_out = n_out
        self.weight = None
        self.bias = None
        self.grad_weight = None
        self.grad_bias = None
        self._x = None

    def init_params(self, rng, dtype):
        bound = 1.0 / np.sqrt(self.n_in)
        self.weight = rng.uniform(-bound, bound, size=(self.n_in, self.n_out)).astype(dtype)
        self.bias = rng.uniform(-bound, bound, size=(self.n_out,)).astype(dtype)

    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def grads(self):
        return {"weight": self.grad_weight, "bias": self.grad_bias}

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.n_in:
            raise ShapeMismatch(
                f"dense expects (N,{self.n_in}) input, got shape {x.shape}")
        self._x = x
        return x @ self.weight + self.bias

    def backward(self, grad):
        self.grad_weight = self._x.T @ grad
        self.grad_bias = grad.sum(axis=0)
        return grad @ self.weight.T

    def output_shape(self, in_shape):
        if len(in_shape) != 1 or in_shape[0] != self.n_in:
            raise ShapeMismatch(
                f"dense declared n_in={self.n_in} but input shape is {in_shape}")
        return (self.n_out,)

    def madds(self, in_shape):
        return self.n_in * self.n_out


class SoftmaxCrossEntropy:
    """Mean softmax cross-entropy over a batch of logits."""

    def __init__(self):
        self._probs = None
        self._labels = None

    def forward(self, logits: np.ndarray, labels: np.ndarray) -> float:
        if logits.ndim != 2 or labels.shape != (logits.shape[0],):
            raise ShapeMismatch(
                f"loss expects (N,K) logits and (N,) labels, got {logits.shape} / {labels.shape}")
        z = logits - logits.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
        logp = z - logsumexp
        self._probs = np.exp(logp)
        self._labels = labels
        return float(-logp[np.arange(len(labels)), labels].mean())

    def backward(self) -> np.ndarray:
        g = self._probs.copy()
        g[np.arange(len(self._labels)), self._labels] -= 1.0
        return g / len(self._labels)
