"""Soft-threshold wavelet denoising.

One analysis level per channel; the three high-frequency subbands are shrunk
toward zero by a fixed threshold while the low-frequency subband passes
through untouched, then the image is reconstructed.  Thresholds are meant for
unit-scale images: integer inputs are divided by 255 on entry and restored on
exit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeLambda, ShapeMismatch
from .filterbank import get_wavelet
from .transform import Decomposition2D, dwt2d, idwt2d


@dataclass(frozen=True)
class DenoiseConfig:
    """Wavelet name plus shrinkage threshold (on the [0,1] pixel scale)."""

    wavelet: str = "haar"
    threshold: float = 0.1

    def __post_init__(self):
        if self.threshold < 0:
            raise NegativeLambda(f"threshold must be >= 0, got {self.threshold}")


def soft_shrink(x, threshold):
    """Move ``x`` toward zero by ``threshold``, zeroing the band within it.

    Piecewise: ``x - t`` for ``x > t``; ``x + t`` for ``x < -t``; else 0.
    Accepts scalars or arrays; never increases magnitude and is odd in ``x``.
    """
    if threshold < 0:
        raise NegativeLambda(f"threshold must be >= 0, got {threshold}")
    arr = np.asarray(x)
    out = np.where(arr > threshold, arr - threshold,
                   np.where(arr < -threshold, arr + threshold, 0.0))
    if arr.ndim == 0:
        return float(out)
    return out


def _denoise_plane(plane: np.ndarray, cfg: DenoiseConfig) -> np.ndarray:
    spec = get_wavelet(cfg.wavelet)
    d = dwt2d(plane, spec)
    shrunk = Decomposition2D(
        ll=d.ll,
        lh=soft_shrink(d.lh, cfg.threshold),
        hl=soft_shrink(d.hl, cfg.threshold),
        hh=soft_shrink(d.hh, cfg.threshold),
        original_shape=d.original_shape,
    )
    return idwt2d(shrunk, spec)


def denoise_image(img, cfg: DenoiseConfig = DenoiseConfig()):
    """Denoise a grayscale matrix or a CHW multi-channel image.

    Channels are processed independently.  Float inputs are assumed to be on
    the [0,1] scale already; integer inputs are divided by 255, denoised, and
    returned as the same integer type (rounded and clipped).
    """
    arr = np.asarray(img)
    if arr.ndim not in (2, 3):
        raise ShapeMismatch(f"expected HW or CHW image, got shape {arr.shape}")

    integer_input = np.issubdtype(arr.dtype, np.integer)
    work = arr.astype(np.float64) / 255.0 if integer_input else arr

    if work.ndim == 2:
        out = _denoise_plane(work, cfg)
    else:
        out = np.stack([_denoise_plane(ch, cfg) for ch in work])

    if integer_input:
        info = np.iinfo(arr.dtype)
        return np.clip(np.rint(out * 255.0), info.min, info.max).astype(arr.dtype)
    return out
