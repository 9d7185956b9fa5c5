"""Dataset containers, IDX ingestion, PGM directories, and a synthetic task.

Images travel through the toolkit as float NCHW arrays on the unit scale
[0, 1]; labels are an integer vector.  The synthetic generator draws each
image from an independently seeded stream so datasets are reproducible and
order-independent.
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidConfig, ShapeMismatch
from .fileio import read_pgm

_IDX_IMAGES = 0x00000803
_IDX_LABELS = 0x00000801


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, C, H, W) float
    labels: np.ndarray  # (N,) int

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ShapeMismatch(f"images must be NCHW, got shape {self.images.shape}")
        if self.labels.shape != (self.images.shape[0],):
            raise ShapeMismatch(
                f"{self.images.shape[0]} images but label shape {self.labels.shape}")

    def __len__(self) -> int:
        return self.images.shape[0]

    def take(self, index) -> "Dataset":
        return Dataset(self.images[index], self.labels[index])


def read_idx(path) -> np.ndarray:
    """Read a u8 IDX file (big-endian header) into an array of its stored rank."""
    with open(path, "rb") as fh:
        head = fh.read(4)
        if len(head) != 4 or head[0] or head[1]:
            raise FormatError(f"{path}: not an IDX file")
        code, rank = head[2], head[3]
        if code != 0x08:
            raise FormatError(f"{path}: unsupported IDX element code 0x{code:02x}")
        dims = struct.unpack(f">{rank}I", fh.read(4 * rank))
        count = int(np.prod(dims, dtype=np.int64))
        payload = fh.read(count)
        if len(payload) != count:
            raise FormatError(f"{path}: truncated IDX payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims).copy()


def write_idx(path, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    if arr.ndim not in (1, 3):
        raise FormatError(f"IDX writer handles rank 1 or 3, got {arr.ndim}")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", 0x800 | arr.ndim))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def load_dataset(images_path, labels_path) -> Dataset:
    """Pair of IDX files (images rank 3, labels rank 1) -> unit-scale Dataset."""
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3:
        raise FormatError(f"{images_path}: expected [count, rows, cols] images")
    if labels.ndim != 1:
        raise FormatError(f"{labels_path}: expected a rank-1 label vector")
    if images.shape[0] != labels.shape[0]:
        raise ShapeMismatch(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.astype(np.float64)[:, None, :, :] / 255.0
    return Dataset(x, labels.astype(np.int64))


def save_dataset(dataset: Dataset, images_path, labels_path) -> None:
    """Quantize a single-channel Dataset back to u8 IDX files."""
    if dataset.images.shape[1] != 1:
        raise ShapeMismatch("IDX export handles single-channel images only")
    pixels = np.clip(np.rint(dataset.images[:, 0] * 255.0), 0, 255).astype(np.uint8)
    write_idx(images_path, pixels)
    write_idx(labels_path, dataset.labels.astype(np.uint8))


def load_pgm_dir(directory, labels_csv) -> Dataset:
    """Directory of PGM files plus a two-column (filename, label) CSV."""
    rows = []
    with open(labels_csv, newline="") as fh:
        for line in csv.reader(fh):
            if not line or line[0].lstrip().startswith("#"):
                continue
            if len(line) < 2:
                raise FormatError(f"{labels_csv}: need 'filename,label' rows")
            rows.append((line[0].strip(), int(line[1])))
    if not rows:
        raise InvalidConfig(f"{labels_csv}: no labelled images listed")
    planes, labels = [], []
    for name, label in rows:
        planes.append(read_pgm(os.path.join(directory, name)))
        labels.append(label)
    shapes = {p.shape for p in planes}
    if len(shapes) != 1:
        raise ShapeMismatch(f"PGM images disagree on size: {sorted(shapes)}")
    x = np.stack(planes).astype(np.float64)[:, None, :, :] / 255.0
    return Dataset(x, np.asarray(labels, dtype=np.int64))


# Each class is a low-frequency plane wave; the pair (fy, fx) is cycles per
# image side, so the texture survives repeated low-pass downsampling.
_CLASS_WAVES = ((0, 1), (1, 0), (1, 1), (1, -1), (0, 2),
                (2, 0), (2, 1), (1, 2), (2, -1), (2, 2),
                (0, 3), (3, 0), (3, 1), (1, 3), (2, -2), (3, -1))


def synthetic_classification(n: int, classes: int = 10, image_hw=(28, 28),
                             seed: int = 0, noise: float = 0.05,
                             amplitude: float = 0.38) -> Dataset:
    """Balanced oriented-grating classification set with per-image jitter.

    Image ``i`` gets label ``i % classes`` and its own random stream, so any
    prefix or reordering of the set is reproducible.  Jitter covers phase,
    amplitude, and additive Gaussian pixel noise; pixels stay in [0, 1].
    Lowering ``amplitude`` toward the noise floor makes the task harder
    without changing its structure.
    """
    if n < 1:
        raise InvalidConfig("need at least one sample")
    if not 2 <= classes <= len(_CLASS_WAVES):
        raise InvalidConfig(f"classes must be in 2..{len(_CLASS_WAVES)}")
    h, w = image_hw
    ii, jj = np.mgrid[0:h, 0:w].astype(np.float64)
    images = np.empty((n, 1, h, w))
    labels = np.arange(n, dtype=np.int64) % classes
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        fy, fx = _CLASS_WAVES[labels[i]]
        phase = rng.uniform(-0.7, 0.7)
        amp = amplitude * rng.uniform(0.85, 1.15)
        img = 0.5 + amp * np.cos(2 * np.pi * (fy * ii / h + fx * jj / w) + phase)
        img += rng.normal(0.0, noise, size=(h, w))
        images[i, 0] = np.clip(img, 0.0, 1.0)
    return Dataset(images, labels)
