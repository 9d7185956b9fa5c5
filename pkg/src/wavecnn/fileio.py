"""Dependency-free binary I/O: binary PGM images and a raw tensor format.

The tensor container ("WTN1") is four magic bytes, a u8 element-type tag
(0 = float32, 1 = float64), a u8 rank, little-endian u64 dims, then the
row-major payload.  It exists so CLI stages can hand float arrays to each
other bit-exactly.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import FormatError

TENSOR_MAGIC = b"WTN1"
_TAG_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_TO_TAG = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


def write_tensor(path, array: np.ndarray) -> None:
    arr = np.asarray(array)
    if arr.dtype not in _DTYPE_TO_TAG:
        arr = arr.astype(np.float64)
    tag = _DTYPE_TO_TAG[arr.dtype]
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<BB", tag, arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        fh.write(np.ascontiguousarray(arr, dtype=_TAG_TO_DTYPE[tag]).tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != TENSOR_MAGIC:
            raise FormatError(f"{path}: not a raw tensor file")
        head = fh.read(2)
        if len(head) != 2:
            raise FormatError(f"{path}: truncated header")
        tag, rank = struct.unpack("<BB", head)
        if tag not in _TAG_TO_DTYPE:
            raise FormatError(f"{path}: unknown element-type tag {tag}")
        dims_blob = fh.read(8 * rank)
        if len(dims_blob) != 8 * rank:
            raise FormatError(f"{path}: truncated dims")
        shape = struct.unpack(f"<{rank}Q", dims_blob) if rank else ()
        dtype = _TAG_TO_DTYPE[tag]
        count = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = fh.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise FormatError(f"{path}: truncated payload")
        base = np.dtype(np.float32) if tag == 0 else np.dtype(np.float64)
        return np.frombuffer(payload, dtype=dtype).reshape(shape).astype(base)


def _next_token(fh) -> bytes:
    """One whitespace-delimited header token; '#' comments run to end of line."""
    tok = b""
    while True:
        ch = fh.read(1)
        if not ch:
            if tok:
                return tok
            raise FormatError("unexpected end of PGM header")
        if ch == b"#":
            while ch and ch != b"\n":
                ch = fh.read(1)
            continue
        if ch.isspace():
            if tok:
                return tok
            continue
        tok += ch


def read_pgm(path) -> np.ndarray:
    """Binary PGM (P5, maxval <= 255) -> uint8 array of shape (rows, cols)."""
    with open(path, "rb") as fh:
        if fh.read(2) != b"P5":
            raise FormatError(f"{path}: not a binary PGM (P5) file")
        try:
            width = int(_next_token(fh))
            height = int(_next_token(fh))
            maxval = int(_next_token(fh))
        except ValueError as exc:
            raise FormatError(f"{path}: malformed PGM header") from exc
        if width < 1 or height < 1:
            raise FormatError(f"{path}: bad PGM dimensions {width}x{height}")
        if not 0 < maxval <= 255:
            raise FormatError(f"{path}: unsupported PGM maxval {maxval}")
        payload = fh.read(width * height)
        if len(payload) != width * height:
            raise FormatError(f"{path}: truncated PGM payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, image: np.ndarray) -> None:
    """uint8 (or clippable float) 2-D array -> binary PGM with maxval 255."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise FormatError(f"PGM images are 2-D, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(np.ascontiguousarray(arr).tobytes())
