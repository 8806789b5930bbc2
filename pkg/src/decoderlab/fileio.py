"""Binary tensor files (``.dft``) and netpbm images.

A ``.dft`` file is the 4-byte magic ``DFT1``, four little-endian uint32
dims (N, C, H, W) and then N*C*H*W little-endian float32 values in
row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .tensor import Tensor

MAGIC = b"DFT1"
_HEADER = struct.Struct("<4s4I")


def write_dft(path, x) -> None:
    data = x.data if isinstance(x, Tensor) else np.asarray(x)
    if data.ndim != 4:
        raise ValueError(f".dft holds 4-D tensors, got shape {data.shape}")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, *data.shape))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_dft(path) -> Tensor:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, n, c, h, w = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    count = n * c * h * w
    body = raw[_HEADER.size :]
    if len(body) != 4 * count:
        raise ValueError(f"{path}: expected {count} values, found {len(body) // 4}")
    values = np.frombuffer(body, dtype="<f4").astype(np.float32).reshape(n, c, h, w)
    return Tensor(values)


def list_dft(path) -> list[Path]:
    """A single file, or every ``.dft`` file in a directory in name order."""
    path = Path(path)
    if path.is_dir():
        return sorted(path.glob("*.dft"))
    return [path]


def to_uint8(img: np.ndarray, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    lo = float(img.min()) if lo is None else lo
    hi = float(img.max()) if hi is None else hi
    if hi <= lo:
        return np.zeros(img.shape, dtype=np.uint8)
    return np.clip(np.round((img - lo) / (hi - lo) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, img: np.ndarray) -> None:
    """Binary P5 greyscale; float input is min-max scaled to 0..255."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"PGM needs a 2-D image, got shape {img.shape}")
    if img.dtype != np.uint8:
        img = to_uint8(img)
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + img.tobytes())


def write_ppm(path, img: np.ndarray) -> None:
    """Binary P6 colour image from (H, W, 3) or (3, H, W)."""
    img = np.asarray(img)
    if img.ndim == 3 and img.shape[0] == 3 and img.shape[2] != 3:
        img = img.transpose(1, 2, 0)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM needs an (H, W, 3) image, got shape {img.shape}")
    if img.dtype != np.uint8:
        img = to_uint8(img)
    h, w, _ = img.shape
    Path(path).write_bytes(b"P6\n%d %d\n255\n" % (w, h) + np.ascontiguousarray(img).tobytes())


def read_pnm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    kind, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported")
    body = np.frombuffer(raw[pos + 1 :], dtype=np.uint8)
    if kind == b"P5":
        return body[: w * h].reshape(h, w)
    if kind == b"P6":
        return body[: w * h * 3].reshape(h, w, 3)
    raise ValueError(f"{path}: unsupported netpbm kind {kind!r}")
