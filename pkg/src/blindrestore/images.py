"""8-bit image I/O: PNG through Pillow, binary PGM (P5) by hand.

Pixel values ``v`` in ``0..255`` map to ``v / 127.5 - 1``.  Writing clamps
to ``[-1, 1]`` and quantises with round-half-to-even.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionError

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


def to_uint8(x) -> np.ndarray:
    v = (np.clip(np.asarray(x, dtype=np.float64), -1.0, 1.0) + 1.0) * 127.5
    return np.rint(v).astype(np.uint8)


def from_uint8(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float64) / 127.5 - 1.0


def read_pgm(path, raw: bool = False):
    """Return ``(pixels, maxval)``; pixels are ``(H, W)`` ints if ``raw``, else a ``(1, H, W)`` image."""
    data = Path(path).read_bytes()
    pos = 0
    fields = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise ValueError(f"{path}: truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(f) for f in fields[1:])
    if not 0 < maxval < 256:
        raise ValueError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    pix = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    if raw:
        return pix.copy(), maxval
    return from_uint8(pix.astype(np.float64) * (255.0 / maxval))[None], maxval


def write_pgm(path, pixels, maxval: int = 255) -> None:
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim != 2:
        raise DimensionError("PGM payload must be a 2-D array")
    h, w = pixels.shape
    Path(path).write_bytes(b"P5\n%d %d\n%d\n" % (w, h, maxval) + pixels.tobytes())


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)[0]
    with Image.open(path) as im:
        if im.mode == "L":
            return from_uint8(np.asarray(im))[None]
        arr = np.asarray(im.convert("RGB"))
    return from_uint8(arr).transpose(2, 0, 1)


def write_image(path, x) -> None:
    path = Path(path)
    q = to_uint8(x)
    if q.ndim != 3 or q.shape[0] not in (1, 3):
        raise DimensionError(f"can only write 1- or 3-channel images, got shape {q.shape}")
    if path.suffix.lower() == ".pgm":
        if q.shape[0] != 1:
            raise DimensionError("PGM output needs a single-channel image")
        write_pgm(path, q[0])
        return
    img = Image.fromarray(q[0], mode="L") if q.shape[0] == 1 else Image.fromarray(q.transpose(1, 2, 0), mode="RGB")
    img.save(path, format="PNG", optimize=False)
