"""Dense image tensors and convolution primitives.

Images are float64 arrays of shape ``(C, H, W)``; kernel banks are float64
arrays of shape ``(C_out, C_in, k, k)`` with odd ``k``.  Convolution uses
correlation semantics (no kernel flip) with replicate padding.  All
reductions go through ``np.einsum`` without path optimisation so the
accumulation order is fixed and results are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

__all__ = [
    "as_image",
    "as_kernel",
    "conv2d",
    "conv2d_adjoint_input",
    "conv2d_grad_kernel",
    "add",
    "sub",
    "scale",
    "mse",
    "dot",
]


def as_image(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or min(x.shape) < 1:
        raise DimensionError(f"expected a (C, H, W) image, got shape {x.shape}")
    return x


def as_kernel(k) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 4:
        raise DimensionError(f"expected a (C_out, C_in, k, k) kernel bank, got shape {k.shape}")
    if k.shape[2] != k.shape[3] or k.shape[2] % 2 == 0:
        raise DimensionError(f"kernel must be square with odd size, got {k.shape[2]}x{k.shape[3]}")
    return k


def _windows(x: np.ndarray, size: int) -> np.ndarray:
    # (C, H, W, k, k) view over the replicate-padded image
    r = size // 2
    xp = np.pad(x, ((0, 0), (r, r), (r, r)), mode="edge")
    return sliding_window_view(xp, (size, size), axis=(1, 2))


def _fold_edge_padding(p: np.ndarray, r: int) -> np.ndarray:
    """Adjoint of ``np.pad(..., mode="edge")`` on the two spatial axes."""
    if r == 0:
        return p
    p = p.copy()
    h = p.shape[1] - 2 * r
    w = p.shape[2] - 2 * r
    p[:, r, :] += p[:, :r, :].sum(axis=1)
    p[:, r + h - 1, :] += p[:, r + h:, :].sum(axis=1)
    p = p[:, r:r + h, :]
    p[:, :, r] += p[:, :, :r].sum(axis=2)
    p[:, :, r + w - 1] += p[:, :, r + w:].sum(axis=2)
    return p[:, :, r:r + w]


def conv2d(x, k) -> np.ndarray:
    """Multi-channel correlation: ``out[o] = sum_i correlate(x[i], k[o, i])``."""
    x = as_image(x)
    k = as_kernel(k)
    if x.shape[0] != k.shape[1]:
        raise DimensionError(f"image has {x.shape[0]} channels, kernel expects {k.shape[1]}")
    win = _windows(x, k.shape[2])
    return np.einsum("ihwab,oiab->ohw", win, k)


def conv2d_adjoint_input(g, k) -> np.ndarray:
    """Exact adjoint of :func:`conv2d` in its image argument."""
    g = as_image(g)
    k = as_kernel(k)
    if g.shape[0] != k.shape[0]:
        raise DimensionError(f"gradient has {g.shape[0]} channels, kernel produces {k.shape[0]}")
    size = k.shape[2]
    r = size // 2
    _, h, w = g.shape
    contrib = np.einsum("ohw,oiab->iabhw", g, k)
    padded = np.zeros((k.shape[1], h + 2 * r, w + 2 * r))
    for a in range(size):
        for b in range(size):
            padded[:, a:a + h, b:b + w] += contrib[:, a, b]
    return _fold_edge_padding(padded, r)


def conv2d_grad_kernel(x, g, shape) -> np.ndarray:
    """Gradient of ``<conv2d(x, k), g>`` with respect to a kernel of ``shape``."""
    x = as_image(x)
    g = as_image(g)
    shape = tuple(int(s) for s in shape)
    if len(shape) != 4 or shape[2] != shape[3] or shape[2] % 2 == 0:
        raise DimensionError(f"invalid kernel shape {shape}")
    if shape[1] != x.shape[0] or shape[0] != g.shape[0] or x.shape[1:] != g.shape[1:]:
        raise DimensionError(f"kernel shape {shape} incompatible with x {x.shape} and g {g.shape}")
    win = _windows(x, shape[2])
    return np.einsum("ohw,ihwab->oiab", g, win)


def _same_shape(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def add(a, b) -> np.ndarray:
    a, b = _same_shape(a, b)
    return a + b


def sub(a, b) -> np.ndarray:
    a, b = _same_shape(a, b)
    return a - b


def scale(a, c: float) -> np.ndarray:
    return float(c) * np.asarray(a, dtype=np.float64)


def dot(a, b) -> float:
    a, b = _same_shape(a, b)
    return float(np.einsum("i,i->", a.ravel(), b.ravel()))


def mse(a, b) -> float:
    a, b = _same_shape(a, b)
    d = (a - b).ravel()
    return float(np.einsum("i,i->", d, d)) / d.size
