"""Learnable degradation ``D(x) = K(x) + M``.

``K`` is a full channel-mixing convolution bank (``C x C x k x k``) and
``M`` an additive image-shaped mask.  Both are fitted by plain gradient
descent on the mean squared distance to the degraded observation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DimensionError
from .tensor import as_image, as_kernel, conv2d, conv2d_adjoint_input, conv2d_grad_kernel

CONSTRAINT_MODES = ("unconstrained", "simplex")
INIT_MODES = ("identity", "smoothed-identity")


@dataclass(frozen=True, eq=False)
class DegradationModel:
    kernel: np.ndarray
    mask: np.ndarray
    constraint_mode: str = "unconstrained"

    def __post_init__(self):
        k = as_kernel(self.kernel)
        m = as_image(self.mask)
        if self.constraint_mode not in CONSTRAINT_MODES:
            raise ConfigurationError(f"constraint_mode must be one of {CONSTRAINT_MODES}")
        if not k.shape[0] == k.shape[1] == m.shape[0]:
            raise DimensionError(f"kernel {k.shape} and mask {m.shape} disagree on channel count")
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "mask", m)

    @property
    def kernel_size(self) -> int:
        return self.kernel.shape[2]

    def apply(self, x) -> np.ndarray:
        return apply(self, x)


def apply(model: DegradationModel, x) -> np.ndarray:
    x = as_image(x)
    if x.shape != model.mask.shape:
        raise DimensionError(f"image {x.shape} does not match mask {model.mask.shape}")
    return conv2d(x, model.kernel) + model.mask


def loss_and_grads(model: DegradationModel, x0_hat, y):
    """MSE between ``D(x0_hat)`` and ``y`` and its gradients.

    Returns ``(loss, grad_x, grad_kernel, grad_mask)``.
    """
    y = as_image(y)
    pred = apply(model, x0_hat)
    if pred.shape != y.shape:
        raise DimensionError(f"D(x) has shape {pred.shape}, observation has {y.shape}")
    resid = pred - y
    n = resid.size
    loss = float(np.einsum("i,i->", resid.ravel(), resid.ravel())) / n
    r = (2.0 / n) * resid
    grad_x = conv2d_adjoint_input(r, model.kernel)
    grad_k = conv2d_grad_kernel(x0_hat, r, model.kernel.shape)
    return loss, grad_x, grad_k, r


def identity_kernel(channels: int, size: int) -> np.ndarray:
    k = np.zeros((channels, channels, size, size))
    c = size // 2
    k[np.arange(channels), np.arange(channels), c, c] = 1.0
    return k


def project_simplex(kernel) -> np.ndarray:
    """Clip negative weights and renormalise each output-channel slice to sum 1.

    A slice that is entirely zero after clipping falls back to the identity
    map for that output channel.
    """
    k = np.clip(np.asarray(kernel, dtype=np.float64), 0.0, None)
    sums = k.sum(axis=(1, 2, 3))
    out = np.empty_like(k)
    ident = identity_kernel(k.shape[0], k.shape[2])
    for o in range(k.shape[0]):
        out[o] = k[o] / sums[o] if sums[o] > 0 else ident[o]
    return out


def update_params(
    model: DegradationModel, grad_kernel, grad_mask, lr: float, mask_lr: float | None = None
) -> DegradationModel:
    """One gradient-descent step on kernel and mask (``mask_lr`` defaults to ``lr``)."""
    mask_lr = lr if mask_lr is None else mask_lr
    if not lr > 0 or not mask_lr > 0:
        raise ConfigurationError(f"learning rates must be positive, got {lr}, {mask_lr}")
    grad_kernel = np.asarray(grad_kernel, dtype=np.float64)
    grad_mask = np.asarray(grad_mask, dtype=np.float64)
    if grad_kernel.shape != model.kernel.shape or grad_mask.shape != model.mask.shape:
        raise DimensionError("gradient shapes do not match the model parameters")
    kernel = model.kernel - lr * grad_kernel
    if model.constraint_mode == "simplex":
        kernel = project_simplex(kernel)
    return replace(model, kernel=kernel, mask=model.mask - mask_lr * grad_mask)


def init_model(
    channels: int,
    height: int,
    width: int,
    kernel_size: int,
    mode: str = "identity",
    constraint_mode: str = "unconstrained",
) -> DegradationModel:
    """Deterministic starting point for the degradation parameters.

    ``identity`` puts a unit centre tap on the channel diagonal;
    ``smoothed-identity`` blurs that tap with a 3x3 box (clipped to the
    kernel footprint, renormalised) so that neighbouring taps start with
    non-zero weight.  The mask always starts at zero.
    """
    if int(kernel_size) != kernel_size or kernel_size < 1 or kernel_size % 2 == 0:
        raise ConfigurationError(f"kernel_size must be a positive odd integer, got {kernel_size}")
    if mode not in INIT_MODES:
        raise ConfigurationError(f"init mode must be one of {INIT_MODES}, got {mode!r}")
    kernel = identity_kernel(channels, kernel_size)
    if mode == "smoothed-identity":
        box = np.zeros((kernel_size, kernel_size))
        c = kernel_size // 2
        box[max(c - 1, 0):c + 2, max(c - 1, 0):c + 2] = 1.0
        box /= box.sum()
        kernel = np.zeros_like(kernel)
        kernel[np.arange(channels), np.arange(channels)] = box
    return DegradationModel(kernel, np.zeros((channels, height, width)), constraint_mode)


def save_model(model: DegradationModel, stem) -> tuple[Path, Path]:
    """Write ``<stem>.json`` (header) and ``<stem>.bin`` (float64 payload).

    The payload is the kernel followed by the mask, both row-major,
    little-endian.
    """
    stem = Path(stem)
    header = {
        "format": "blindrestore-degradation-v1",
        "dtype": "<f8",
        "kernel_shape": list(model.kernel.shape),
        "mask_shape": list(model.mask.shape),
        "constraint_mode": model.constraint_mode,
    }
    jpath = stem.with_suffix(".json")
    bpath = stem.with_suffix(".bin")
    jpath.write_text(json.dumps(header, indent=2) + "\n")
    payload = np.concatenate([model.kernel.ravel(), model.mask.ravel()]).astype("<f8")
    bpath.write_bytes(payload.tobytes())
    return jpath, bpath


def load_model(stem) -> DegradationModel:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    data = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<f8").astype(np.float64)
    ks = tuple(header["kernel_shape"])
    ms = tuple(header["mask_shape"])
    nk = int(np.prod(ks))
    if data.size != nk + int(np.prod(ms)):
        raise DimensionError("payload size does not match header shapes")
    return DegradationModel(data[:nk].reshape(ks), data[nk:].reshape(ms), header["constraint_mode"])
