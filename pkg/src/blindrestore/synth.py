"""Ground-truth degradation operators for fabricating (clean, degraded) pairs.

Images live in ``[-1, 1]``.  Operators that act on intensities (low light)
work on the linear ``[0, 1]`` scale ``(x + 1) / 2`` and map back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .degradation import DegradationModel, identity_kernel
from .errors import ConfigurationError, DimensionError
from .tensor import as_image, conv2d

# Rec. 601 luma
LUMA = np.array([0.299, 0.587, 0.114])


def gaussian_kernel(sigma: float, size: int) -> np.ndarray:
    if not sigma > 0:
        raise ConfigurationError(f"sigma must be positive, got {sigma}")
    if size < 1 or size % 2 == 0:
        raise ConfigurationError(f"kernel size must be a positive odd integer, got {size}")
    r = np.arange(size) - size // 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2.0 * sigma**2))
    return g / g.sum()


def motion_kernel(length: float, angle: float, size: int | None = None) -> np.ndarray:
    """Normalised line of ``length`` pixels at ``angle`` degrees (counter-clockwise from +x)."""
    if not length > 0:
        raise ConfigurationError(f"motion length must be positive, got {length}")
    if size is None:
        size = int(math.ceil(length)) | 1
    if size < 1 or size % 2 == 0:
        raise ConfigurationError(f"kernel size must be a positive odd integer, got {size}")
    c = size // 2
    k = np.zeros((size, size))
    theta = math.radians(angle)
    n = max(int(math.ceil(length * 8)), 1)
    for u in np.linspace(-length / 2, length / 2, n + 1):
        col = c + u * math.cos(theta)
        row = c - u * math.sin(theta)
        i, j = int(round(row)), int(round(col))
        if 0 <= i < size and 0 <= j < size:
            k[i, j] += 1.0
    return k / k.sum()


def _diag_bank(k2d: np.ndarray, channels: int) -> np.ndarray:
    bank = np.zeros((channels, channels) + k2d.shape)
    bank[np.arange(channels), np.arange(channels)] = k2d
    return bank


@dataclass(frozen=True)
class GaussianBlur:
    sigma: float = 1.0
    size: int = 5
    kind = "gaussian_blur"

    def __post_init__(self):
        gaussian_kernel(self.sigma, self.size)

    def degrade(self, x, seed: int = 0) -> np.ndarray:
        return conv2d(x, _diag_bank(gaussian_kernel(self.sigma, self.size), x.shape[0]))

    def equivalent_model(self, shape) -> DegradationModel:
        return DegradationModel(_diag_bank(gaussian_kernel(self.sigma, self.size), shape[0]), np.zeros(shape))


@dataclass(frozen=True)
class MotionBlur:
    length: float = 5.0
    angle: float = 0.0
    size: int | None = None
    kind = "motion_blur"

    def __post_init__(self):
        motion_kernel(self.length, self.angle, self.size)

    def kernel(self) -> np.ndarray:
        return motion_kernel(self.length, self.angle, self.size)

    def degrade(self, x, seed: int = 0) -> np.ndarray:
        return conv2d(x, _diag_bank(self.kernel(), x.shape[0]))

    def equivalent_model(self, shape) -> DegradationModel:
        return DegradationModel(_diag_bank(self.kernel(), shape[0]), np.zeros(shape))


@dataclass(frozen=True)
class Downsample4x:
    kind = "downsample4x"

    def degrade(self, x, seed: int = 0) -> np.ndarray:
        c, h, w = x.shape
        if h % 4 or w % 4:
            raise ConfigurationError(f"downsample4x needs H and W divisible by 4, got {h}x{w}")
        low = x.reshape(c, h // 4, 4, w // 4, 4).mean(axis=(2, 4))
        return np.repeat(np.repeat(low, 4, axis=1), 4, axis=2)


@dataclass(frozen=True)
class Grayscale:
    kind = "grayscale"

    def degrade(self, x, seed: int = 0) -> np.ndarray:
        if x.shape[0] != 3:
            raise DimensionError("grayscale expects a 3-channel image")
        lum = np.einsum("c,chw->hw", LUMA, x)
        return np.repeat(lum[None], 3, axis=0)

    def equivalent_model(self, shape) -> DegradationModel:
        if shape[0] != 3:
            raise DimensionError("grayscale expects a 3-channel image")
        k = np.zeros((3, 3, 1, 1))
        k[:, :, 0, 0] = LUMA[None, :]
        return DegradationModel(k, np.zeros(shape))


@dataclass(frozen=True)
class Inpaint:
    """Sets masked pixels (all channels) to -1.

    Without an explicit ``mask`` bitmap, exactly ``floor(ratio * H * W)``
    pixel positions are drawn without replacement from the seeded stream.
    """

    ratio: float = 0.25
    mask: np.ndarray | None = field(default=None, compare=False)
    mask_file: str | None = None
    kind = "inpaint"

    def __post_init__(self):
        if self.mask is None and not 0 < self.ratio < 1:
            raise ConfigurationError(f"inpaint ratio must lie in (0, 1), got {self.ratio}")

    def pixel_mask(self, h: int, w: int, seed: int = 0) -> np.ndarray:
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != (h, w):
                raise DimensionError(f"mask bitmap {m.shape} != image {h}x{w}")
            return m
        count = int(math.floor(self.ratio * h * w))
        idx = rng.stream(seed, rng.MASK).permutation(h * w)[:count]
        m = np.zeros(h * w, dtype=bool)
        m[idx] = True
        return m.reshape(h, w)

    def degrade(self, x, seed: int = 0) -> np.ndarray:
        m = self.pixel_mask(x.shape[1], x.shape[2], seed)
        out = x.copy()
        out[:, m] = -1.0
        return out


@dataclass(frozen=True)
class LowLight:
    """``y_lin = gain * x_lin + bias`` on the linear ``[0, 1]`` scale."""

    gain: float = 0.3
    bias: float = 0.0
    kind = "low_light"

    def __post_init__(self):
        if not 0 < self.gain < 1:
            raise ConfigurationError(f"low_light gain must lie in (0, 1), got {self.gain}")
        if self.bias < 0 or self.gain + self.bias > 1:
            raise ConfigurationError("low_light needs bias >= 0 and gain + bias <= 1")

    @property
    def offset(self) -> float:
        # same map written on the [-1, 1] scale: y = gain * x + offset
        return self.gain - 1.0 + 2.0 * self.bias

    def degrade(self, x, seed: int = 0) -> np.ndarray:
        return self.gain * x + self.offset

    def equivalent_model(self, shape) -> DegradationModel:
        return DegradationModel(self.gain * identity_kernel(shape[0], 1), np.full(shape, self.offset))


@dataclass(frozen=True)
class HDRClip:
    threshold: float = 0.5
    kind = "hdr_clip"

    def __post_init__(self):
        if not -1 < self.threshold <= 1:
            raise ConfigurationError(f"hdr_clip threshold must lie in (-1, 1], got {self.threshold}")

    def degrade(self, x, seed: int = 0) -> np.ndarray:
        return np.minimum(x, self.threshold)


@dataclass(frozen=True)
class Compose:
    ops: tuple = ()
    kind = "compose"

    def __post_init__(self):
        if not self.ops:
            raise ConfigurationError("compose needs at least one operator")
        object.__setattr__(self, "ops", tuple(self.ops))

    def degrade(self, x, seed: int = 0) -> np.ndarray:
        for i, op in enumerate(self.ops):
            x = op.degrade(x, seed + i)
        return x


OPERATORS = {
    cls.kind: cls
    for cls in (GaussianBlur, MotionBlur, Downsample4x, Grayscale, Inpaint, LowLight, HDRClip, Compose)
}

TaskOperator = GaussianBlur | MotionBlur | Downsample4x | Grayscale | Inpaint | LowLight | HDRClip | Compose


def degrade(op, x, seed: int = 0) -> np.ndarray:
    """Apply ``op`` to ``x``; ``seed`` only matters for random inpainting masks."""
    x = as_image(x)
    return op.degrade(x, seed)


def representable_as_degradation_model(op, shape) -> DegradationModel | None:
    """Exact ``(K, M)`` equivalent of ``op`` for images of ``shape``, if one exists."""
    fn = getattr(op, "equivalent_model", None)
    return None if fn is None else fn(tuple(shape))


def operator_from_dict(d: dict, base_dir=None):
    from pathlib import Path

    from .images import read_pgm

    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in OPERATORS:
        raise ConfigurationError(f"unknown operator kind {kind!r}; expected one of {sorted(OPERATORS)}")
    if kind == "compose":
        if set(d) != {"ops"}:
            raise ConfigurationError("compose takes exactly one key: 'ops'")
        return Compose(tuple(operator_from_dict(o, base_dir) for o in d["ops"]))
    cls = OPERATORS[kind]
    allowed = {f for f in cls.__dataclass_fields__ if f != "mask"}
    unknown = set(d) - allowed
    if unknown:
        raise ConfigurationError(f"{kind}: unknown keys {sorted(unknown)}")
    if kind == "inpaint" and d.get("mask_file"):
        path = Path(d["mask_file"])
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        d["mask"] = read_pgm(path, raw=True)[0] > 0
    try:
        return cls(**d)
    except TypeError as exc:
        raise ConfigurationError(f"{kind}: {exc}") from None


def operator_to_dict(op) -> dict:
    if isinstance(op, Compose):
        return {"kind": "compose", "ops": [operator_to_dict(o) for o in op.ops]}
    out = {"kind": op.kind}
    for name in op.__dataclass_fields__:
        if name == "mask":
            continue
        value = getattr(op, name)
        if name == "mask_file" and value is None:
            continue
        out[name] = value
    return out
