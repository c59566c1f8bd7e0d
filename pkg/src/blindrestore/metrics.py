"""Full-reference image quality metrics.

Inputs are ``[-1, 1]`` images of shape ``(C, H, W)``; every metric first
maps them to ``[0, 1]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError, MetricError
from .synth import LUMA, degrade
from .tensor import as_image

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
LOE_MAX_SIDE = 50


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_image(a), as_image(b)
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    return (a + 1.0) / 2.0, (b + 1.0) / 2.0


def psnr(a, b) -> float:
    """PSNR in dB with unit peak; ``inf`` for identical images."""
    a, b = _pair(a, b)
    err = float(np.mean((a - b) ** 2))
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / err)


def luminance(x01: np.ndarray) -> np.ndarray:
    if x01.shape[0] == 3:
        return np.einsum("c,chw->hw", LUMA, x01)
    if x01.shape[0] == 1:
        return x01[0]
    return x01.mean(axis=0)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - size // 2
    g = np.exp(-(r**2) / (2 * sigma**2))
    g /= g.sum()
    return np.outer(g, g)


def ssim(a, b) -> float:
    """Mean SSIM over all fully-contained 11x11 Gaussian windows of the luminance."""
    a, b = _pair(a, b)
    la, lb = luminance(a), luminance(b)
    if min(la.shape) < SSIM_WINDOW:
        raise MetricError(f"image {la.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    w = gaussian_window()

    def filt(img):
        return np.einsum("hwab,ab->hw", sliding_window_view(img, w.shape), w)

    mu_a, mu_b = filt(la), filt(lb)
    var_a = filt(la * la) - mu_a**2
    var_b = filt(lb * lb) - mu_b**2
    cov = filt(la * lb) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def _nearest_downsample(m: np.ndarray, max_side: int) -> np.ndarray:
    h, w = m.shape
    nh, nw = min(h, max_side), min(w, max_side)
    rows = (np.arange(nh) * h) // nh
    cols = (np.arange(nw) * w) // nw
    return m[np.ix_(rows, cols)]


def lightness(x01: np.ndarray) -> np.ndarray:
    return x01.max(axis=0)


def loe(enhanced, reference) -> float:
    """Lightness order error (x1000): share of pixel pairs whose brightness order flips."""
    e, r = _pair(enhanced, reference)
    le = _nearest_downsample(lightness(e), LOE_MAX_SIDE).ravel()
    lr = _nearest_downsample(lightness(r), LOE_MAX_SIDE).ravel()
    ue = le[:, None] >= le[None, :]
    ur = lr[:, None] >= lr[None, :]
    return 1000.0 * float(np.count_nonzero(ue != ur)) / le.size**2


def consistency(x_restored, y, op, seed: int = 0) -> float:
    """``1e4 * mse(degrade(op, x), y)`` on the ``[0, 1]`` scale."""
    if op is None:
        raise MetricError("consistency needs the true degradation operator")
    a, b = _pair(degrade(op, x_restored, seed), y)
    return 1e4 * float(np.mean((a - b) ** 2))


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    loe: float
    consistency: float | None = None

    def to_json_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(d["psnr"]):
            d["psnr"] = "inf"
        return d


def evaluate(restored, reference, y=None, op=None, seed: int = 0) -> MetricReport:
    cons = None
    if op is not None and y is not None:
        cons = consistency(restored, y, op, seed)
    return MetricReport(psnr(restored, reference), ssim(restored, reference), loe(restored, reference), cons)


def suite_means(reports: list[MetricReport]) -> dict:
    out = {}
    for name in ("psnr", "ssim", "loe", "consistency"):
        vals = [getattr(r, name) for r in reports if getattr(r, name) is not None]
        out[name] = float(np.mean(vals)) if vals else None
    return out


def write_report(path, per_image: dict[str, MetricReport]) -> None:
    reports = list(per_image.values())
    doc = {
        "images": {k: v.to_json_dict() for k, v in per_image.items()},
        "mean": suite_means(reports) if reports else {},
    }
    mean_psnr = doc["mean"].get("psnr")
    if mean_psnr is not None and math.isinf(mean_psnr):
        doc["mean"]["psnr"] = "inf"
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
