"""Seeded procedural scenes and the Gaussian-mixture priors built from them.

Scenes are a few flat-coloured discs and rectangles over a colour ramp,
plus a fine block texture so that blur kernels stay identifiable from the
image content.
"""

from __future__ import annotations

import numpy as np

from .prior import GaussianMixturePrior


def scene(seed: int, channels: int = 3, height: int = 32, width: int = 32, texture: float = 0.3) -> np.ndarray:
    g = np.random.default_rng([seed, 0x5CE4E])
    yy, xx = np.mgrid[0:height, 0:width]
    yy = yy / height
    xx = xx / width
    a, b = g.uniform(-0.5, 0.5, (2, channels))
    img = a[:, None, None] * xx + b[:, None, None] * yy
    for _ in range(5):
        col = g.uniform(-0.8, 0.8, channels)
        cx, cy, r = g.uniform(0, 1), g.uniform(0, 1), g.uniform(0.08, 0.3)
        if g.random() < 0.5:
            m = (xx - cx) ** 2 + (yy - cy) ** 2 < r * r
        else:
            m = (np.abs(xx - cx) < r) & (np.abs(yy - cy) < 0.6 * r)
        img[:, m] = col[:, None]
    blocks = g.choice([-1.0, 1.0], size=(channels, -(-height // 2), -(-width // 2)))
    img = img + texture * np.repeat(np.repeat(blocks, 2, axis=1), 2, axis=2)[:, :height, :width]
    return np.clip(img, -0.9, 0.9)


def standardized_scene(seed: int, rms: float = 0.4, **kw) -> np.ndarray:
    """:func:`scene` shifted to zero mean and rescaled to a fixed RMS.

    Components that share mean and energy can only be told apart by their
    structure, which an unknown gain and offset do not change.
    """
    img = scene(seed, **kw)
    img = img - img.mean()
    img = img * (rms / np.sqrt(np.mean(img * img)))
    return np.clip(img, -0.95, 0.95)


def scene_prior(seeds, variance: float = 1e-3, standardized: bool = False, **kw) -> GaussianMixturePrior:
    make = standardized_scene if standardized else scene
    means = np.stack([make(s, **kw) for s in seeds])
    return GaussianMixturePrior(np.full(len(means), 1.0 / len(means)), means, np.full(len(means), float(variance)))


def draw_from_prior(prior: GaussianMixturePrior, component: int, seed: int) -> np.ndarray:
    """One clean image from a given mixture component."""
    g = np.random.default_rng([seed, 0xD4A3])
    noise = g.standard_normal(prior.shape)
    return np.clip(prior.means[component] + np.sqrt(prior.variances[component]) * noise, -1.0, 1.0)
