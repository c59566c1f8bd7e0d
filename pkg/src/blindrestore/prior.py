"""Noise predictors: the contract the sampler relies on, plus analytic priors.

A trained network is not needed to exercise the sampler.  For a Gaussian
mixture prior over clean images the noised marginal ``p_t`` is again a
Gaussian mixture, so the optimal noise prediction
``eps = -sqrt(1 - alpha_bar_t) * grad log p_t(x_t)`` is available in closed
form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import ConfigurationError, DimensionError
from .schedule import DiffusionSchedule


@runtime_checkable
class NoisePredictor(Protocol):
    def predict(self, x_t: np.ndarray, t: int, sched: DiffusionSchedule) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class GaussianMixturePrior:
    """Isotropic Gaussian mixture ``sum_j w_j N(m_j, var_j I)`` over images."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        m = np.asarray(self.means, dtype=np.float64)
        v = np.asarray(self.variances, dtype=np.float64).reshape(-1)
        if w.size == 0:
            raise ConfigurationError("mixture has no components")
        if m.ndim != 4 or m.shape[0] != w.size or v.size != w.size:
            raise ConfigurationError(
                f"expected {w.size} means of shape (C, H, W) and {w.size} variances, "
                f"got means {m.shape} and {v.size} variances"
            )
        if np.any(w <= 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"weights must lie in (0, 1] and sum to 1, got {w.tolist()}")
        if np.any(v <= 0):
            raise ConfigurationError("component variances must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @classmethod
    def single(cls, mean, variance: float) -> "GaussianMixturePrior":
        mean = np.asarray(mean, dtype=np.float64)
        return cls(np.array([1.0]), mean[None], np.array([float(variance)]))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.means.shape[1:]

    def noised_log_densities(self, x_t, t: int, sched: DiffusionSchedule) -> np.ndarray:
        """``log w_j + log N(x_t; sqrt(ab) m_j, v_j' I)`` for every component."""
        ab = sched.alpha_bar[sched.check_step(t)]
        diff = self._diff(x_t, ab)
        v = ab * self.variances + (1.0 - ab)
        d = diff[0].size
        sq = np.einsum("ji,ji->j", diff.reshape(len(v), -1), diff.reshape(len(v), -1))
        return np.log(self.weights) - 0.5 * d * np.log(2 * np.pi * v) - 0.5 * sq / v

    def _diff(self, x_t, ab: float) -> np.ndarray:
        x_t = np.asarray(x_t, dtype=np.float64)
        if x_t.shape != self.shape:
            raise DimensionError(f"x_t has shape {x_t.shape}, prior expects {self.shape}")
        return x_t[None] - np.sqrt(ab) * self.means

    def predict(self, x_t, t: int, sched: DiffusionSchedule) -> np.ndarray:
        return gmm_predict(self, x_t, t, sched)

    def to_dict(self) -> dict:
        return {
            "components": [
                {"weight": float(w), "mean": m.tolist(), "variance": float(v)}
                for w, m, v in zip(self.weights, self.means, self.variances)
            ]
        }


def gmm_predict(prior: GaussianMixturePrior, x_t, t: int, sched: DiffusionSchedule) -> np.ndarray:
    ab = sched.alpha_bar[sched.check_step(t)]
    diff = prior._diff(x_t, ab)
    v = ab * prior.variances + (1.0 - ab)
    logp = prior.noised_log_densities(x_t, t, sched)
    # log-sum-exp: v' can be tiny near t = 1
    logp = logp - logp.max()
    r = np.exp(logp)
    r /= r.sum()
    return np.sqrt(1.0 - ab) * np.einsum("j,j...->...", r / v, diff)


class OraclePredictor:
    """Test double that always returns the true noise realisation."""

    def __init__(self, x0_true, eps_true):
        self.x0_true = np.asarray(x0_true, dtype=np.float64)
        self.eps_true = np.asarray(eps_true, dtype=np.float64)

    def predict(self, x_t, t: int, sched: DiffusionSchedule) -> np.ndarray:
        return self.eps_true.copy()


def oracle_predict(x0_true, eps_true) -> OraclePredictor:
    return OraclePredictor(x0_true, eps_true)


def load_gmm_json(source, shape=None, base_dir=None) -> GaussianMixturePrior:
    """Build a prior from ``{"components": [{weight, mean_file | mean_const, variance}]}``.

    ``source`` is a path or an already-parsed dict.  ``mean_file`` paths are
    resolved against ``base_dir`` (default: the JSON file's directory).
    ``mean_const`` components need ``shape``, or take it from a file-backed
    sibling component.
    """
    from .images import read_image

    if isinstance(source, (str, Path)):
        path = Path(source)
        doc = json.loads(path.read_text())
        base_dir = Path(base_dir) if base_dir is not None else path.parent
    else:
        doc = source
        base_dir = Path(base_dir) if base_dir is not None else Path(".")
    comps = doc.get("components") if isinstance(doc, dict) else None
    if not comps:
        raise ConfigurationError("prior document must contain a non-empty 'components' list")
    if set(doc) - {"components"}:
        raise ConfigurationError(f"unknown prior keys: {sorted(set(doc) - {'components'})}")

    means = [None] * len(comps)
    for i, c in enumerate(comps):
        extra = set(c) - {"weight", "mean_file", "mean_const", "variance"}
        if extra:
            raise ConfigurationError(f"component {i}: unknown keys {sorted(extra)}")
        if ("mean_file" in c) == ("mean_const" in c):
            raise ConfigurationError(f"component {i}: give exactly one of mean_file, mean_const")
        if "mean_file" in c:
            means[i] = read_image(base_dir / c["mean_file"])
    known = [m.shape for m in means if m is not None]
    if shape is None:
        if not known:
            raise ConfigurationError("constant-mean components need an explicit image shape")
        shape = known[0]
    shape = tuple(shape)
    for i, c in enumerate(comps):
        if means[i] is None:
            means[i] = np.full(shape, float(c["mean_const"]))
        elif means[i].shape != shape:
            raise DimensionError(f"component {i}: mean shape {means[i].shape} != {shape}")
    return GaussianMixturePrior(
        np.array([float(c["weight"]) for c in comps]),
        np.stack(means),
        np.array([float(c["variance"]) for c in comps]),
    )
