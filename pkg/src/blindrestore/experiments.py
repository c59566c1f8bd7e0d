"""Synthetic suites and the ablation harness built on top of the sampler.

The low-light suite draws clean images from a mixture of standardized
scenes and darkens each one with its own gain.  The ablation grid crosses
{adaptive, fixed} guidance scale with {learned, fixed} degradation model:

    A     fixed kernel, fixed scale
    B     fixed kernel, adaptive scale
    C     learned kernel, fixed scale
    full  learned kernel, adaptive scale

and adds a sweep of the full model over kernel sizes.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .degradation import init_model
from .errors import ConfigurationError
from .metrics import evaluate, psnr, suite_means
from .prior import GaussianMixturePrior
from .sampler import FailedRun, SamplerConfig, restore, restore_batch
from .scenes import draw_from_prior, scene_prior
from .synth import GaussianBlur, LowLight, degrade

ABLATION_MODELS = {
    "A": dict(fixed_kernel=True, fixed_scale=True),
    "B": dict(fixed_kernel=True, fixed_scale=False),
    "C": dict(fixed_kernel=False, fixed_scale=True),
    "full": dict(fixed_kernel=False, fixed_scale=False),
}
KERNEL_SWEEP = (1, 3, 5, 7, 9)

# Tuned on prior seeds 1000-1007 / image seeds 5000+; see the README.
LOW_LIGHT_CONFIG = SamplerConfig(
    T=250,
    beta_end=0.08,
    kernel_size=1,
    learning_rate=0.1,
    mask_learning_rate=30.0,
    s_init=1000.0,
    s_min=300.0,
)


@dataclass(frozen=True)
class Suite:
    prior: GaussianMixturePrior
    clean: list
    degraded: list
    operators: list


def low_light_gain(i: int) -> float:
    """Gains cycle through 0.20..0.47 in a fixed interleaved order."""
    return 0.2 + 0.3 * ((i * 7) % 10) / 10


def low_light_suite(
    n: int = 20,
    prior_seeds=range(2000, 2008),
    image_seed: int = 7000,
    variance: float = 1e-3,
) -> Suite:
    prior = scene_prior(list(prior_seeds), variance=variance, standardized=True)
    k = len(prior.weights)
    clean, degraded, ops = [], [], []
    for i in range(n):
        x = draw_from_prior(prior, i % k, image_seed + i)
        op = LowLight(gain=low_light_gain(i))
        clean.append(x)
        degraded.append(degrade(op, x))
        ops.append(op)
    return Suite(prior, clean, degraded, ops)


def scale_trend(traces) -> bool:
    """True when the median scale over the last 10% of traced steps is below
    the median over the first 10%."""
    s = [tr.s for tr in traces]
    n = max(1, int(math.floor(0.1 * len(s))))
    if len(s) < 2:
        return False
    return float(np.median(s[-n:])) < float(np.median(s[:n]))


@dataclass(frozen=True)
class AblationRow:
    model: str
    kernel_size: int
    fixed_kernel: bool
    fixed_scale: bool
    psnr: float
    ssim: float
    loe: float
    trend_fraction: float
    failed: int
    per_image_psnr: tuple = ()

    def as_csv(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("per_image_psnr")
        return d


def _summarise(name, cfg, runs, clean) -> AblationRow:
    reports, trends, failed = [], [], 0
    psnrs = []
    for run, x in zip(runs, clean):
        if isinstance(run, FailedRun):
            failed += 1
            psnrs.append(float("nan"))
            continue
        rep = evaluate(run.exported_image(), x)
        reports.append(rep)
        psnrs.append(rep.psnr)
        trends.append(scale_trend(run.traces))
    means = suite_means(reports) if reports else {"psnr": float("nan"), "ssim": float("nan"), "loe": float("nan")}
    return AblationRow(
        model=name,
        kernel_size=cfg.kernel_size,
        fixed_kernel=cfg.fixed_kernel,
        fixed_scale=cfg.fixed_scale,
        psnr=means["psnr"],
        ssim=means["ssim"],
        loe=means["loe"],
        trend_fraction=float(np.mean(trends)) if trends else 0.0,
        failed=failed,
        per_image_psnr=tuple(psnrs),
    )


def run_ablation(
    prior,
    clean,
    degraded,
    base: SamplerConfig,
    kernel_sizes=KERNEL_SWEEP,
    jobs: int = 1,
    models=tuple(ABLATION_MODELS),
) -> list[AblationRow]:
    """The 2x2 dynamic-update grid at ``base.kernel_size``, then the full
    model at every size in ``kernel_sizes``.  One row per configuration."""
    if len(clean) != len(degraded):
        raise ConfigurationError("clean and degraded suites differ in length")
    unknown = set(models) - set(ABLATION_MODELS)
    if unknown:
        raise ConfigurationError(f"unknown ablation models {sorted(unknown)}")
    plan = [(name, dataclasses.replace(base, **ABLATION_MODELS[name])) for name in models]
    plan += [(f"full_k{k}", dataclasses.replace(base, kernel_size=int(k), **ABLATION_MODELS["full"])) for k in kernel_sizes]
    rows = []
    for name, cfg in plan:
        runs = restore_batch(degraded, prior, cfg, parallelism=jobs)
        rows.append(_summarise(name, cfg, runs, clean))
    return rows


# Tuned on prior seeds 0-3 / image seeds 100+; see the README.
DEBLUR_CONFIG = SamplerConfig(
    T=500,
    beta_end=0.04,
    kernel_size=5,
    constraint_mode="simplex",
    learning_rate=0.5,
    s_init=1000.0,
)


@dataclass(frozen=True)
class KernelRecovery:
    initial_error: float
    final_error: float
    degraded_psnr: float
    restored_psnr: float

    @property
    def error_ratio(self) -> float:
        return self.final_error / self.initial_error

    @property
    def psnr_gain(self) -> float:
        return self.restored_psnr - self.degraded_psnr


def kernel_recovery(
    config: SamplerConfig = DEBLUR_CONFIG,
    sigma: float = 1.5,
    prior_seeds=range(3000, 3004),
    component: int = 0,
    image_seed: int = 9000,
) -> KernelRecovery:
    """Blind deblur of one mixture draw; reports kernel error and PSNR before/after."""
    prior = scene_prior(list(prior_seeds))
    x = draw_from_prior(prior, component, image_seed)
    op = GaussianBlur(sigma, config.kernel_size)
    y = degrade(op, x)
    k_true = op.equivalent_model(x.shape).kernel
    k0 = init_model(*x.shape, config.kernel_size, config.kernel_init, config.constraint_mode).kernel
    run = restore(y, prior, config)
    return KernelRecovery(
        initial_error=float(np.linalg.norm(k0 - k_true)),
        final_error=float(np.linalg.norm(run.model.kernel - k_true)),
        degraded_psnr=psnr(y, x),
        restored_psnr=psnr(run.exported_image(), x),
    )
