"""Guided reverse diffusion with a per-step fitted degradation model."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .degradation import (
    CONSTRAINT_MODES,
    INIT_MODES,
    DegradationModel,
    init_model,
    loss_and_grads,
    update_params,
)
from .errors import BlindRestoreError, ConfigurationError, DimensionError, SamplingDivergedError
from .guidance import LOSS_FLOOR, GuidanceState, adaptive_scale, guidance_shift, taylor_scale
from .prior import NoisePredictor
from .schedule import DiffusionSchedule, forward_sample, make_linear_schedule, posterior_params, predict_x0
from .tensor import as_image, mse

WARM_STARTS = ("none", "from_y", "from_image")
SCALE_LOSSES = ("x0_hat", "x_t")
SCALE_RULES = ("secant", "gradient")


@dataclass(frozen=True)
class SamplerConfig:
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    kernel_size: int = 5
    kernel_init: str = "identity"
    constraint_mode: str = "unconstrained"
    learning_rate: float = 1e-2
    # per-pixel mask gradients carry a 1/n factor; None reuses learning_rate
    mask_learning_rate: float | None = None
    s_init: float = 2000.0
    s_min: float = 1.0
    s_max: float = 1e6
    fixed_scale: bool = False
    fixed_kernel: bool = False
    scale_rule: str = "secant"
    # "x_t" evaluates the scale's loss on the noisy state instead of x0_hat (ablation only)
    scale_loss: str = "x0_hat"
    warm_start: str = "from_y"
    seed: int = 0
    trace_every: int = 1

    def __post_init__(self):
        if self.kernel_init not in INIT_MODES:
            raise ConfigurationError(f"kernel_init must be one of {INIT_MODES}")
        if self.constraint_mode not in CONSTRAINT_MODES:
            raise ConfigurationError(f"constraint_mode must be one of {CONSTRAINT_MODES}")
        if self.warm_start not in WARM_STARTS:
            raise ConfigurationError(f"warm_start must be one of {WARM_STARTS}")
        if self.scale_rule not in SCALE_RULES:
            raise ConfigurationError(f"scale_rule must be one of {SCALE_RULES}")
        if self.scale_loss not in SCALE_LOSSES:
            raise ConfigurationError(f"scale_loss must be one of {SCALE_LOSSES}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigurationError(f"kernel_size must be a positive odd integer, got {self.kernel_size}")
        if not self.fixed_kernel and not self.learning_rate > 0:
            raise ConfigurationError("learning_rate must be positive unless fixed_kernel is set")
        if self.mask_learning_rate is not None and not self.mask_learning_rate > 0:
            raise ConfigurationError("mask_learning_rate must be positive")
        if not 0 < self.s_min <= self.s_max or self.s_init < 0:
            raise ConfigurationError("need 0 < s_min <= s_max and s_init >= 0")
        if self.trace_every < 1:
            raise ConfigurationError("trace_every must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    def schedule(self) -> DiffusionSchedule:
        return make_linear_schedule(self.T, self.beta_start, self.beta_end)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigurationError(f"unknown sampler keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class StepTrace:
    t: int
    loss: float
    s: float
    kernel_mean: float
    mask_mean: float
    ref_mse: float | None = None


@dataclass(eq=False)
class RestorationRun:
    config: SamplerConfig
    image: np.ndarray
    model: DegradationModel
    traces: list[StepTrace]
    metrics: dict = field(default_factory=dict)

    def exported_image(self) -> np.ndarray:
        return np.clip(self.image, -1.0, 1.0)


@dataclass(frozen=True)
class FailedRun:
    index: int
    error: str
    step: int | None = None


def _finite(t: int, what: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise SamplingDivergedError(t, what)


def _scale(config, state, predictor, sched, model, y, t, x_t, x0_hat, loss, grad_x) -> float:
    """Guidance scale at step ``t`` under ``config.scale_rule`` and ``config.scale_loss``."""
    if state.prev_mean is None or config.fixed_scale:
        return taylor_scale(state, loss, loss)
    mu = state.prev_mean
    if config.scale_loss == "x_t":
        # uncorrected form: the loss is measured on the noisy state itself
        loss_t, grad_t, _, _ = loss_and_grads(model, x_t, y)
        loss_t = max(loss_t, LOSS_FLOOR)
        if config.scale_rule == "gradient":
            return adaptive_scale(state, x_t, grad_t, loss_t)
        loss_mu, grad_mu, _, _ = loss_and_grads(model, mu, y)
        return taylor_scale(state, loss_mu + float(np.vdot(x_t - mu, grad_mu)), loss_t)
    if config.scale_rule == "gradient":
        return adaptive_scale(state, x_t, grad_x / np.sqrt(sched.alpha_bar[t]), loss)
    x0_mu = predict_x0(sched, mu, predictor.predict(mu, t, sched), t)
    loss_mu, grad_mu, _, _ = loss_and_grads(model, x0_mu, y)
    predicted = loss_mu + float(np.vdot(x0_hat - x0_mu, grad_mu))
    _finite(t, "guidance scale", np.array(predicted))
    return taylor_scale(state, predicted, loss)


def restore(
    y,
    predictor: NoisePredictor,
    config: SamplerConfig,
    *,
    reference=None,
    init_image=None,
    model: DegradationModel | None = None,
) -> RestorationRun:
    """Run the guided reverse chain from ``t = T`` down to ``t = 1``.

    Each step predicts ``x0_hat``, measures ``L(D(x0_hat), y)``, picks the
    guidance scale, shifts ``x0_hat`` against the loss gradient, samples
    ``x_{t-1}`` from the resulting posterior and finally takes one gradient
    step on the degradation parameters using the pre-shift gradients.

    ``reference`` (the clean image, if known) only feeds the trace;
    ``init_image`` is required for ``warm_start="from_image"``; ``model``
    overrides the configured degradation initialisation.
    """
    y = as_image(y)
    if not np.all(np.isfinite(y)):
        raise ConfigurationError("observation contains non-finite values")
    sched = config.schedule()
    T = sched.T
    shape = y.shape
    if model is None:
        model = init_model(*shape, config.kernel_size, config.kernel_init, config.constraint_mode)
    elif model.mask.shape != shape:
        raise DimensionError(f"degradation model mask {model.mask.shape} != observation {shape}")
    if reference is not None:
        reference = as_image(reference)

    eps = rng.normal(config.seed, rng.INIT, 0, shape)
    if config.warm_start == "none":
        x_t = eps
    elif config.warm_start == "from_y":
        x_t = forward_sample(sched, y, T, eps)
    else:
        if init_image is None:
            raise ConfigurationError("warm_start='from_image' needs init_image")
        x_t = forward_sample(sched, as_image(init_image), T, eps)

    state = GuidanceState(config.s_init, config.s_min, config.s_max, fixed=config.fixed_scale)
    traces: list[StepTrace] = []
    for t in range(T, 0, -1):
        eps_hat = np.asarray(predictor.predict(x_t, t, sched), dtype=np.float64)
        if eps_hat.shape != shape:
            raise DimensionError(f"predictor returned shape {eps_hat.shape}, expected {shape}")
        x0_hat = predict_x0(sched, x_t, eps_hat, t)
        _finite(t, "x0_hat", x0_hat)
        loss, grad_x, grad_k, grad_m = loss_and_grads(model, x0_hat, y)
        _finite(t, "loss gradients", np.array(loss), grad_x, grad_k)

        if loss < LOSS_FLOOR:
            s = state.prev_scale if state.prev_scale is not None else state.clamp(config.s_init)
            shifted = x0_hat
        else:
            s = _scale(config, state, predictor, sched, model, y, t, x_t, x0_hat, loss, grad_x)
            shifted = guidance_shift(x0_hat, grad_x, s, sched, t)

        mean, var = posterior_params(sched, shifted, x_t, t)
        if t > 1:
            x_prev = mean + np.sqrt(var) * rng.normal(config.seed, rng.STEP, t, shape)
        else:
            x_prev = mean
        _finite(t, "x_{t-1}", x_prev)
        state = state.advance(s, mean)

        if not config.fixed_kernel:
            model = update_params(model, grad_k, grad_m, config.learning_rate, config.mask_learning_rate)
            _finite(t, "degradation parameters", model.kernel, model.mask)

        if (T - t) % config.trace_every == 0:
            traces.append(
                StepTrace(
                    t=t,
                    loss=loss,
                    s=float(s),
                    kernel_mean=float(model.kernel.mean()),
                    mask_mean=float(model.mask.mean()),
                    ref_mse=None if reference is None else mse(x0_hat, reference),
                )
            )
        x_t = x_prev

    return RestorationRun(config=config, image=x_t, model=model, traces=traces)


def _restore_one(args):
    index, y, predictor, config, reference = args
    try:
        return restore(y, predictor, config, reference=reference)
    except SamplingDivergedError as exc:
        return FailedRun(index, str(exc), exc.step)
    except BlindRestoreError as exc:
        return FailedRun(index, str(exc))


def restore_batch(
    inputs,
    predictor: NoisePredictor,
    config: SamplerConfig,
    parallelism: int = 1,
    references=None,
) -> list[RestorationRun | FailedRun]:
    """Restore each input independently with seed ``config.seed + index``.

    Failures are returned in place as :class:`FailedRun` records; the rest
    of the batch still runs.  Output is identical for any ``parallelism``.
    """
    inputs = list(inputs)
    refs = list(references) if references is not None else [None] * len(inputs)
    if len(refs) != len(inputs):
        raise ConfigurationError("references must match inputs one-to-one")
    jobs = [
        (i, y, predictor, dataclasses.replace(config, seed=(config.seed + i) % 2**64), ref)
        for i, (y, ref) in enumerate(zip(inputs, refs))
    ]
    if parallelism <= 1 or len(jobs) <= 1:
        return [_restore_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(parallelism, len(jobs))) as pool:
        return list(pool.map(_restore_one, jobs))
