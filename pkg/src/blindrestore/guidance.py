"""Guidance scale recursion and the guidance shift applied to ``x0_hat``.

The heuristic likelihood is ``log p(y | x_t) = -log N - s * L(D(x0_hat), y)``.
A first-order expansion of it around the previous sampling mean ``mu``
gives ``s = -((x_t - mu)^T g + C + log N) / L``.  Neither ``C`` nor ``log N``
is observable, so both are calibrated from the previous step, where the
heuristic held with the previous scale: ``g = -s_prev * grad L`` and
``C + log N = -s_prev * L``.  That closes the formula into

    s = s_prev * (1 + (x_t - mu)^T grad_xt L / L)

which is what :func:`adaptive_scale` evaluates before clamping.

Written generally, each closure is ``s = s_prev * L_pred / L`` where
``L_pred`` is a first-order prediction of the current loss.  The sampler's
default ``"secant"`` rule expands around ``mu`` itself, as the Taylor
argument asks: ``L_pred = L(mu) + (x0(x_t) - x0(mu))^T grad L(mu)``, with
the predictor's secant standing in for its Jacobian.  Because ``L`` is
quadratic in ``x0`` that prediction never exceeds ``L``, so the scale can
only shrink.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DimensionError, GuidanceError
from .schedule import DiffusionSchedule

LOSS_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class GuidanceState:
    s_init: float = 2000.0
    s_min: float = 1.0
    s_max: float = 1e6
    prev_scale: float | None = None
    prev_mean: np.ndarray | None = None
    fixed: bool = False

    def __post_init__(self):
        if not 0 < self.s_min <= self.s_max:
            raise ConfigurationError(f"need 0 < s_min <= s_max, got [{self.s_min}, {self.s_max}]")
        if self.s_init < 0:
            raise ConfigurationError("s_init must be non-negative")

    def clamp(self, s: float) -> float:
        return float(min(max(s, self.s_min), self.s_max))

    def advance(self, scale: float, mean) -> "GuidanceState":
        return replace(self, prev_scale=float(scale), prev_mean=np.asarray(mean, dtype=np.float64))


def taylor_scale(state: GuidanceState, predicted_loss: float, loss: float) -> float:
    """``clamp(s_prev * predicted_loss / loss)``; the clamped ``s_init`` on the first step."""
    if state.prev_mean is None or state.prev_scale is None:
        return state.clamp(state.s_init)
    if not loss > 0:
        raise GuidanceError(f"guidance scale needs a positive loss, got {loss}")
    if state.fixed:
        return state.clamp(state.prev_scale)
    return state.clamp(state.prev_scale * predicted_loss / loss)


def adaptive_scale(state: GuidanceState, x_t, grad_L_xt, loss: float) -> float:
    """Guidance scale for the current step.

    ``grad_L_xt`` is the loss gradient with respect to ``x_t``.  With no
    previous mean (first step) the clamped initial scale is returned.  In
    fixed mode the correction term is forced to zero, so the scale never
    moves from its initial value.
    """
    if state.prev_mean is None or state.prev_scale is None:
        return state.clamp(state.s_init)
    if not loss > 0:
        raise GuidanceError(f"guidance scale needs a positive loss, got {loss}")
    if state.fixed:
        return state.clamp(state.prev_scale)
    x_t = np.asarray(x_t, dtype=np.float64)
    grad = np.asarray(grad_L_xt, dtype=np.float64)
    if x_t.shape != state.prev_mean.shape or grad.shape != x_t.shape:
        raise DimensionError("x_t, gradient and previous mean must share a shape")
    corr = float(np.einsum("i,i->", (x_t - state.prev_mean).ravel(), grad.ravel()))
    return taylor_scale(state, loss + corr, loss)


def exact_scale(x_t, mu, g, C: float, log_N: float, loss: float) -> float:
    """Unclosed form ``-((x_t - mu)^T g + C + log N) / L`` for known ``g``, ``C``, ``N``."""
    d = np.asarray(x_t, dtype=np.float64) - np.asarray(mu, dtype=np.float64)
    return -(float(np.dot(d.ravel(), np.asarray(g, dtype=np.float64).ravel())) + C + log_N) / loss


def g_term(s: float, grad_L_xt) -> np.ndarray:
    return -float(s) * np.asarray(grad_L_xt, dtype=np.float64)


def guidance_shift(x0_hat, grad_x0, s: float, sched: DiffusionSchedule, t: int) -> np.ndarray:
    """Move ``x0_hat`` so the posterior mean moves by exactly ``-s * grad_x0``."""
    t = sched.check_step(t)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    grad_x0 = np.asarray(grad_x0, dtype=np.float64)
    if x0_hat.shape != grad_x0.shape:
        raise DimensionError(f"shape mismatch: {x0_hat.shape} vs {grad_x0.shape}")
    coef = s * (1.0 - sched.alpha_bar[t]) / (np.sqrt(sched.alpha_bar[t - 1]) * sched.beta[t])
    return x0_hat - coef * grad_x0
