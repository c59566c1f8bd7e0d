"""Noise schedule and the closed-form DDPM coefficients derived from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError, StepError


@dataclass(frozen=True, eq=False)
class DiffusionSchedule:
    """Tables ``beta``, ``alpha``, ``alpha_bar`` and ``beta_tilde``.

    Every table has length ``T + 1`` and is indexed directly by the
    diffusion step ``t``.  Index 0 holds the conventional boundary values
    (``beta[0] = 0``, ``alpha_bar[0] = 1``) so that ``alpha_bar[t - 1]`` is
    valid for every ``t >= 1``.
    """

    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    beta_tilde: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta) - 1

    @classmethod
    def from_betas(cls, betas) -> "DiffusionSchedule":
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ConfigurationError("betas must be a non-empty 1-D sequence")
        if not np.all((betas > 0) & (betas < 1)):
            raise ConfigurationError("every beta must lie in (0, 1)")
        beta = np.concatenate([[0.0], betas])
        alpha = 1.0 - beta
        alpha_bar = np.cumprod(alpha)
        beta_tilde = np.zeros_like(beta)
        beta_tilde[1:] = (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:]) * beta[1:]
        for arr in (beta, alpha, alpha_bar, beta_tilde):
            arr.setflags(write=False)
        return cls(beta, alpha, alpha_bar, beta_tilde)

    def check_step(self, t: int) -> int:
        t = int(t)
        if not 1 <= t <= self.T:
            raise StepError(f"step t={t} outside 1..{self.T}")
        return t

    def posterior_coefficients(self, t: int) -> tuple[float, float]:
        """Weights of ``x0_hat`` and ``x_t`` in the posterior mean at step ``t``."""
        t = self.check_step(t)
        ab, ab_prev = self.alpha_bar[t], self.alpha_bar[t - 1]
        c0 = np.sqrt(ab_prev) * self.beta[t] / (1.0 - ab)
        ct = np.sqrt(self.alpha[t]) * (1.0 - ab_prev) / (1.0 - ab)
        return float(c0), float(ct)


def make_linear_schedule(T: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    if int(T) != T or T < 2:
        raise ConfigurationError(f"T must be an integer >= 2, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ConfigurationError(
            f"need 0 < beta_start <= beta_end < 1, got beta_start={beta_start}, beta_end={beta_end}"
        )
    return DiffusionSchedule.from_betas(np.linspace(beta_start, beta_end, int(T)))


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")


def forward_sample(sched: DiffusionSchedule, x0, t: int, eps) -> np.ndarray:
    """Draw ``x_t`` from ``q(x_t | x_0)`` given the noise realisation ``eps``."""
    t = sched.check_step(t)
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    _check_pair(x0, eps)
    ab = sched.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def predict_x0(sched: DiffusionSchedule, x_t, eps_hat, t: int) -> np.ndarray:
    """Invert :func:`forward_sample` using a predicted noise ``eps_hat``."""
    t = sched.check_step(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    eps_hat = np.asarray(eps_hat, dtype=np.float64)
    _check_pair(x_t, eps_hat)
    ab = sched.alpha_bar[t]
    return x_t / np.sqrt(ab) - np.sqrt(1.0 - ab) * eps_hat / np.sqrt(ab)


def posterior_params(sched: DiffusionSchedule, x0_hat, x_t, t: int) -> tuple[np.ndarray, float]:
    """Mean and variance of ``q(x_{t-1} | x_t, x0_hat)``.

    At ``t = 1`` the chain terminates: the mean is ``x0_hat`` itself and the
    variance is zero.
    """
    t = sched.check_step(t)
    x0_hat = np.asarray(x0_hat, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    _check_pair(x0_hat, x_t)
    if t == 1:
        return x0_hat.copy(), 0.0
    c0, ct = sched.posterior_coefficients(t)
    return c0 * x0_hat + ct * x_t, float(sched.beta_tilde[t])
