"""Noise-schedule algebra for denoising diffusion.

Timesteps run ``t = 0 .. T`` with ``t = 0`` the clean data, so
``alpha_bar(0) == 1`` and ``alpha(t)`` is defined for ``t >= 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from mixmotion.errors import InvalidInputError

SD15_STEPS = 1000
SD15_BETA_START = 1e-4
SD15_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    alphas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def num_steps(self) -> int:
        return len(self.alphas)

    def _check(self, t: int, allow_zero: bool) -> int:
        t = int(t)
        lo = 0 if allow_zero else 1
        if not lo <= t <= self.num_steps:
            raise InvalidInputError(f"timestep {t} outside [{lo}, {self.num_steps}]")
        return t

    def alpha(self, t: int) -> float:
        return float(self.alphas[self._check(t, False) - 1])

    def alpha_bar(self, t: int) -> float:
        t = self._check(t, True)
        return 1.0 if t == 0 else float(self.alpha_bars[t - 1])


def make_schedule(T: int = SD15_STEPS, beta_start: float = SD15_BETA_START, beta_end: float = SD15_BETA_END) -> NoiseSchedule:
    """Linear beta schedule; ``alpha_bars[t-1]`` is the product of ``alphas[:t]``."""
    if T < 1:
        raise InvalidInputError("T must be >= 1")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise InvalidInputError("need 0 < beta_start <= beta_end < 1")
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alphas = 1.0 - betas
    return NoiseSchedule(alphas, np.cumprod(alphas))


def _same_shape(a, b, what: str):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInputError(f"{what}: shapes {a.shape} and {b.shape} differ")
    return a, b


def q_sample_step(x_prev, t: int, noise, sched: NoiseSchedule) -> np.ndarray:
    """One forward Markov step ``x_{t-1} -> x_t``."""
    x_prev, noise = _same_shape(x_prev, noise, "q_sample_step")
    a = sched.alpha(t)
    return np.sqrt(a) * x_prev + np.sqrt(1.0 - a) * noise


def q_sample_closed(x0, t: int, noise, sched: NoiseSchedule) -> np.ndarray:
    """Jump straight from ``x_0`` to ``x_t``."""
    x0, noise = _same_shape(x0, noise, "q_sample_closed")
    ab = sched.alpha_bar(t)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise


def simple_loss(eps, eps_pred) -> float:
    eps, eps_pred = _same_shape(eps, eps_pred, "simple_loss")
    d = eps - eps_pred
    return float(np.mean(d * d))


def predict_x0(x_t, eps_pred, t: int, sched: NoiseSchedule) -> np.ndarray:
    x_t, eps_pred = _same_shape(x_t, eps_pred, "predict_x0")
    ab = sched.alpha_bar(t)
    return (x_t - np.sqrt(1.0 - ab) * eps_pred) / np.sqrt(ab)


def ddim_step(x_t, eps_pred, t: int, t_prev: int, sched: NoiseSchedule, eta: float = 0.0) -> np.ndarray:
    """Deterministic DDIM update from ``t`` down to ``t_prev``."""
    if eta != 0.0:
        raise InvalidInputError("only deterministic DDIM (eta = 0) is supported")
    if not int(t) > int(t_prev) >= 0:
        raise InvalidInputError(f"DDIM needs t > t_prev >= 0, got t={t}, t_prev={t_prev}")
    x0_hat = predict_x0(x_t, eps_pred, t, sched)
    ab_prev = sched.alpha_bar(t_prev)
    return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * np.asarray(eps_pred, dtype=np.float64)


def ddim_timesteps(T: int, steps: int) -> list[int]:
    """Uniformly spaced descending timesteps ``T, T - T/steps, ..., 0``."""
    if not 1 <= steps <= T:
        raise InvalidInputError("need 1 <= steps <= T")
    return [int(round(T - i * T / steps)) for i in range(steps + 1)]
