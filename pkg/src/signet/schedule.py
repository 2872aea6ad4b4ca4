"""Forward-process noise schedules.

``alphas[t]`` is the cumulative product of (1 - beta_s) up to step t (the
literal per-step product would be constant in t and contradict the pure
noise limit), ``sigma_q`` the forward marginal deviation, and ``sigma_p``
the reverse-transition deviation.  By default ``sigma_p`` matches the
exact forward-posterior variance beta_t (1-alpha_{t-1})/(1-alpha_t); the
t=1 posterior variance degenerates to zero, so beta_1 is used there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSchedule:
    """Arrays indexed 0..T-1 for steps t = 1..T."""

    T: int
    betas: np.ndarray
    alphas: np.ndarray
    sigma_q: np.ndarray
    sigma_p: np.ndarray

    def __post_init__(self):
        for name in ("betas", "alphas", "sigma_q", "sigma_p"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (len(self.betas) == len(self.alphas) == len(self.sigma_q) == len(self.sigma_p) == self.T):
            raise ValueError("schedule arrays must all have length T")
        if np.any((self.betas <= 0) | (self.betas >= 1)):
            raise ValueError("betas must lie in (0,1)")
        if np.any(np.diff(self.alphas) >= 0):
            raise ValueError("alphas must be strictly decreasing")
        if np.any((self.alphas <= 0) | (self.alphas >= 1)):
            raise ValueError("alphas must lie in (0,1)")
        if np.any(self.sigma_q**2 + self.alphas > 1 + 1e-12):
            raise ValueError("sigma_q^2 + alpha exceeds 1")
        if np.any(self.sigma_p <= 0):
            raise ValueError("sigma_p must be positive")

    def alpha(self, t: int) -> float:
        return float(self.alphas[self._check(t)])

    def beta(self, t: int) -> float:
        return float(self.betas[self._check(t)])

    def alpha_prev(self, t: int) -> float:
        """Cumulative alpha at t-1, with the convention alpha_0 = 1."""
        i = self._check(t)
        return float(self.alphas[i - 1]) if i > 0 else 1.0

    def _check(self, t: int) -> int:
        if not 1 <= t <= self.T:
            raise ValueError(f"step t={t} outside 1..{self.T}")
        return t - 1


def make_schedule(T: int, scheme: str, *args, sigma_p: np.ndarray | None = None) -> NoiseSchedule:
    """Build a schedule: ``("constant", beta)`` or ``("linear", lo, hi)``."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if scheme == "constant":
        (beta,) = args
        betas = np.full(T, float(beta))
    elif scheme == "linear":
        lo, hi = args
        betas = np.linspace(float(lo), float(hi), T)
    else:
        raise ValueError(f"unknown scheme {scheme!r}; use 'constant' or 'linear'")
    if np.any((betas <= 0) | (betas >= 1)):
        raise ValueError("betas must lie in (0,1)")
    alphas = np.cumprod(1.0 - betas)
    sigma_q = np.sqrt(1.0 - alphas)
    if sigma_p is None:
        prev = np.concatenate([[1.0], alphas[:-1]])
        var = betas * (1.0 - prev) / (1.0 - alphas)
        var[0] = betas[0]  # the t=1 posterior variance is degenerate
        sigma_p = np.sqrt(var)
    return NoiseSchedule(T, betas, alphas, sigma_q, np.asarray(sigma_p, dtype=float))
