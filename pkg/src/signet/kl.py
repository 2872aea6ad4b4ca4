"""KL divergence estimation and the terminal-step divergence check.

The artifact needs a desk-scale estimate of D_KL(q0 || p) from samples of
p: a Gaussian KDE plug-in with a density floor, evaluated either on the
quadrature grid (d <= 2) or by fresh Monte-Carlo draws from q0.  The KDE
bias is calibrated in the acceptance suite rather than assumed away.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .quadrature import tensor_gauss_legendre
from .rngtools import named_rng
from .schedule import NoiseSchedule

_SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class KLConfig:
    bandwidth_factor: float = 1.0  # multiplies Silverman's rule
    density_floor: float = 1e-12
    quad_order: Optional[int] = None
    mc_draws: int = 10_000
    mc_batches: int = 10
    seed: int = 0


@dataclass(frozen=True)
class KLReport:
    estimate: float
    method: str
    stderr: float
    n_samples: int
    bandwidth: float


class GaussianKDE:
    """Product-kernel Gaussian KDE with Silverman bandwidth."""

    def __init__(self, samples: np.ndarray, bandwidth_factor: float = 1.0):
        X = np.atleast_2d(np.asarray(samples, dtype=float))
        if X.ndim != 2:
            raise ValueError("samples must be (n, d)")
        self.X = X
        n, d = X.shape
        sigma = np.std(X, axis=0, ddof=1)
        sigma = np.maximum(sigma, 1e-12)
        silverman = (4.0 / (d + 2.0)) ** (1.0 / (d + 4.0)) * n ** (-1.0 / (d + 4.0))
        self.h = bandwidth_factor * silverman * sigma  # per-axis
        self.bandwidth = float(np.mean(self.h))

    def __call__(self, pts) -> np.ndarray:
        P = np.atleast_2d(np.asarray(pts, dtype=float))
        n = self.X.shape[0]
        out = np.zeros(P.shape[0])
        # chunk over evaluation points to bound memory
        step = max(1, int(2e7 // max(n, 1)))
        for s in range(0, P.shape[0], step):
            blk = P[s : s + step]
            z = (blk[:, None, :] - self.X[None, :, :]) / self.h
            k = np.exp(-0.5 * np.sum(z**2, axis=2))
            out[s : s + step] = k.sum(axis=1)
        norm = n * float(np.prod(self.h)) * _SQRT2PI ** self.X.shape[1]
        return out / norm


def kl_estimate(q0, samples, method: str = "quadrature_kde", cfg: KLConfig | None = None) -> KLReport:
    """Estimate D_KL(q0 || law(samples)) via a floored KDE plug-in.

    ``quadrature_kde`` integrates q0 log(q0/kde) on the quadrature grid
    (d <= 2); ``mc_plugin`` averages log(q0/kde) over fresh q0 draws with
    a batched standard error.
    """
    cfg = cfg or KLConfig()
    X = np.atleast_2d(np.asarray(samples, dtype=float))
    if X.shape[0] < 100:
        raise ValueError(f"need at least 100 samples, got {X.shape[0]}")
    if X.shape[1] != q0.d:
        raise ValueError("sample dimension does not match the target")
    kde = GaussianKDE(X, cfg.bandwidth_factor)
    floor = cfg.density_floor
    if method == "quadrature_kde":
        if q0.d > 2:
            raise ValueError("quadrature_kde supports d <= 2")
        pts, wts = tensor_gauss_legendre(q0.d, cfg.quad_order)
        qv = q0.density(pts)
        pv = np.maximum(kde(pts), floor)
        mask = qv > 0
        est = float(np.sum(wts[mask] * qv[mask] * np.log(qv[mask] / pv[mask])))
        # stderr from splitting the sample set into KDE halves
        half = X.shape[0] // 2
        ests = []
        for part in (X[:half], X[half:]):
            pk = np.maximum(GaussianKDE(part, cfg.bandwidth_factor)(pts), floor)
            ests.append(float(np.sum(wts[mask] * qv[mask] * np.log(qv[mask] / pk[mask]))))
        stderr = float(np.abs(ests[0] - ests[1]) / 2.0)
        return KLReport(est, method, stderr, X.shape[0], kde.bandwidth)
    if method == "mc_plugin":
        rng = named_rng(cfg.seed, "kl.mc_plugin")
        draws = q0.sample(rng, cfg.mc_draws)
        qv = q0.density(draws)
        pv = np.maximum(kde(draws), floor)
        vals = np.log(qv / pv)
        batches = np.array_split(vals, cfg.mc_batches)
        bmeans = np.array([np.mean(b) for b in batches])
        est = float(np.mean(vals))
        stderr = float(np.std(bmeans, ddof=1) / np.sqrt(len(bmeans)))
        return KLReport(est, method, stderr, X.shape[0], kde.bandwidth)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# terminal-step KL: q(z_T | x) against the forward marginal q_T
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TerminalKLReport:
    estimate: float
    stderr: float
    bound: float
    passed: bool


def terminal_kl_bound(d: int, alpha_T: float) -> float:
    """Closed-form terminal bound (5/2) d alpha_T / (1 - alpha_T)."""
    return 2.5 * d * alpha_T / (1.0 - alpha_T)


def kl_terminal_check(
    q0,
    schedule: NoiseSchedule,
    x,
    mc_n: int = 20_000,
    seed: int = 0,
    order: int | None = None,
) -> TerminalKLReport:
    """Monte-Carlo estimate of D_KL(q(z_T|x) || q_T) against the bound.

    q_T is the quadrature mixture of the forward kernels over q0; the
    check passes when estimate <= bound + 3 stderr.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) > 1):
        raise ValueError("x must lie in the box")
    d = q0.d
    a = schedule.alpha(schedule.T)
    s2 = 1.0 - a
    rng = named_rng(seed, "kl.terminal")
    z = np.sqrt(a) * x + np.sqrt(s2) * rng.standard_normal((mc_n, d))
    # log q(z|x)
    log_cond = -0.5 * np.sum((z - np.sqrt(a) * x) ** 2, axis=1) / s2 - 0.5 * d * np.log(
        2.0 * np.pi * s2
    )
    # log q_T(z) by quadrature over q0
    pts, wts = tensor_gauss_legendre(d, order)
    dens = q0.density(pts) * wts
    d2 = np.sum((z[:, None, :] - np.sqrt(a) * pts[None, :, :]) ** 2, axis=2)
    base = d2.min(axis=1)
    mix = np.log(np.exp(-0.5 * (d2 - base[:, None]) / s2) @ dens) - 0.5 * base / s2
    log_marg = mix - 0.5 * d * np.log(2.0 * np.pi * s2)
    vals = log_cond - log_marg
    est = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / np.sqrt(mc_n))
    bound = terminal_kl_bound(d, a)
    return TerminalKLReport(est, stderr, bound, est <= bound + 3.0 * stderr)
