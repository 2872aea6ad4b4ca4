"""Trend experiments: the empirically checkable content of the bounds.

Absolute levels carry unknown constants, so these experiments verify
directions and rates: forward-process concentration, loss-estimator
variance vs trajectory augmentation, trained-denoiser gap to the Bayes
oracle vs sample size, and the end-to-end KL grid against the excess-KL
calculator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import bound_excess
from .diffusion import (
    DiffusionModel,
    backward_sample,
    bayes_predictor,
    ddpm_loss,
    forward_chain,
    train_ddpm,
)
from .kl import KLConfig, kl_estimate
from .nets import TrainConfig, forward, make_net
from .rngtools import named_rng
from .schedule import NoiseSchedule


# ---------------------------------------------------------------------------
# forward-process concentration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConcentrationResult:
    xi: float
    t: int
    radius: float
    empirical: float
    floor: float  # 1 - e^{-xi}
    stderr: float
    passed: bool  # empirical >= floor - 3 stderr


def concentration_check(
    q0,
    schedule: NoiseSchedule,
    t: int,
    xi: float,
    n_draws: int = 20_000,
    seed: int = 0,
) -> ConcentrationResult:
    """Empirical P(|Z_t| <= sqrt(1-a_t)(sqrt(2 xi)+sqrt(d)+1)) vs 1-e^-xi.

    The radius formula absorbs the data term only when a_t is small
    enough (roughly a_t <= 1/(1+d)), so check late steps.
    """
    d = q0.d
    a = schedule.alpha(t)
    radius = np.sqrt(1.0 - a) * (np.sqrt(2.0 * xi) + np.sqrt(d) + 1.0)
    rng = named_rng(seed, "experiments.concentration", t, xi)
    x = q0.sample(rng, n_draws)
    z = np.sqrt(a) * x + np.sqrt(1.0 - a) * rng.standard_normal((n_draws, d))
    hits = np.linalg.norm(z, axis=1) <= radius
    p = float(np.mean(hits))
    stderr = float(np.sqrt(max(p * (1.0 - p), 1e-12) / n_draws))
    floor = 1.0 - np.exp(-xi)
    return ConcentrationResult(xi, t, float(radius), p, floor, stderr, p >= floor - 3.0 * stderr)


# ---------------------------------------------------------------------------
# loss-estimator variance vs m_z
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MzVarianceResult:
    m_z_values: tuple
    variances: tuple
    slope: float


def mz_variance_scaling(
    q0,
    schedule: NoiseSchedule,
    m_z_values: Sequence[int] = (1, 4, 16, 64),
    m: int = 64,
    repeats: int = 300,
    seed: int = 0,
    net_arch: Sequence[int] = (8,),
) -> MzVarianceResult:
    """Variance of the empirical loss across trajectory redraws at fixed x.

    Averaging over m_z independent trajectories shrinks the variance like
    1/m_z; the log-log slope is returned.
    """
    d = q0.d
    x = q0.sample(named_rng(seed, "mz.data"), m)
    nets = tuple(
        make_net((d, *net_arch, d), seed=named_rng(seed, "mz.net", t).integers(2**63))
        for t in range(schedule.T)
    )
    model = DiffusionModel(schedule, nets)
    variances = []
    for m_z in m_z_values:
        losses = [
            ddpm_loss(model, x, forward_chain(x, schedule, named_rng(seed, "mz.traj", m_z, r), m_z=m_z))
            for r in range(repeats)
        ]
        variances.append(float(np.var(losses, ddof=1)))
    slope = float(
        np.polyfit(np.log(np.asarray(m_z_values, dtype=float)), np.log(variances), 1)[0]
    )
    return MzVarianceResult(tuple(m_z_values), tuple(variances), slope)


# ---------------------------------------------------------------------------
# trained denoiser vs Bayes oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleGapResult:
    m_values: tuple
    gaps: tuple  # median over seeds of the mean squared gap, per m


def oracle_gap_experiment(
    q0,
    schedule: NoiseSchedule,
    m_values: Sequence[int],
    seeds: Sequence[int],
    net_arch: Sequence[int] = (32, 32),
    train_steps: int = 1500,
    step_size: float = 0.05,
    batch_size: int = 64,
    z_quantile: float = 0.95,
    grid_size: int = 64,
) -> OracleGapResult:
    """Mean squared gap between trained denoisers and the Bayes predictor.

    Evaluated on a z-grid covering the central ``z_quantile`` region of
    each forward marginal, averaged over steps t >= 2, median over seeds.
    """
    if q0.d != 1:
        raise ValueError("the oracle-gap experiment is wired for d = 1")
    gaps_per_m = []
    for m in m_values:
        per_seed = []
        for seed in seeds:
            cfg = TrainConfig(step_size=step_size, steps=train_steps, batch_size=batch_size, seed=seed)
            model, _ = train_ddpm(q0, schedule, net_arch, m, cfg)
            acc = []
            for t in range(2, schedule.T + 1):
                a = schedule.alpha(t)
                # central region of z_t = sqrt(a) x + sqrt(1-a) eps, |x|<=1
                half = np.sqrt(a) + np.sqrt(1.0 - a) * np.sqrt(2.0) * _erfinv(z_quantile)
                zg = np.linspace(-half, half, grid_size)[:, None]
                oracle = bayes_predictor(q0, schedule, t, zg)
                pred = forward(model.denoiser(t), zg)
                acc.append(float(np.mean((pred - oracle) ** 2)))
            per_seed.append(float(np.mean(acc)))
        gaps_per_m.append(float(np.median(per_seed)))
    return OracleGapResult(tuple(m_values), tuple(gaps_per_m))


def _erfinv(p: float) -> float:
    from scipy.special import erfinv

    return float(erfinv(p))


# ---------------------------------------------------------------------------
# end-to-end risk decomposition grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecompositionCell:
    n: int
    m: int
    kl_median: float
    kl_per_seed: tuple
    bound_value: float


@dataclass(frozen=True)
class DecompositionResult:
    cells: tuple
    monotone_in_grid: bool  # KL at (max n, max m) <= KL at (min n, min m)


def risk_decomposition_experiment(
    q0,
    schedule: NoiseSchedule,
    n_grid: Sequence[int],
    m_grid: Sequence[int],
    seeds: Sequence[int],
    delta: float = 0.05,
    train_steps: int = 1500,
    step_size: float = 0.05,
    batch_size: int = 64,
    n_eval_samples: int = 10_000,
    kl_cfg: KLConfig | None = None,
) -> DecompositionResult:
    """Train a DDPM per (n, m) cell, estimate D_KL(q0 || sampled), tabulate.

    The width parameter n doubles as the hidden width of the denoisers;
    the excess-KL calculator value is attached per cell for comparison.
    """
    if not n_grid or not m_grid:
        raise ValueError("grids must be nonempty")
    cells = []
    for n in n_grid:
        for m in m_grid:
            per_seed = []
            for seed in seeds:
                # wider nets need smaller SGD steps to stay stable
                lr = step_size * min(1.0, 16.0 / n)
                cfg = TrainConfig(step_size=lr, steps=train_steps, batch_size=batch_size, seed=seed)
                model, _ = train_ddpm(q0, schedule, (n, n), m, cfg)
                samples = backward_sample(
                    model, n_eval_samples, named_rng(seed, "decomp.sample", n, m)
                )
                rep = kl_estimate(q0, samples, "quadrature_kde", kl_cfg)
                per_seed.append(rep.estimate)
            bound = bound_excess(n, schedule.T, q0.d, delta).value
            cells.append(
                DecompositionCell(n, m, float(np.median(per_seed)), tuple(per_seed), bound)
            )
    lookup = {(c.n, c.m): c.kl_median for c in cells}
    mono = lookup[(max(n_grid), max(m_grid))] <= lookup[(min(n_grid), min(m_grid))]
    return DecompositionResult(tuple(cells), mono)
