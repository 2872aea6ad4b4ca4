"""Desk-scale DDPM: forward process, Bayes oracle, training, sampling.

One independent denoiser per timestep (that is the literal model family
analyzed here; no time embedding).  Trajectories are pre-generated and
frozen per training run, matching the empirical objective; a flag enables
re-noising.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .nets import SignReluNet, SquaredError, TrainConfig, forward, from_text, make_net, to_text, train
from .quadrature import tensor_gauss_legendre
from .rngtools import named_rng
from .schedule import NoiseSchedule, make_schedule


# ---------------------------------------------------------------------------
# forward process
# ---------------------------------------------------------------------------


def forward_sample(x, t: int, schedule: NoiseSchedule, rng) -> np.ndarray:
    """Draw z_t | x from the closed-form marginal N(sqrt(a_t) x, (1-a_t) I)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    a = schedule.alpha(t)
    eps = rng.standard_normal(x.shape)
    return np.sqrt(a) * x + np.sqrt(1.0 - a) * eps


def forward_chain(x, schedule: NoiseSchedule, rng, m_z: int = 1) -> np.ndarray:
    """Markov chains z_t = sqrt(1-b_t) z_{t-1} + sqrt(b_t) W_t.

    Returns an array of shape (m, m_z, T+1, d) whose [:, :, 0] level is
    the start x itself; marginally each z_t matches ``forward_sample``.
    """
    if m_z < 1:
        raise ValueError("m_z must be >= 1")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, d = x.shape
    out = np.empty((m, m_z, schedule.T + 1, d))
    out[:, :, 0] = x[:, None, :]
    for t in range(1, schedule.T + 1):
        b = schedule.beta(t)
        noise = rng.standard_normal((m, m_z, d))
        out[:, :, t] = np.sqrt(1.0 - b) * out[:, :, t - 1] + np.sqrt(b) * noise
    return out


# ---------------------------------------------------------------------------
# Bayes predictor
# ---------------------------------------------------------------------------


def ab_coefficients(schedule: NoiseSchedule, t: int) -> tuple:
    """Coefficients of the reverse-step posterior mean A z_t + B E[x|z_t]."""
    a_t = schedule.alpha(t)
    a_prev = schedule.alpha_prev(t)
    b_t = schedule.beta(t)
    A = (1.0 - a_prev) * np.sqrt(1.0 - b_t) / (1.0 - a_t)
    B = np.sqrt(a_prev) * b_t / (1.0 - a_t)
    return float(A), float(B)


def posterior_mean_quadrature(q0, schedule: NoiseSchedule, t: int, z, order: int | None = None):
    """E[x | z_t] by quadrature of q0(x) q(z_t|x) over the box."""
    Z = np.atleast_2d(np.asarray(z, dtype=float))
    a = schedule.alpha(t)
    s2 = 1.0 - a
    pts, wts = tensor_gauss_legendre(q0.d, order)
    dens = q0.density(pts) * wts  # (Nq,)
    # kernel exp(-|z - sqrt(a) x|^2 / (2 s2)) evaluated for all (z, x)
    d2 = np.sum((Z[:, None, :] - np.sqrt(a) * pts[None, :, :]) ** 2, axis=2)
    d2 -= d2.min(axis=1, keepdims=True)  # common factor cancels in the ratio
    K = np.exp(-0.5 * d2 / s2)
    denom = K @ dens
    numer = K @ (dens[:, None] * pts)
    return numer / denom[:, None]


def posterior_mean_gaussian(schedule: NoiseSchedule, t: int, z, s: float):
    """Closed form E[x | z_t] for an untruncated N(0, s^2 I) start."""
    Z = np.atleast_2d(np.asarray(z, dtype=float))
    a = schedule.alpha(t)
    return np.sqrt(a) * s**2 / (a * s**2 + 1.0 - a) * Z


def bayes_predictor(
    q0,
    schedule: NoiseSchedule,
    t: int,
    z,
    method: str = "quadrature",
    gaussian_scale: Optional[float] = None,
    order: int | None = None,
) -> np.ndarray:
    """Posterior-mean reverse-step target f(z_t) = A z_t + B E[x|z_t].

    Defined for 2 <= t <= T; the t=1 reverse step regresses on x directly
    in the training objective and has no such predictor.
    """
    if t < 2:
        raise ValueError("the reverse-step predictor is defined for t >= 2")
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    Z = np.atleast_2d(z)
    A, B = ab_coefficients(schedule, t)
    if method == "quadrature":
        mean = posterior_mean_quadrature(q0, schedule, t, Z, order=order)
    elif method == "gaussian":
        if gaussian_scale is None:
            raise ValueError("gaussian method needs gaussian_scale")
        mean = posterior_mean_gaussian(schedule, t, Z, gaussian_scale)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = A * Z + B * mean
    return out[0] if single else out


# ---------------------------------------------------------------------------
# model and loss
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiffusionModel:
    """Noise schedule plus one denoiser net per timestep (index t-1)."""

    schedule: NoiseSchedule
    denoisers: tuple
    width_budget: Optional[dict] = None  # recorded (W, L, M) family budget

    def __post_init__(self):
        if len(self.denoisers) != self.schedule.T:
            raise ValueError("need exactly one denoiser per timestep")
        dims = {(n.input_dim, n.output_dim) for n in self.denoisers}
        if len(dims) != 1:
            raise ValueError("denoisers must share input/output dimension")

    @property
    def d(self) -> int:
        return self.denoisers[0].input_dim

    def denoiser(self, t: int) -> SignReluNet:
        if not 1 <= t <= self.schedule.T:
            raise ValueError(f"t={t} outside 1..{self.schedule.T}")
        return self.denoisers[t - 1]


def ddpm_loss(model: DiffusionModel, x, trajectories) -> float:
    """Empirical objective: weighted squared reverse-step residuals.

    ``trajectories`` has shape (m, m_z, T+1, d) as produced by
    :func:`forward_chain` (level 0 is x itself); terms are averaged over
    the trajectory index.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    traj = np.asarray(trajectories, dtype=float)
    if traj.ndim != 4 or traj.shape[2] != model.schedule.T + 1:
        raise ValueError(
            f"trajectories must have shape (m, m_z, T+1, d) with T={model.schedule.T}"
        )
    m, m_z = traj.shape[0], traj.shape[1]
    total = 0.0
    for t in range(1, model.schedule.T + 1):
        phi = model.denoiser(t)
        z_t = traj[:, :, t].reshape(m * m_z, -1)
        target = x[:, None, :].repeat(m_z, axis=1).reshape(m * m_z, -1) if t == 1 else traj[
            :, :, t - 1
        ].reshape(m * m_z, -1)
        resid = forward(phi, z_t) - target
        sp = model.schedule.sigma_p[t - 1]
        total += float(np.mean(np.sum(resid**2, axis=1))) / (2.0 * sp**2)
    return total


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def train_ddpm(
    q0,
    schedule: NoiseSchedule,
    net_arch: Sequence[int],
    m: int,
    cfg: TrainConfig,
    m_z: int = 1,
    renoise: bool = False,
) -> tuple:
    """Draw m samples from q0, freeze forward chains, fit each denoiser.

    ``net_arch`` lists hidden widths (e.g. (32, 32)).  Each step network
    is trained independently on its own regression; returns
    (DiffusionModel, per-step loss traces).  ``renoise=True`` redraws the
    trajectories once per step network instead of freezing one set.
    """
    if m < 1:
        raise ValueError("need m >= 1 training samples")
    d = q0.d
    rng = named_rng(cfg.seed, "ddpm.data")
    x = q0.sample(rng, m)
    traj = forward_chain(x, schedule, named_rng(cfg.seed, "ddpm.chains"), m_z=m_z)
    nets = []
    traces = []
    for t in range(1, schedule.T + 1):
        if renoise and t > 1:
            traj = forward_chain(x, schedule, named_rng(cfg.seed, "ddpm.chains", t), m_z=m_z)
        m_zc = traj.shape[1]
        inputs = traj[:, :, t].reshape(m * m_zc, d)
        targets = (
            np.repeat(x, m_zc, axis=0) if t == 1 else traj[:, :, t - 1].reshape(m * m_zc, d)
        )
        net = make_net((d, *net_arch, d), seed=named_rng(cfg.seed, "ddpm.init", t).integers(2**63))
        sp = schedule.sigma_p[t - 1]
        loss = SquaredError(scale=0.5 / sp**2)
        step_cfg = TrainConfig(
            step_size=cfg.step_size * sp**2,  # keep the effective step scale-free
            steps=cfg.steps,
            batch_size=cfg.batch_size,
            seed=named_rng(cfg.seed, "ddpm.sgd", t).integers(2**63),
            clip_bound=cfg.clip_bound,
            momentum=cfg.momentum,
        )
        net, trace = train(net, inputs, targets, step_cfg, loss=loss)
        nets.append(net)
        traces.append(trace)
    budget_n = max(net_arch) if net_arch else 0
    model = DiffusionModel(
        schedule,
        tuple(nets),
        width_budget={"W": budget_n + 9 * d, "L": 7, "n": budget_n, "d": d},
    )
    return model, traces


# ---------------------------------------------------------------------------
# backward process
# ---------------------------------------------------------------------------


def backward_sample(
    model: DiffusionModel,
    n_samples: int,
    rng,
    deterministic: bool = False,
) -> np.ndarray:
    """Run the learned reverse chain from z_T ~ N(0, I).

    Transitions are Gaussian with deviation sigma_p (the deterministic
    variant skips the noise); outputs with sup-norm >= 2 are reset to 0.
    """
    d = model.d
    z = rng.standard_normal((n_samples, d))
    for t in range(model.schedule.T, 0, -1):
        z = forward(model.denoiser(t), z)
        if not deterministic:
            z = z + model.schedule.sigma_p[t - 1] * rng.standard_normal((n_samples, d))
    out = np.where(np.max(np.abs(z), axis=1, keepdims=True) >= 2.0, 0.0, z)
    return out


# ---------------------------------------------------------------------------
# checkpoints: schedule block + per-step nets in the flat text format
# ---------------------------------------------------------------------------

_CKPT_MAGIC = "ddpm-checkpoint v1"


def save_model(model: DiffusionModel, path) -> None:
    sch = model.schedule
    lines = [_CKPT_MAGIC, f"T {sch.T}"]
    for name in ("betas", "alphas", "sigma_q", "sigma_p"):
        lines.append(name + " " + " ".join(repr(v) for v in getattr(sch, name)))
    blob = "\n".join(lines) + "\n"
    for net in model.denoisers:
        blob += "---net---\n" + to_text(net)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(blob)


def load_model(path) -> DiffusionModel:
    with open(path, "r", encoding="utf-8") as fh:
        blob = fh.read()
    head, *net_blocks = blob.split("---net---\n")
    lines = [ln for ln in head.splitlines() if ln.strip()]
    if lines[0] != _CKPT_MAGIC:
        raise ValueError("not a DDPM checkpoint")
    T = int(lines[1].split()[1])
    arrays = {}
    for ln in lines[2:]:
        name, *vals = ln.split()
        arrays[name] = np.array([float(v) for v in vals])
    sch = NoiseSchedule(T, arrays["betas"], arrays["alphas"], arrays["sigma_q"], arrays["sigma_p"])
    nets = tuple(from_text(b) for b in net_blocks)
    return DiffusionModel(sch, nets)
