"""SignReLU feedforward networks.

Implements the network class used throughout: stacks of affine maps with
the SignReLU activation

    sigma(x) = x            for x > 0
    sigma(x) = a*x/(1+|x|)  for x <= 0,   a > 0 tunable,

plus parameter-norm accounting (two variants, see :func:`param_norm`),
exact reverse-mode gradients, seeded mini-batch SGD, and a plain-text
serialization with full round-trip precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .rngtools import named_rng


class ShapeError(ValueError):
    """Input dimensions do not chain with the network's layers."""


class NumericError(FloatingPointError):
    """A non-finite value appeared where finite numbers are required."""


class TrainingDivergence(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"training diverged at step {step}")


# ---------------------------------------------------------------------------
# activation
# ---------------------------------------------------------------------------


def signrelu(x, alpha: float = 1.0):
    """SignReLU activation, elementwise.

    Identity on the positive branch, ``alpha*x/(1+|x|)`` on the
    non-positive branch; continuous at 0.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NumericError("signrelu input must be finite")
    return np.where(x > 0, x, alpha * x / (1.0 + np.abs(x)))


def signrelu_prime(x, alpha: float = 1.0):
    """Derivative of SignReLU.

    1 on the positive branch, ``alpha/(1+|x|)^2`` on the negative branch.
    At x = 0 the left-branch value ``alpha`` is used (documented
    convention; deterministic and subgradient-consistent).
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, 1.0, alpha / (1.0 + np.abs(x)) ** 2)


# ---------------------------------------------------------------------------
# network container
# ---------------------------------------------------------------------------


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SignReluNet:
    """Immutable stack of affine layers with SignReLU between them.

    ``weights[i]`` has shape (d_out, d_in); activation is applied after
    every affine map except the final one, unless ``activate_output``.
    ``output_clip``, when set, radially projects outputs onto the ball of
    that radius at evaluation time (the bounded-output modification).
    """

    weights: tuple
    biases: tuple
    alpha: float = 1.0
    activate_output: bool = False
    output_clip: Optional[float] = None

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need equally many weight matrices and bias vectors")
        ws = tuple(_freeze(np.atleast_2d(w)) for w in self.weights)
        bs = tuple(_freeze(np.atleast_1d(b)) for b in self.biases)
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight rows {w.shape[0]} != bias size {b.shape[0]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError(f"layer {i}: non-finite parameters")
            if i > 0 and w.shape[1] != ws[i - 1].shape[0]:
                raise ShapeError(
                    f"layer {i}: expects {w.shape[1]} inputs, previous layer emits {ws[i - 1].shape[0]}"
                )
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    # structural accounting ------------------------------------------------
    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def depth(self) -> int:
        """Number of hidden layers (= activation applications)."""
        return len(self.weights) - 1 + (1 if self.activate_output else 0)

    @property
    def width(self) -> int:
        """Maximum hidden-layer width; 0 for a purely affine net."""
        hidden = self.weights[:-1] if not self.activate_output else self.weights
        return max((w.shape[0] for w in hidden), default=0)

    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def n_params_nonzero(self) -> int:
        return sum(
            int(np.count_nonzero(w)) + int(np.count_nonzero(b))
            for w, b in zip(self.weights, self.biases)
        )

    def __call__(self, x):
        return forward(self, x)


def forward(net: SignReluNet, x, clip: object = "net") -> np.ndarray:
    """Evaluate the network on ``x`` (a vector or a batch of rows).

    ``clip="net"`` uses the network's own ``output_clip``; pass ``None``
    to disable projection or a float to override the radius.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    h = np.atleast_2d(x)
    if h.shape[1] != net.input_dim:
        raise ShapeError(f"input has {h.shape[1]} features, net expects {net.input_dim}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if i < last or net.activate_output:
            h = signrelu(h, net.alpha)
    radius = net.output_clip if clip == "net" else clip
    if radius is not None:
        norms = np.linalg.norm(h, axis=1, keepdims=True)
        scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
        h = h * scale
    return h[0] if single else h


# ---------------------------------------------------------------------------
# parameter norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamNormReport:
    """Two parameter-norm readings of the same network.

    ``eq1_*``  : per-layer max-abs entry of the stacked [A|b], combined as
                 (final layer) * prod over earlier layers of max(entry, 1).
    ``cover_*``: per-layer max of {column l1 norms of A, linf of b},
                 multiplied across layers (the covering-bound variant).
    """

    per_layer: tuple
    eq1_total: float
    cover_total: float


def param_norm(net: SignReluNet) -> ParamNormReport:
    per_layer = []
    for w, b in zip(net.weights, net.biases):
        eq1 = max(float(np.max(np.abs(w))), float(np.max(np.abs(b))))
        cover = max(float(np.max(np.sum(np.abs(w), axis=0))), float(np.max(np.abs(b))))
        per_layer.append((eq1, cover))
    eq1_total = per_layer[-1][0]
    for eq1, _ in per_layer[:-1]:
        eq1_total *= max(eq1, 1.0)
    cover_total = 1.0
    for _, cov in per_layer:
        cover_total *= cov
    return ParamNormReport(tuple(per_layer), eq1_total, cover_total)


# ---------------------------------------------------------------------------
# losses and gradients
# ---------------------------------------------------------------------------


class SquaredError:
    """Mean over the batch of squared euclidean residuals."""

    def __init__(self, scale: float = 1.0):
        self.scale = scale

    def per_sample(self, pred, target):
        return self.scale * np.sum((pred - target) ** 2, axis=-1)

    def value(self, pred, target) -> float:
        return float(np.mean(self.per_sample(pred, target)))

    def grad(self, pred, target):
        return self.scale * 2.0 * (pred - target) / pred.shape[0]


def backprop(net: SignReluNet, x, y, loss=None):
    """Exact reverse-mode gradients of the mean batch loss.

    Returns ``(loss_value, grads)`` where grads mirrors the layer
    structure as a list of (dW, db) pairs.
    """
    if loss is None:
        loss = SquaredError()
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    if x.shape[1] != net.input_dim:
        raise ShapeError(f"input has {x.shape[1]} features, net expects {net.input_dim}")

    last = len(net.weights) - 1
    h = x
    acts = [h]  # post-activation values entering each layer
    pres = []  # pre-activation values of activated layers
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        if i < last or net.activate_output:
            pres.append(z)
            h = signrelu(z, net.alpha)
        else:
            pres.append(None)
            h = z
        acts.append(h)

    per = loss.per_sample(h, y)
    if not np.all(np.isfinite(per)):
        idx = int(np.flatnonzero(~np.isfinite(per))[0])
        raise NumericError(f"non-finite loss at sample index {idx}")
    value = float(np.mean(per))

    delta = loss.grad(h, y)
    grads: list = [None] * len(net.weights)
    for i in range(last, -1, -1):
        if pres[i] is not None:
            delta = delta * signrelu_prime(pres[i], net.alpha)
        grads[i] = (delta.T @ acts[i], np.sum(delta, axis=0))
        if i > 0:
            delta = delta @ net.weights[i]
    return value, grads


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    step_size: float
    steps: int
    batch_size: int
    seed: int
    clip_bound: Optional[float] = None
    momentum: float = 0.0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def train(net: SignReluNet, x, y, cfg: TrainConfig, loss=None):
    """Seeded mini-batch SGD (optional momentum); returns (net, loss trace).

    Gradients are taken on raw network outputs; the returned net carries
    ``cfg.clip_bound`` as its evaluation-time output projection.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("training data must be nonempty")
    if cfg.steps == 0:
        out = net if cfg.clip_bound is None else replace(net, output_clip=cfg.clip_bound)
        return out, []

    rng = named_rng(cfg.seed, "nets.train", "batches")
    ws = [np.array(w) for w in net.weights]
    bs = [np.array(b) for b in net.biases]
    vel_w = [np.zeros_like(w) for w in ws]
    vel_b = [np.zeros_like(b) for b in bs]
    m = x.shape[0]
    trace = []
    work = SignReluNet(tuple(ws), tuple(bs), net.alpha, net.activate_output)
    for step in range(cfg.steps):
        idx = rng.integers(0, m, size=min(cfg.batch_size, m)) if cfg.batch_size < m else np.arange(m)
        try:
            val, grads = backprop(work, x[idx], y[idx], loss)
        except NumericError as exc:
            raise TrainingDivergence(step, f"step {step}: {exc}") from exc
        if not np.isfinite(val):
            raise TrainingDivergence(step)
        trace.append(val)
        for i, (gw, gb) in enumerate(grads):
            vel_w[i] = cfg.momentum * vel_w[i] - cfg.step_size * gw
            vel_b[i] = cfg.momentum * vel_b[i] - cfg.step_size * gb
            ws[i] = ws[i] + vel_w[i]
            bs[i] = bs[i] + vel_b[i]
        work = SignReluNet(tuple(ws), tuple(bs), net.alpha, net.activate_output)
    final = replace(work, output_clip=cfg.clip_bound)
    return final, trace


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def make_net(dims: Sequence[int], alpha: float = 1.0, seed: int = 0, scale: Optional[float] = None) -> SignReluNet:
    """Random net with layer sizes ``dims = (d_in, h1, ..., d_out)``."""
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    rng = named_rng(seed, "nets.make_net", *dims)
    ws, bs = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        s = scale if scale is not None else np.sqrt(2.0 / d_in)
        ws.append(rng.normal(0.0, s, size=(d_out, d_in)))
        bs.append(np.zeros(d_out))
    return SignReluNet(tuple(ws), tuple(bs), alpha=alpha)


def constant_net(values, d_in: int, alpha: float = 1.0) -> SignReluNet:
    """Depth-1 net that outputs ``values`` for every input."""
    values = np.atleast_1d(np.asarray(values, dtype=float))
    w0 = np.zeros((1, d_in))
    b0 = np.array([1.0])  # positive passthrough unit, sigma(1) = 1
    w1 = np.zeros((values.size, 1))
    return SignReluNet((w0, w1), (b0, values), alpha=alpha)


# ---------------------------------------------------------------------------
# serialization: flat text, full decimal round-trip via repr()
# ---------------------------------------------------------------------------

_MAGIC = "signrelu-net v1"


def to_text(net: SignReluNet) -> str:
    lines = [_MAGIC]
    lines.append(f"alpha {net.alpha!r}")
    lines.append(f"activate_output {int(net.activate_output)}")
    lines.append("output_clip " + ("none" if net.output_clip is None else repr(net.output_clip)))
    lines.append(f"layers {len(net.weights)}")
    for w, b in zip(net.weights, net.biases):
        lines.append(f"layer {w.shape[0]} {w.shape[1]}")
        lines.append("W " + " ".join(repr(v) for v in w.ravel(order="C")))
        lines.append("b " + " ".join(repr(v) for v in b))
    return "\n".join(lines) + "\n"


def from_text(text: str) -> SignReluNet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != _MAGIC:
        raise ValueError("not a serialized SignReLU network")
    fields = {}
    i = 1
    for key in ("alpha", "activate_output", "output_clip", "layers"):
        name, _, val = lines[i].partition(" ")
        if name != key:
            raise ValueError(f"expected key {key!r}, found {name!r}")
        fields[key] = val
        i += 1
    n_layers = int(fields["layers"])
    ws, bs = [], []
    for _ in range(n_layers):
        tag, d_out, d_in = lines[i].split()
        if tag != "layer":
            raise ValueError(f"expected 'layer', found {tag!r}")
        d_out, d_in = int(d_out), int(d_in)
        wvals = np.array([float(v) for v in lines[i + 1].split()[1:]])
        bvals = np.array([float(v) for v in lines[i + 2].split()[1:]])
        ws.append(wvals.reshape(d_out, d_in))
        bs.append(bvals)
        i += 3
    clip = None if fields["output_clip"] == "none" else float(fields["output_clip"])
    return SignReluNet(
        tuple(ws),
        tuple(bs),
        alpha=float(fields["alpha"]),
        activate_output=bool(int(fields["activate_output"])),
        output_clip=clip,
    )


def save_net(net: SignReluNet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_text(net))


def load_net(path) -> SignReluNet:
    with open(path, "r", encoding="utf-8") as fh:
        return from_text(fh.read())
