"""Exact SignReLU gates for reciprocals, divisions, and ratio networks.

The reciprocal block is the algebraic identity (alpha = 1, x >= c):

    1 + sigma(-(x/c - 1)) = c/x,

exact because the pre-activation is non-positive there and the negative
branch is the Moebius map z/(1-z).  Squares are recovered from two
reciprocal stages via 1/u - 1/(u+1) = 1/(u^2+u), and products from the
polarization identity ab = ((a+b)^2 - (a-b)^2)/4, which yields a fully
explicit division gate: no trained stage is needed, and the achieved
(depth, width, parameter) budget is certified against the published
(6, 9, 71) figures rather than assumed.

Hinges and clamps are realized by scale pairs

    relu(z) ~= (sigma(L z) - sigma(L z / 2)) * 2/L,

exact on z >= 0 and leaking at most ~0.35/L on z < 0; with L = 2^40 the
leak sits far below every tolerance used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .nets import ShapeError, SignReluNet, forward
from .rngtools import named_rng

#: scale used for hinge/clamp pairs; power of two keeps the positive
#: branch exact in binary floating point
HINGE_LAMBDA = 2.0**40

#: published division-gate budget: depth, width, parameter count
LEMMA_BUDGET = (6, 9, 71)


class ConstructionError(RuntimeError):
    """A gate failed its certification tolerance."""


# ---------------------------------------------------------------------------
# net composition utilities
# ---------------------------------------------------------------------------


def pipe(a: SignReluNet, b: SignReluNet) -> SignReluNet:
    """Feed ``a``'s output into ``b``; merges the junction affine maps."""
    if a.activate_output:
        raise ShapeError("pipe requires an affine-output first net")
    if a.output_dim != b.input_dim:
        raise ShapeError(f"cannot pipe {a.output_dim} outputs into {b.input_dim} inputs")
    w_join = b.weights[0] @ a.weights[-1]
    b_join = b.weights[0] @ a.biases[-1] + b.biases[0]
    ws = a.weights[:-1] + (w_join,) + b.weights[1:]
    bs = a.biases[:-1] + (b_join,) + b.biases[1:]
    return SignReluNet(ws, bs, alpha=a.alpha, activate_output=b.activate_output)


def parallel_join(nets: Sequence[SignReluNet]) -> SignReluNet:
    """Stack nets side by side on a shared input; outputs are concatenated.

    All nets must have equal depth, equal alpha, and affine outputs.
    """
    depths = {len(n.weights) for n in nets}
    if len(depths) != 1:
        raise ShapeError("parallel_join requires equal layer counts (pad first)")
    if len({n.input_dim for n in nets}) != 1:
        raise ShapeError("parallel_join requires a shared input dimension")
    if any(n.activate_output for n in nets) or len({n.alpha for n in nets}) != 1:
        raise ShapeError("parallel_join requires affine outputs and a shared alpha")
    n_layers = depths.pop()
    ws, bs = [], []
    for i in range(n_layers):
        blocks = [n.weights[i] for n in nets]
        if i == 0:
            ws.append(np.vstack(blocks))
        else:
            rows = sum(w.shape[0] for w in blocks)
            cols = sum(w.shape[1] for w in blocks)
            big = np.zeros((rows, cols))
            r = c = 0
            for w in blocks:
                big[r : r + w.shape[0], c : c + w.shape[1]] = w
                r += w.shape[0]
                c += w.shape[1]
            ws.append(big)
        bs.append(np.concatenate([n.biases[i] for n in nets]))
    return SignReluNet(tuple(ws), tuple(bs), alpha=nets[0].alpha)


def value_bounds(net: SignReluNet, box_lo, box_hi):
    """Interval bounds on the outputs over an axis-aligned input box."""
    lo = np.asarray(box_lo, dtype=float)
    hi = np.asarray(box_hi, dtype=float)
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        pos, neg = np.maximum(w, 0.0), np.minimum(w, 0.0)
        lo, hi = pos @ lo + neg @ hi + b, pos @ hi + neg @ lo + b
        if i < last or net.activate_output:
            lo = np.where(lo > 0, lo, net.alpha * lo / (1.0 + np.abs(lo)))
            hi = np.where(hi > 0, hi, net.alpha * hi / (1.0 + np.abs(hi)))
    return lo, hi


def pad_depth(net: SignReluNet, extra: int, box_lo, box_hi) -> SignReluNet:
    """Append ``extra`` exact passthrough layers (shifted-positive trick)."""
    if extra < 0:
        raise ValueError("extra must be >= 0")
    out = net
    for _ in range(extra):
        lo, _ = value_bounds(out, box_lo, box_hi)
        shift = np.maximum(1.0 - lo, 1.0)
        d = out.output_dim
        carry = SignReluNet(
            (np.eye(d), np.eye(d)),
            (shift, -shift),
            alpha=out.alpha,
        )
        out = pipe(out, carry)
    return out


# ---------------------------------------------------------------------------
# hinge pairs and clamps
# ---------------------------------------------------------------------------


def hinge_pair_rows(w_row: np.ndarray, bias: float, lam: float = HINGE_LAMBDA):
    """Two unit rows realizing relu(w.x + b) up to a ~0.35/lam leak.

    Returns (rows, biases, combo) where the downstream affine should take
    ``combo[0]*unit0 + combo[1]*unit1``.
    """
    w_row = np.asarray(w_row, dtype=float)
    rows = np.vstack([lam * w_row, 0.5 * lam * w_row])
    biases = np.array([lam * bias, 0.5 * lam * bias])
    combo = np.array([2.0 / lam, -2.0 / lam])
    return rows, biases, combo


def _clamp_block(n_inputs: int, specs, lam: float = HINGE_LAMBDA):
    """One hidden layer clamping selected coordinates to intervals.

    ``specs`` is a list of (index, lo, hi); returns a depth-1 net mapping
    the inputs to their clamped values (same order as specs).
    """
    rows, biases = [], []
    out_w = np.zeros((len(specs), 4 * len(specs)))
    out_b = np.zeros(len(specs))
    for k, (idx, lo, hi) in enumerate(specs):
        e = np.zeros(n_inputs)
        e[idx] = 1.0
        r1, b1, c1 = hinge_pair_rows(e, -lo, lam)
        r2, b2, c2 = hinge_pair_rows(e, -hi, lam)
        rows.extend([r1[0], r1[1], r2[0], r2[1]])
        biases.extend([b1[0], b1[1], b2[0], b2[1]])
        out_w[k, 4 * k : 4 * k + 2] = c1
        out_w[k, 4 * k + 2 : 4 * k + 4] = -c2
        out_b[k] = lo
    return SignReluNet((np.vstack(rows), out_w), (np.array(biases), out_b), alpha=1.0)


# ---------------------------------------------------------------------------
# reciprocal gate
# ---------------------------------------------------------------------------


def reciprocal_gate(c: float, inverse: bool = False) -> SignReluNet:
    """One-hidden-unit net computing c/x exactly for x >= c.

    Uses 1 + sigma(-(x/c - 1)) = c/x with alpha = 1.  With
    ``inverse=True`` the output affine is rescaled to return 1/x.
    """
    if c <= 0:
        raise ValueError(f"denominator lower bound must be positive, got {c}")
    w0 = np.array([[-1.0 / c]])
    b0 = np.array([1.0])
    s = 1.0 / c if inverse else 1.0
    w1 = np.array([[s]])
    b1 = np.array([s])
    return SignReluNet((w0, w1), (b0, b1), alpha=1.0)


# ---------------------------------------------------------------------------
# division gate
# ---------------------------------------------------------------------------


@dataclass
class DivisionGateSpec:
    """Domain and tolerance contract for a division gate y/x.

    ``achieved`` is filled by :func:`division_gate` after certification.
    """

    c: float
    C: float
    tol: float = 1e-6
    achieved: Optional[dict] = None

    def __post_init__(self):
        if not (0 < self.c < self.C):
            raise ValueError(f"need 0 < c < C, got c={self.c}, C={self.C}")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


def _ratio_head(d_out: int, c: float, C: float, clamp: bool = True) -> SignReluNet:
    """Net mapping (x, y_1..y_d) -> (y_k/x)_k exactly on [c,C] x [-C,C]^d.

    Three hidden layers of reciprocal blocks (see module docstring); an
    optional clamp layer restricts inputs to the guaranteed rectangle.
    """
    hi = 2.0 * C + 2.0
    g3 = 1.0 / (hi * (hi + 1.0))
    n_in = 1 + d_out

    # L1: shared reciprocal unit for x, positive passthrough per y_k
    w1 = np.zeros((1 + d_out, n_in))
    b1 = np.zeros(1 + d_out)
    w1[0, 0] = -1.0 / c
    b1[0] = 1.0
    for k in range(d_out):
        w1[1 + k, 1 + k] = 1.0
        b1[1 + k] = C + 1.0
    # semantic: u1 = c/x - 1, u2_k = y_k + C + 1

    # L2: per k the square-gadget feeds (g1a,g1b,g2a,g2b,pv1,pv2) + shared p_r
    per = 6
    w2 = np.zeros((per * d_out + 1, 1 + d_out))
    b2 = np.zeros(per * d_out + 1)
    for k in range(d_out):
        r0 = per * k
        uy = 1 + k
        # v1 = u1 + u2 + 1, v2 = u2 - u1
        w2[r0 + 0, 0], w2[r0 + 0, uy], b2[r0 + 0] = -1.0, -1.0, 0.0  # -(v1-1)
        w2[r0 + 1, 0], w2[r0 + 1, uy], b2[r0 + 1] = -0.5, -0.5, 0.0  # -((v1+1)/2-1)
        w2[r0 + 2, 0], w2[r0 + 2, uy], b2[r0 + 2] = 1.0, -1.0, 1.0  # -(v2-1)
        w2[r0 + 3, 0], w2[r0 + 3, uy], b2[r0 + 3] = 0.5, -0.5, 0.5  # -((v2+1)/2-1)
        w2[r0 + 4, 0], w2[r0 + 4, uy], b2[r0 + 4] = 1.0, 1.0, 1.0  # v1 pass
        w2[r0 + 5, 0], w2[r0 + 5, uy], b2[r0 + 5] = -1.0, 1.0, 0.0  # v2 pass
    w2[-1, 0], b2[-1] = 1.0, 1.0  # r = u1 + 1 pass

    # L3: per k (q1, q2, ppv1, ppv2) + shared pp_r
    w3 = np.zeros((4 * d_out + 1, per * d_out + 1))
    b3 = np.zeros(4 * d_out + 1)
    for k in range(d_out):
        r0, s0 = 4 * k, per * k
        # w = (g_a+1) - (g_b+1)/2; unit computes -(w/g3 - 1)
        w3[r0 + 0, s0 + 0], w3[r0 + 0, s0 + 1], b3[r0 + 0] = -1.0 / g3, 0.5 / g3, 1.0 - 0.5 / g3
        w3[r0 + 1, s0 + 2], w3[r0 + 1, s0 + 3], b3[r0 + 1] = -1.0 / g3, 0.5 / g3, 1.0 - 0.5 / g3
        w3[r0 + 2, s0 + 4] = 1.0  # v1 pass
        w3[r0 + 3, s0 + 5] = 1.0  # v2 pass
    w3[-1, -1] = 1.0  # r pass

    # output: y_k/x = ((v1^2 - v2^2 + 2 v2 - 1)/4 - (C+1) r)/c with
    # v^2 = (q+1)/g3 - v
    w4 = np.zeros((d_out, 4 * d_out + 1))
    b4 = np.zeros(d_out)
    for k in range(d_out):
        r0 = 4 * k
        w4[k, r0 + 0] = 1.0 / (4.0 * c * g3)
        w4[k, r0 + 1] = -1.0 / (4.0 * c * g3)
        w4[k, r0 + 2] = -1.0 / (4.0 * c)
        w4[k, r0 + 3] = 3.0 / (4.0 * c)
        w4[k, -1] = -(C + 1.0) / c
        b4[k] = -1.0 / (4.0 * c)
    core = SignReluNet((w1, w2, w3, w4), (b1, b2, b3, b4), alpha=1.0)

    if not clamp:
        return core
    specs = [(0, c, C)] + [(1 + k, -C, C) for k in range(d_out)]
    return pipe(_clamp_block(n_in, specs), core)


def division_gate(spec: DivisionGateSpec, certify: bool = True, seed: int = 0) -> SignReluNet:
    """Two-input net computing y/x on [c,C] x [-C,C] within ``spec.tol``.

    Inputs outside the rectangle are clamped onto it first.  Fills
    ``spec.achieved`` with the measured (depth, width, params, max_err)
    and the comparison against the published (6, 9, 71) budget; raises
    :class:`ConstructionError` if certification fails.
    """
    net = _ratio_head(1, spec.c, spec.C, clamp=True)
    if certify:
        report = certify_gate(net, spec, seed=seed)
        spec.achieved = {
            "depth": net.depth,
            "width": net.width,
            "params": net.n_params_nonzero(),
            "params_dense": net.n_params(),
            "max_err": report.max_err,
            "budget": LEMMA_BUDGET,
            "budget_met": report.budget_met,
        }
        if report.max_err > spec.tol:
            raise ConstructionError(
                f"division gate missed tol={spec.tol}: max err {report.max_err:.3e} "
                f"at (x, y) = {report.worst_point}"
            )
    return net


@dataclass
class GateCertification:
    max_err: float
    worst_point: tuple
    corner_errors: dict
    budget_met: bool
    achieved: tuple  # (depth, width, nonzero params)
    rows: np.ndarray = field(repr=False)  # columns: x, y, gate_out, true_ratio, abs_err


def certify_gate(
    net: SignReluNet,
    spec: DivisionGateSpec,
    grid: int = 200,
    n_random: int = 10_000,
    seed: int = 0,
) -> GateCertification:
    """Measure |gate(x,y) - y/x| over a grid plus random points."""
    xs = np.linspace(spec.c, spec.C, grid)
    ys = np.linspace(-spec.C, spec.C, grid)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    rng = named_rng(seed, "gates.certify", spec.c, spec.C)
    xr = rng.uniform(spec.c, spec.C, n_random)
    yr = rng.uniform(-spec.C, spec.C, n_random)
    px = np.concatenate([X.ravel(), xr])
    py = np.concatenate([Y.ravel(), yr])
    out = forward(net, np.column_stack([px, py]))[:, 0]
    truth = py / px
    err = np.abs(out - truth)
    worst = int(np.argmax(err))
    corners = {}
    for cx in (spec.c, spec.C):
        for cy in (-spec.C, spec.C):
            val = float(forward(net, np.array([cx, cy]))[0])
            corners[(cx, cy)] = abs(val - cy / cx)
    achieved = (net.depth, net.width, net.n_params_nonzero())
    met = all(a <= b for a, b in zip(achieved, LEMMA_BUDGET))
    rows = np.column_stack([px, py, out, truth, err])
    return GateCertification(
        max_err=float(err[worst]),
        worst_point=(float(px[worst]), float(py[worst])),
        corner_errors=corners,
        budget_met=met,
        achieved=achieved,
        rows=rows,
    )


# ---------------------------------------------------------------------------
# ratio composition
# ---------------------------------------------------------------------------


def compose_ratio(
    num_net: SignReluNet,
    den_net: SignReluNet,
    spec: DivisionGateSpec,
    input_box=None,
) -> SignReluNet:
    """Single net evaluating gate(den(x), num_k(x)) per output coordinate.

    ``num_net`` and ``den_net`` run in parallel (padded to equal depth if
    needed, using ``input_box`` bounds, default [-1,1]^d) and feed a
    clamped multi-output division head.
    """
    if num_net.input_dim != den_net.input_dim:
        raise ShapeError("numerator and denominator must share the input dimension")
    if den_net.output_dim != 1:
        raise ShapeError("denominator net must output a scalar")
    d_in = num_net.input_dim
    if input_box is None:
        box_lo, box_hi = -np.ones(d_in), np.ones(d_in)
    else:
        box_lo, box_hi = (np.asarray(v, dtype=float) for v in input_box)
    la, lb = len(num_net.weights), len(den_net.weights)
    if la < lb:
        num_net = pad_depth(num_net, lb - la, box_lo, box_hi)
    elif lb < la:
        den_net = pad_depth(den_net, la - lb, box_lo, box_hi)
    par = parallel_join([den_net, num_net])
    head = _ratio_head(num_net.output_dim, spec.c, spec.C, clamp=True)
    return pipe(par, head)
