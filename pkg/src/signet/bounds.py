"""Closed-form bound calculators.

All the displayed theoretical quantities, evaluated literally with
user-supplied constants (generic leading constants default to 1, additive
constant packs to 0).  Levels carry unspecified constants, so trend
behavior rather than absolute values is the testable content; the
calculators exist to make the displayed dependences machine-checkable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .schedule import NoiseSchedule


@dataclass(frozen=True)
class BoundReport:
    name: str
    inputs: dict
    value: float
    recommended: Optional[dict] = None

    def __post_init__(self):
        if not np.isfinite(self.value) or self.value < 0:
            raise ValueError(f"bound {self.name} evaluated to invalid value {self.value}")


def bound_approx(n: int, d: int, T: int, M: float, const: float = 0.0) -> BoundReport:
    """Approximation-error display: T (n^{-1-3/d} + log M / M) + const."""
    if n < 2:
        raise ValueError("need n >= 2")
    if M <= 1:
        raise ValueError("parameter norm must exceed 1 (log M / M regime)")
    value = T * (n ** (-1.0 - 3.0 / d) + np.log(M) / M) + const
    return BoundReport(
        "approximation_error",
        {"n": n, "d": d, "T": T, "M": M, "const": const},
        float(value),
    )


def bound_estimation(n: int, T: int, M: float, m: int, delta: float) -> BoundReport:
    """Estimation-error display:

    T (M^2 + log M + T^3 M^2 log M) (sqrt(7 n^2 / m) + sqrt(2 log(1/delta) / m)).
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0,1)")
    if m < 1:
        raise ValueError("need m >= 1")
    if M <= 1:
        raise ValueError("parameter norm must exceed 1")
    lead = T * (M**2 + np.log(M) + T**3 * M**2 * np.log(M))
    tail = np.sqrt(7.0 * n**2 / m) + np.sqrt(2.0 * np.log(1.0 / delta) / m)
    return BoundReport(
        "estimation_error",
        {"n": n, "T": T, "M": M, "m": m, "delta": delta},
        float(lead * tail),
    )


def bound_excess(n: int, T: int, d: int, delta: float) -> BoundReport:
    """Excess-KL display T (n^{-1-3/d} + sqrt(log(1/delta)) n^{-2-3/d}).

    Also returns the balancing recommendations M = n^{1+3/d} log n and
    m = T^6 n^{8+18/d} (log n)^6.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0,1)")
    value = T * (n ** (-1.0 - 3.0 / d) + np.sqrt(np.log(1.0 / delta)) * n ** (-2.0 - 3.0 / d))
    rec = {
        "M": n ** (1.0 + 3.0 / d) * np.log(n),
        "m": T**6 * n ** (8.0 + 18.0 / d) * np.log(n) ** 6,
    }
    return BoundReport(
        "excess_kl",
        {"n": n, "T": T, "d": d, "delta": delta},
        float(value),
        recommended=rec,
    )


def covering_bound(
    widths: Sequence[int],
    L: int,
    M_js: Sequence[float],
    eps: float,
    alpha: float = 1.0,
    log_const: float = 0.0,
) -> float:
    """Log covering number bound: log C + D log(B^L M'^L / eps).

    ``widths`` lists (W_0, ..., W_L); D = sum W_j W_{j-1} + sum W_j over
    j = 1..L; B = max(alpha, 1); M' = max per-layer norm cap.
    """
    widths = list(widths)
    if len(widths) != L + 1:
        raise ValueError("widths must have length L+1")
    if eps <= 0:
        raise ValueError("eps must be positive")
    D = sum(widths[j] * widths[j - 1] for j in range(1, L + 1)) + sum(widths[1 : L + 1])
    B = max(float(alpha), 1.0)
    Mp = max(float(v) for v in M_js)
    return float(log_const + D * (L * np.log(B) + L * np.log(Mp) - np.log(eps)))


# ---------------------------------------------------------------------------
# log-density bounds with the backward-radius recursion
# ---------------------------------------------------------------------------


def radius_recursion(
    sigma_p: np.ndarray,
    d: int,
    xi: float,
    a: np.ndarray,
    b: np.ndarray,
) -> np.ndarray:
    """R_T = sqrt(d) + sqrt(2 xi); R_{t-1} = a_t R_t + b_t + sigma_t (sqrt(d)+sqrt(2 xi)).

    Returns [R_1, ..., R_T].
    """
    T = len(sigma_p)
    base = np.sqrt(d) + np.sqrt(2.0 * xi)
    R = np.empty(T)
    R[T - 1] = base
    for t in range(T - 1, 0, -1):  # computes R_{t} -> R_{t-1}, 1-indexed t+1
        R[t - 1] = a[t] * R[t] + b[t] + sigma_p[t] * base
    return R


def log_density_bounds(
    schedule: NoiseSchedule,
    M: float,
    xi: float,
    d: int = 1,
    c0: float = 1.0,
) -> dict:
    """Explicit and asymptotic-order bounds on the reverse log densities.

    Two radius recursions are reported: the flat one with a_t = b_t = M
    (grows like M^T for M > 1) and the scheduled one with per-step caps
    M_t = M^{1/((t+c0) log M)} (the variant under which the T^4 M^2 log M
    order is meaningful).  Explicit constants use the displayed formulas
    with unit leading constants.
    """
    if xi <= 0:
        raise ValueError("xi must be positive")
    if c0 < 1:
        raise ValueError("c0 must be >= 1")
    T = schedule.T
    sp = schedule.sigma_p
    base = np.sqrt(d) + np.sqrt(2.0 * xi)

    flat_a = np.full(T, M)
    R_flat = radius_recursion(sp, d, xi, flat_a, flat_a)
    if M > 1:
        sched_a = np.exp(1.0 / (np.arange(1, T + 1) + c0))  # = M^{1/((t+c0) log M)}
    else:
        sched_a = np.ones(T)
    R_sched = radius_recursion(sp, d, xi, sched_a, sched_a)

    # ideal-process bound: T (M^2 + (sqrt(2 xi) + sqrt(d) + 1)^2) + sum (d/2)|log 2 pi s^2|
    log_terms = float(np.sum(0.5 * d * np.abs(np.log(2.0 * np.pi * sp**2))))
    B_tilde = T * (M**2 + (np.sqrt(2.0 * xi) + np.sqrt(d) + 1.0) ** 2) + log_terms

    def _hat(R1: float, a1: float, b1: float) -> dict:
        upper = -0.5 * d * np.log(2.0 * np.pi * sp[0] ** 2)
        miss = (T + 1) * np.exp(-xi)
        if miss < 1.0:
            lower = (
                upper
                + np.log1p(-miss)
                - (2.0 * np.sqrt(d) + a1 * R1 + b1) ** 2 / (2.0 * sp[0] ** 2)
            )
        else:
            lower = -np.inf
        sup = max(abs(upper), abs(lower)) if np.isfinite(lower) else np.inf
        return {"upper": float(upper), "lower": float(lower), "sup": float(sup)}

    hat_flat = _hat(R_flat[0], M, M)
    hat_sched = _hat(R_sched[0], M, M)  # a_1, b_1 <= M
    return {
        "R_flat": R_flat,
        "R_scheduled": R_sched,
        "B_tilde_explicit": float(B_tilde),
        "B_hat_flat": hat_flat,
        "B_hat_scheduled": hat_sched,
        "B_tilde_order": float(T * (M**2 + np.log(M))) if M > 1 else float(T * M**2),
        "B_hat_order": float(T**4 * M**2 * np.log(M)) if M > 1 else float(T**4 * M**2),
        "xi": xi,
        "c0": c0,
    }
