"""Kernel-induced marginal densities f(x) = integral of Phi(x,y) g(y) dy.

The interaction kernel is a sum of ridge-composed univariate families
phi_j(x' A_j y); the registry is closed so that each family carries a
certified bound on |phi''| (required for the integral representation and
the Maurey sampling measure).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .quadrature import tensor_gauss_legendre


class DomainError(ValueError):
    """Evaluation point outside the supported domain."""


@dataclass(frozen=True)
class KernelFamily:
    """Univariate kernel with derivatives and a sup bound on phi''."""

    name: str
    f: Callable
    d1: Callable
    d2: Callable
    d2_sup: Callable  # c -> sup_{|t|<=c} |phi''(t)|


def _gauss_d2(t):
    t = np.asarray(t, dtype=float)
    return (4.0 * t * t - 2.0) * np.exp(-t * t)


KERNELS = {
    "exp_neg": KernelFamily(
        "exp_neg",
        f=lambda t: np.exp(-np.asarray(t, dtype=float)),
        d1=lambda t: -np.exp(-np.asarray(t, dtype=float)),
        d2=lambda t: np.exp(-np.asarray(t, dtype=float)),
        d2_sup=lambda c: float(np.exp(c)),
    ),
    "square": KernelFamily(
        "square",
        f=lambda t: np.asarray(t, dtype=float) ** 2,
        d1=lambda t: 2.0 * np.asarray(t, dtype=float),
        d2=lambda t: 2.0 * np.ones_like(np.asarray(t, dtype=float)),
        d2_sup=lambda c: 2.0,
    ),
    "cosh_like": KernelFamily(
        "cosh_like",
        f=np.cosh,
        d1=np.sinh,
        d2=np.cosh,
        d2_sup=lambda c: float(np.cosh(c)),
    ),
    "gaussian_radial": KernelFamily(
        "gaussian_radial",
        f=lambda t: np.exp(-np.asarray(t, dtype=float) ** 2),
        d1=lambda t: -2.0 * np.asarray(t, dtype=float) * np.exp(-np.asarray(t, dtype=float) ** 2),
        d2=_gauss_d2,
        d2_sup=lambda c: 2.0,  # |(4t^2-2)e^{-t^2}| peaks at t=0
    ),
}


def get_kernel(phi_id: str) -> KernelFamily:
    try:
        return KERNELS[phi_id]
    except KeyError:
        raise KeyError(f"unknown kernel family {phi_id!r}; registry: {sorted(KERNELS)}") from None


# ---------------------------------------------------------------------------
# the function class
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SClassFunction:
    """f(x) = sum_k w_k * (sum_j phi_j(x' A_j y_k)) * g(y_k).

    ``components`` is a sequence of (phi_id, A) pairs with A a (d, d)
    matrix; the weight function g enters through quadrature nodes
    (y_k, w_k, g_k) on the box [-1,1]^d.
    """

    components: tuple  # ((phi_id, A (d,d)), ...)
    nodes: np.ndarray  # (N, d)
    weights: np.ndarray  # (N,)
    g_vals: np.ndarray  # (N,)
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.atleast_2d(np.asarray(self.nodes, dtype=float)))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "g_vals", np.asarray(self.g_vals, dtype=float))
        comps = tuple((pid, np.asarray(A, dtype=float)) for pid, A in self.components)
        object.__setattr__(self, "components", comps)
        if self.nodes.shape[1] != self.dim:
            raise ValueError("node dimension mismatch")
        if np.any(np.abs(self.nodes) > 1 + 1e-12):
            raise ValueError("quadrature nodes must lie in [-1,1]^d")
        if np.any(self.weights <= 0):
            raise ValueError("quadrature weights must be positive")
        mass = float(np.sum(self.weights * np.abs(self.g_vals)))
        if not np.isfinite(mass):
            raise ValueError("g must be integrable (finite weighted mass)")
        for pid, A in comps:
            get_kernel(pid)
            if A.shape != (self.dim, self.dim):
                raise ValueError(f"A for {pid} must be ({self.dim},{self.dim})")


def make_sclass(
    phi_ids: Sequence[str],
    A_list: Sequence[np.ndarray],
    g: Callable,
    d: int,
    order: int | None = None,
) -> SClassFunction:
    """Build an SClassFunction from a callable weight function g."""
    pts, wts = tensor_gauss_legendre(d, order)
    gv = np.asarray(g(pts), dtype=float).reshape(-1)
    comps = tuple((pid, np.asarray(A, dtype=float)) for pid, A in zip(phi_ids, A_list))
    return SClassFunction(comps, pts, wts, gv, d)


def eval_sclass(f: SClassFunction, x) -> np.ndarray:
    """Evaluate f on a point or batch of points in [-1,1]^d."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != f.dim:
        raise ValueError(f"points have dim {X.shape[1]}, function has dim {f.dim}")
    if np.any(np.abs(X) > 1 + 1e-12):
        raise DomainError("evaluation points must lie in [-1,1]^d")
    wg = f.weights * f.g_vals
    out = np.zeros(X.shape[0])
    for pid, A in f.components:
        ker = get_kernel(pid)
        U = X @ (A @ f.nodes.T)  # (Nx, Nk)
        out += ker.f(U) @ wg
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# integral representation (hinge + affine form of a smooth univariate map)
# ---------------------------------------------------------------------------


def integral_representation(phi_id: str, u: float, c: float, tol: float = 1e-10) -> float:
    """Reconstruct phi(u) from its hinge representation on [-c, c]:

        phi(u) = int_0^c [ (u-t)_+ phi''(t) + (-u-t)_+ phi''(-t) ] dt
                 + u phi'(0) + phi(0).

    Evaluated by adaptive quadrature; |u| <= c required.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if abs(u) > c:
        raise DomainError(f"|u|={abs(u)} exceeds c={c}")
    ker = get_kernel(phi_id)
    acc = 0.0
    if u > 0:
        val, _ = integrate.quad(lambda t: (u - t) * ker.d2(t), 0.0, u, epsabs=tol, epsrel=tol)
        acc += val
    elif u < 0:
        val, _ = integrate.quad(lambda t: (-u - t) * ker.d2(-t), 0.0, -u, epsabs=tol, epsrel=tol)
        acc += val
    return acc + u * float(ker.d1(0.0)) + float(ker.f(0.0))
