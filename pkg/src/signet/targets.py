"""Target densities on the box [-1,1]^d with certified bounds.

Each family exposes ``density`` (zero off the box), an exact inverse-CDF
sampler, and a certificate ``C_q0 >= 1`` with C^-1 <= q0 <= C on the box.
``validate`` checks normalization by quadrature to 1e-6.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .quadrature import tensor_gauss_legendre

_SQRT2PI = np.sqrt(2.0 * np.pi)


def _norm_pdf(x, mu, s):
    return np.exp(-0.5 * ((x - mu) / s) ** 2) / (s * _SQRT2PI)


def _box_mass_1d(mu, s):
    return ndtr((1.0 - mu) / s) - ndtr((-1.0 - mu) / s)


def _sample_truncnorm(rng, n, mu, s):
    lo = ndtr((-1.0 - mu) / s)
    hi = ndtr((1.0 - mu) / s)
    u = rng.uniform(lo, hi, size=n)
    return mu + s * ndtri(u)


@dataclass(frozen=True)
class TruncatedGaussian:
    """Product of per-axis Gaussians restricted and renormalized to the box."""

    mean: np.ndarray
    scale: float
    d: int

    def __post_init__(self):
        mu = np.broadcast_to(np.asarray(self.mean, dtype=float), (self.d,)).copy()
        object.__setattr__(self, "mean", mu)
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if np.any(np.abs(mu) > 1):
            raise ValueError("mean must lie inside the box")

    def density(self, x) -> np.ndarray:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all(np.abs(X) <= 1.0, axis=1)
        out = np.ones(X.shape[0])
        for i in range(self.d):
            z = _box_mass_1d(self.mean[i], self.scale)
            out *= _norm_pdf(X[:, i], self.mean[i], self.scale) / z
        return np.where(inside, out, 0.0)

    def sample(self, rng, n: int) -> np.ndarray:
        cols = [_sample_truncnorm(rng, n, self.mean[i], self.scale) for i in range(self.d)]
        return np.column_stack(cols)

    @property
    def C_q0(self) -> float:
        sup = 1.0
        inf = 1.0
        for i in range(self.d):
            z = _box_mass_1d(self.mean[i], self.scale)
            peak = min(max(self.mean[i], -1.0), 1.0)
            far = 1.0 if abs(1.0 - self.mean[i]) >= abs(-1.0 - self.mean[i]) else -1.0
            sup *= float(_norm_pdf(peak, self.mean[i], self.scale)) / z
            inf *= float(_norm_pdf(far, self.mean[i], self.scale)) / z
        return max(sup, 1.0 / inf, 1.0)


@dataclass(frozen=True)
class TruncatedMixture:
    """Mixture of axis-aligned Gaussians jointly renormalized to the box."""

    weights: np.ndarray
    means: np.ndarray  # (k, d)
    scale: float
    d: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mus = np.atleast_2d(np.asarray(self.means, dtype=float))
        if mus.shape[1] != self.d:
            raise ValueError("component means must have d columns")
        if not (2 <= len(w) <= 3):
            raise ValueError("mixtures carry 2 or 3 components")
        if np.any(w <= 0) or abs(float(np.sum(w)) - 1.0) > 1e-12:
            raise ValueError("weights must be positive and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mus)
        # per-component mass inside the box (product over axes)
        box = np.array(
            [np.prod([_box_mass_1d(mu[i], self.scale) for i in range(self.d)]) for mu in mus]
        )
        object.__setattr__(self, "_box_mass", box)
        object.__setattr__(self, "_norm", float(np.sum(w * box)))

    def density(self, x) -> np.ndarray:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all(np.abs(X) <= 1.0, axis=1)
        out = np.zeros(X.shape[0])
        for w, mu in zip(self.weights, self.means):
            comp = np.ones(X.shape[0])
            for i in range(self.d):
                comp *= _norm_pdf(X[:, i], mu[i], self.scale)
            out += w * comp
        return np.where(inside, out / self._norm, 0.0)

    def sample(self, rng, n: int) -> np.ndarray:
        # conditional on the box, components occur with prob w_k z_k / norm
        probs = self.weights * self._box_mass / self._norm
        comp = rng.choice(len(self.weights), size=n, p=probs / np.sum(probs))
        out = np.empty((n, self.d))
        for k, mu in enumerate(self.means):
            sel = comp == k
            m = int(np.sum(sel))
            if m:
                out[sel] = np.column_stack(
                    [_sample_truncnorm(rng, m, mu[i], self.scale) for i in range(self.d)]
                )
        return out

    @property
    def C_q0(self) -> float:
        pts, _ = tensor_gauss_legendre(self.d)
        vals = self.density(pts)
        return max(float(np.max(vals)), 1.0 / float(np.min(vals)), 1.0)


@dataclass(frozen=True)
class BoxUniform:
    d: int

    def density(self, x) -> np.ndarray:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        inside = np.all(np.abs(X) <= 1.0, axis=1)
        return np.where(inside, 2.0**-self.d, 0.0)

    def sample(self, rng, n: int) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=(n, self.d))

    @property
    def C_q0(self) -> float:
        return 2.0**self.d


def validate(q0, tol: float = 1e-6, order: int | None = None) -> float:
    """Quadrature check that the density integrates to 1 on the box."""
    pts, wts = tensor_gauss_legendre(q0.d, order)
    mass = float(wts @ q0.density(pts))
    if abs(mass - 1.0) > tol:
        raise ValueError(f"density mass {mass} deviates from 1 beyond {tol}")
    return mass
