"""Exact t-SNE for small point sets (a few hundred sub-images at most)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError, ShapeError

__all__ = ["Calibration", "TsneConfig", "TsneResult", "squared_distances", "perplexity_calibration",
           "joint_probabilities", "kl_divergence", "tsne"]


class Calibration(NamedTuple):
    bandwidth: np.ndarray    # per-point b_i in P(j|i) ∝ exp(-D_ij / b_i)
    conditional: np.ndarray  # rows are P(.|i), zero diagonal
    perplexity: np.ndarray   # achieved per-point perplexity


def squared_distances(x: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - x[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _row(d, b):
    p = np.exp(-(d - d.min()) / b)
    p /= p.sum()
    h = -np.sum(p * np.log(np.where(p > 0, p, 1.0)))
    return p, float(np.exp(h))


def perplexity_calibration(d2: np.ndarray, perplexity: float = 30.0, tol: float = 1e-5,
                           max_steps: int = 50) -> Calibration:
    """Per-point bandwidths whose conditionals hit the target perplexity.

    Bisects log-bandwidth; ``d2`` is a symmetric matrix of squared distances.
    """
    d2 = np.asarray(d2, dtype=np.float64)
    if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
        raise ShapeError("distance matrix must be square")
    n = d2.shape[0]
    if not np.all(np.isfinite(d2)) or np.any(d2 < 0) or np.any(np.diag(d2) != 0):
        raise InputError("distances must be finite, non-negative, with a zero diagonal")
    if not np.allclose(d2, d2.T, rtol=1e-12, atol=0):
        raise InputError("distance matrix must be symmetric")
    if perplexity < 1 or n < perplexity + 1:
        raise InputError(f"need at least perplexity + 1 = {perplexity + 1:g} points, got {n}")

    bandwidth = np.empty(n)
    achieved = np.empty(n)
    cond = np.zeros((n, n))
    for i in range(n):
        d = np.delete(d2[i], i)
        s = d.mean()
        if s == 0.0:
            p, perp, b = np.full(n - 1, 1.0 / (n - 1)), float(n - 1), 1.0
        else:
            d = d / s
            lo, hi = -30.0, 30.0
            for _ in range(max_steps):
                mid = 0.5 * (lo + hi)
                p, perp = _row(d, np.exp(mid))
                if abs(perp - perplexity) < tol:
                    break
                if perp > perplexity:
                    hi = mid
                else:
                    lo = mid
            b = s * np.exp(mid)
        bandwidth[i], achieved[i] = b, perp
        cond[i, np.arange(n) != i] = p
    return Calibration(bandwidth, cond, achieved)


def joint_probabilities(cond: np.ndarray) -> np.ndarray:
    n = cond.shape[0]
    return np.maximum((cond + cond.T) / (2.0 * n), 1e-12)


def _q(y):
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    return num, np.maximum(num / num.sum(), 1e-12)


def kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    """KL(P || Q) for joint affinities ``p`` and embedding ``y``."""
    _, q = _q(y)
    mask = ~np.eye(p.shape[0], dtype=bool)
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 100.0
    exaggeration: float = 4.0
    exaggeration_iters: int = 100
    initial_momentum: float = 0.5
    final_momentum: float = 0.8
    init_sd: float = 1e-4
    seed: int = 0


@dataclass
class TsneResult:
    coords: np.ndarray
    kl_initial: float
    kl_final: float


def tsne(points: np.ndarray, config: TsneConfig = TsneConfig()) -> TsneResult:
    """Embed ``(N, K)`` points in 2-D by gradient descent on KL(P || Q).

    Uses exact gradients, momentum with adaptive gains, and early
    exaggeration. The embedding is re-centred after every step.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError("points must be an (N, K) array")
    if not np.all(np.isfinite(x)):
        raise InputError("points contain NaN or infinite values")
    n = x.shape[0]
    if n < 5:
        raise InputError(f"t-SNE needs at least 5 points, got {n}")
    if config.perplexity >= n:
        raise InputError(f"perplexity {config.perplexity:g} must be below the number of points ({n})")

    p = joint_probabilities(perplexity_calibration(squared_distances(x), config.perplexity).conditional)
    rng = np.random.default_rng(config.seed)
    y = rng.normal(0.0, config.init_sd, size=(n, 2))
    y -= y.mean(axis=0)
    kl0 = kl_divergence(p, y)
    step = np.zeros_like(y)
    gains = np.ones_like(y)
    for it in range(config.iterations):
        early = it < config.exaggeration_iters
        pe = p * config.exaggeration if early else p
        num, q = _q(y)
        w = (pe - q) * num
        grad = 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)
        momentum = config.initial_momentum if early else config.final_momentum
        same = np.sign(grad) == np.sign(step)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        step = momentum * step - config.learning_rate * gains * grad
        y = y + step
        y -= y.mean(axis=0)
    return TsneResult(y, kl0, kl_divergence(p, y))
