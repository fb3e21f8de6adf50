"""t-SNE embedding with per-point bisection-calibrated Gaussian affinities.

Standard formulation: conditional affinities calibrated per point so each
row of P hits the target Shannon perplexity, symmetrized to joint affinities;
a Student-t kernel in the plane; gradient descent with early exaggeration,
momentum switching and per-coordinate gains. Deterministic for a fixed seed.
"""

from __future__ import annotations

import numpy as np


def pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    sq = (x * x).sum(axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _row_affinity(dists: np.ndarray, beta: float) -> tuple[np.ndarray, float]:
    """Gaussian conditional row for one point; returns (probabilities, Shannon entropy in nats)."""
    logits = -beta * dists
    logits -= logits.max()
    p = np.exp(logits)
    p /= p.sum()
    nz = p[p > 0]
    entropy = float(-(nz * np.log(nz)).sum())
    return p, entropy


def conditional_affinities(
    x: np.ndarray, perplexity: float, tol: float = 1e-7, max_iter: int = 200
) -> np.ndarray:
    """N x N conditional affinity matrix; row i achieves exp(H(P_i)) == perplexity.

    Each row's Gaussian precision is bisected until the achieved perplexity is
    within tol of the target (always well under the 1e-3 contract).
    """
    d = pairwise_sq_dists(x)
    n = d.shape[0]
    if perplexity >= n:
        raise ValueError(f"perplexity {perplexity} needs at least {int(perplexity) + 1} points, got {n}")
    target = float(np.log(perplexity))
    p_matrix = np.zeros((n, n))
    idx = np.arange(n)
    for i in range(n):
        mask = idx != i
        di = d[i, mask]
        beta, lo, hi = 1.0, 0.0, np.inf
        p, entropy = _row_affinity(di, beta)
        for _ in range(max_iter):
            if abs(np.exp(entropy) - perplexity) < tol:
                break
            if entropy > target:  # too spread out: raise precision
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else (beta + hi) / 2.0
            else:
                hi = beta
                beta = beta / 2.0 if lo == 0.0 else (beta + lo) / 2.0
            p, entropy = _row_affinity(di, beta)
        p_matrix[i, mask] = p
    return p_matrix


def achieved_perplexities(p_conditional: np.ndarray) -> np.ndarray:
    """exp of each row's Shannon entropy; the calibration diagnostic."""
    out = np.zeros(p_conditional.shape[0])
    for i, row in enumerate(p_conditional):
        nz = row[row > 0]
        out[i] = np.exp(-(nz * np.log(nz)).sum())
    return out


def tsne_embed(
    features: np.ndarray,
    perplexity: float = 30.0,
    seed: int = 0,
    n_iter: int = 1000,
    early_exaggeration: float = 12.0,
    exaggeration_iters: int = 250,
    learning_rate: float = 200.0,
) -> np.ndarray:
    """Embed feature vectors into the plane; returns an N x 2 array.

    Requires at least 3 * perplexity points so every conditional distribution
    can reach its target perplexity with room to spare.
    """
    x = np.asarray(features, dtype=np.float64)
    n = x.shape[0]
    if n < 3 * perplexity:
        raise ValueError(f"need at least {int(3 * perplexity)} points for perplexity {perplexity}, got {n}")

    p_cond = conditional_affinities(x, perplexity)
    p = (p_cond + p_cond.T) / (2.0 * n)
    p = np.maximum(p, 1e-12)

    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)

    for it in range(n_iter):
        exaggeration = early_exaggeration if it < exaggeration_iters else 1.0
        momentum = 0.5 if it < exaggeration_iters else 0.8

        d = pairwise_sq_dists(y)
        num = 1.0 / (1.0 + d)
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), 1e-12)

        pq = (exaggeration * p - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)

        flip = np.sign(grad) != np.sign(velocity)
        gains = np.where(flip, gains + 0.2, gains * 0.8)
        gains = np.maximum(gains, 0.01)
        velocity = momentum * velocity - learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
    return y
