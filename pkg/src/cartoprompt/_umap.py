"""Compact dense UMAP implementation.

Follows the reference algorithm: smooth-kNN fuzzy simplicial set, fuzzy
union symmetrization, and a negative-sampling SGD layout with the
epochs-per-sample schedule. Written for the small batch sizes this
package needs (tens to low thousands of points), so neighbor search is
exact and the optimizer is a plain Python loop. Everything is driven by
one seeded generator, which makes layouts reproducible run to run.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import curve_fit

SMOOTH_K_TOLERANCE = 1e-5
MIN_K_DIST_SCALE = 1e-3
NEGATIVE_SAMPLE_RATE = 5
REPULSION_EPS = 0.001
GRAD_CLIP = 4.0


def _pairwise_distances(data: np.ndarray) -> np.ndarray:
    sq = np.sum(data * data, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (data @ data.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def _smooth_knn(knn_dists: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point (rho, sigma) so the local weight sum hits log2(k)."""
    n, k = knn_dists.shape
    target = math.log2(k)
    rhos = np.zeros(n)
    sigmas = np.ones(n)
    mean_all = float(np.mean(knn_dists)) or 1.0
    for i in range(n):
        row = knn_dists[i]
        positive = row[row > 0.0]
        rhos[i] = positive[0] if len(positive) else 0.0

        lo, hi, mid = 0.0, np.inf, 1.0
        for _ in range(64):
            val = np.sum(np.exp(-np.maximum(row - rhos[i], 0.0) / mid))
            if abs(val - target) < SMOOTH_K_TOLERANCE:
                break
            if val > target:
                hi = mid
                mid = (lo + hi) / 2.0
            else:
                lo = mid
                mid = mid * 2.0 if hi == np.inf else (lo + hi) / 2.0
        sigmas[i] = max(mid, MIN_K_DIST_SCALE * mean_all)
    return rhos, sigmas


def fuzzy_graph(data: np.ndarray, n_neighbors: int) -> np.ndarray:
    """Symmetrized membership matrix P = W + Wt - W*Wt (dense)."""
    n = len(data)
    dists = _pairwise_distances(data)
    order = np.argsort(dists, axis=1, kind="stable")
    # Nearest n_neighbors excluding the point itself.
    neighbor_idx = np.empty((n, n_neighbors), dtype=int)
    neighbor_dist = np.empty((n, n_neighbors))
    for i in range(n):
        cols = [j for j in order[i] if j != i][:n_neighbors]
        neighbor_idx[i] = cols
        neighbor_dist[i] = dists[i, cols]

    rhos, sigmas = _smooth_knn(neighbor_dist)
    w = np.zeros((n, n))
    for i in range(n):
        weights = np.exp(-np.maximum(neighbor_dist[i] - rhos[i], 0.0) / sigmas[i])
        w[i, neighbor_idx[i]] = weights
    return w + w.T - w * w.T


def fit_ab(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Curve parameters a, b approximating the min_dist membership kernel."""

    def kernel(x, a, b):
        return 1.0 / (1.0 + a * x ** (2.0 * b))

    xs = np.linspace(0.0, spread * 3.0, 300)
    ys = np.where(xs < min_dist, 1.0, np.exp(-(xs - min_dist) / spread))
    (a, b), _ = curve_fit(kernel, xs, ys, p0=(1.0, 1.0), maxfev=10000)
    return float(a), float(b)


def _pca_init(data: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    centered = data - data.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    layout = centered @ vt[:2].T
    scale = np.abs(layout).max()
    if scale > 0:
        layout = layout / scale * 10.0
    # Tiny jitter so exact duplicates can separate under repulsion.
    return layout + rng.normal(0.0, 1e-4, size=layout.shape)


def umap_layout(data: np.ndarray, n_neighbors: int = 15, min_dist: float = 0.1,
                n_epochs: int = 200, seed: int = 0) -> np.ndarray:
    """2D embedding of `data`; deterministic for a fixed seed."""
    data = np.asarray(data, dtype=np.float64)
    n = len(data)
    rng = np.random.default_rng(seed)

    graph = fuzzy_graph(data, n_neighbors)
    a, b = fit_ab(min_dist)
    layout = _pca_init(data, rng)

    heads, tails = np.nonzero(np.triu(graph, k=1))
    weights = graph[heads, tails]
    if len(weights) == 0:
        return layout
    # Prune edges too weak to fire even once over the run.
    max_w = weights.max()
    keep = weights >= max_w / n_epochs
    heads, tails, weights = heads[keep], tails[keep], weights[keep]

    epochs_per_sample = max_w / weights
    epochs_per_negative = epochs_per_sample / NEGATIVE_SAMPLE_RATE
    next_sample = epochs_per_sample.copy()
    next_negative = epochs_per_negative.copy()

    for epoch in range(1, n_epochs + 1):
        alpha = 1.0 - epoch / n_epochs
        due = np.nonzero(next_sample <= epoch)[0]
        for e in due:
            i, j = heads[e], tails[e]
            diff = layout[i] - layout[j]
            d2 = float(diff @ diff)
            if d2 > 0.0:
                coeff = (-2.0 * a * b * d2 ** (b - 1.0)) / (1.0 + a * d2 ** b)
                grad = np.clip(coeff * diff, -GRAD_CLIP, GRAD_CLIP)
                layout[i] += alpha * grad
                layout[j] -= alpha * grad
            next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                k = int(rng.integers(0, n))
                if k == i:
                    continue
                diff = layout[i] - layout[k]
                d2 = float(diff @ diff)
                coeff = (2.0 * b) / ((REPULSION_EPS + d2) * (1.0 + a * d2 ** b))
                grad = np.clip(coeff * diff, -GRAD_CLIP, GRAD_CLIP)
                layout[i] += alpha * grad
            next_negative[e] += n_neg * epochs_per_negative[e]

    return layout
