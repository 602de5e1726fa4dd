"""Embedding-quality metrics.

Distance correlation (Pearson on condensed distance vectors), rank-based
trustworthiness/continuity, Shepard goodness (Spearman), and leave-one-out
kNN label accuracy. Latent distances default to the hyperbolic metric,
observed distances to Euclidean rows; both are pluggable.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.stats import spearmanr

from . import geometry

METRICS = ("hyperbolic", "euclidean", "hamming")


def pairwise_distances(points, metric):
    """Condensed upper-triangle distances of length N(N-1)/2.

    hyperbolic: points are (N, Q+1) Lorentz coordinates; euclidean: raw
    rows; hamming: bit-count differences of binary code rows.
    """
    points = np.asarray(points, dtype=float)
    if points.shape[0] < 2:
        raise ValueError("need at least two points")
    if metric == "hyperbolic":
        D = geometry.pairwise_distance(points)
        return squareform(D, checks=False)
    if metric == "euclidean":
        return pdist(points, "euclidean")
    if metric == "hamming":
        return pdist(points, "hamming") * points.shape[1]
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


def _square(points, metric):
    return squareform(pairwise_distances(points, metric))


def distance_correlation(latent_d, observed_d):
    """Pearson correlation between two condensed distance vectors."""
    latent_d = np.asarray(latent_d, dtype=float)
    observed_d = np.asarray(observed_d, dtype=float)
    if latent_d.shape != observed_d.shape:
        raise ValueError("distance vectors must have equal length")
    if np.std(latent_d) == 0 or np.std(observed_d) == 0:
        raise ValueError("correlation undefined for zero-variance distances")
    return float(np.corrcoef(latent_d, observed_d)[0, 1])


def _neighbor_order(D):
    """Stable nearest-first orderings, self excluded; ties break by index."""
    n = D.shape[0]
    order = np.argsort(D, axis=1, kind="stable")
    out = np.empty((n, n - 1), dtype=int)
    for i in range(n):
        row = order[i]
        out[i] = row[row != i]
    return out


def _ranks_from_order(order):
    """rank[i, j] = position (1-based) of j in i's neighbor ordering."""
    n = order.shape[0]
    ranks = np.empty((n, n), dtype=int)
    for i in range(n):
        ranks[i, order[i]] = np.arange(1, n)
        ranks[i, i] = 0
    return ranks


def _rank_penalty(D_rank_space, D_neighbor_space, k):
    """Shared kernel of trustworthiness/continuity."""
    n = D_rank_space.shape[0]
    if not 1 <= k < (n - 1) / 2:
        raise ValueError(f"k must satisfy 1 <= k < (N-1)/2, got k={k}, N={n}")
    ranks = _ranks_from_order(_neighbor_order(D_rank_space))
    neighbors = _neighbor_order(D_neighbor_space)[:, :k]
    penalty = 0.0
    for i in range(n):
        r = ranks[i, neighbors[i]]
        penalty += float(np.sum(np.maximum(0, r - k)))
    return 1.0 - 2.0 / (n * k * (2 * n - 3 * k - 1)) * penalty


def trustworthiness(observed, latent, k, observed_metric="euclidean", latent_metric="hyperbolic"):
    """1 - normalized penalty of latent neighbors ranked far in observed space."""
    return _rank_penalty(_square(observed, observed_metric), _square(latent, latent_metric), k)


def continuity(observed, latent, k, observed_metric="euclidean", latent_metric="hyperbolic"):
    """Mirror of trustworthiness with the two spaces swapped."""
    return _rank_penalty(_square(latent, latent_metric), _square(observed, observed_metric), k)


def shepard_goodness(observed, latent, observed_metric="euclidean", latent_metric="hyperbolic"):
    """Spearman rank correlation of condensed distances (average-rank ties)."""
    obs = pairwise_distances(observed, observed_metric)
    lat = pairwise_distances(latent, latent_metric)
    if np.std(obs) == 0 or np.std(lat) == 0:
        raise ValueError("correlation undefined for zero-variance distances")
    if obs.size < 3:
        raise ValueError("need at least 3 points")
    rho = spearmanr(obs, lat).statistic
    return float(rho)


def knn_accuracy(latent, labels, k=5, latent_metric="hyperbolic"):
    """Leave-one-out majority-vote accuracy among k nearest latent neighbors.

    Majority ties are broken by the nearest neighbor's label.
    """
    labels = np.asarray(labels)
    D = _square(latent, latent_metric)
    n = D.shape[0]
    if not 1 <= k < n:
        raise ValueError("k must be in [1, N)")
    neighbors = _neighbor_order(D)[:, :k]
    correct = 0
    for i in range(n):
        votes = labels[neighbors[i]]
        values, counts = np.unique(votes, return_counts=True)
        winners = values[counts == counts.max()]
        if len(winners) == 1:
            pred = winners[0]
        else:
            pred = next(v for v in votes if v in winners)
        correct += int(pred == labels[i])
    return correct / n
