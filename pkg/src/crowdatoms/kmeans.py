"""Deterministic Lloyd k-means with k-means++ seeding.

Shared by codebook construction and atom-cluster initialization. All tie
breaks go to the lowest index, distance computations avoid BLAS reductions,
and every random draw comes from the caller's generator, so a fixed seed
reproduces results bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CHUNK = 1024


def squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, chunked over points."""
    n = points.shape[0]
    out = np.empty((n, centers.shape[0]))
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        diff = points[lo:hi, None, :] - centers[None, :, :]
        out[lo:hi] = (diff * diff).sum(axis=2)
    return out


def plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: D^2-weighted draws from the caller's generator."""
    n = points.shape[0]
    first = int(rng.integers(n))
    centers = [points[first]]
    d2 = squared_distances(points, points[first][None, :])[:, 0]
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            # all remaining points coincide with a chosen center
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(points[idx])
        d2 = np.minimum(d2, squared_distances(points, points[idx][None, :])[:, 0])
    return np.array(centers)


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (k, dim)
    labels: np.ndarray  # (n,) int
    n_iter: int
    converged: bool  # no assignment changed on the last iteration
    objective: list[float]  # within-cluster squared distance per iteration


def lloyd(
    points: np.ndarray,
    k: int,
    rng: np.random.Generator,
    max_iter: int = 100,
) -> KMeansResult:
    """Run Lloyd iterations from a k-means++ start until assignments settle.

    Empty clusters are repaired by reseeding at the point farthest from its
    current centroid (lowest index on ties).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1 or n < k:
        raise ValueError(f"need at least k={k} points, got {n}")

    centroids = plusplus_init(points, k, rng)
    d2 = squared_distances(points, centroids)
    labels = d2.argmin(axis=1)
    objective = [float(d2[np.arange(n), labels].sum())]

    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        new_centroids = np.empty_like(centroids)
        for c in range(k):
            members = points[labels == c]
            if len(members):
                new_centroids[c] = members.sum(axis=0) / len(members)
        # repair empties before the next assignment round
        counts = np.bincount(labels, minlength=k)
        for c in np.flatnonzero(counts == 0):
            diff = points - new_centroids[labels]
            to_own = (diff * diff).sum(axis=1)
            far = int(to_own.argmax())
            new_centroids[c] = points[far]
            labels[far] = c

        d2 = squared_distances(points, new_centroids)
        new_labels = d2.argmin(axis=1)
        objective.append(float(d2[np.arange(n), new_labels].sum()))
        centroids = new_centroids
        if (new_labels == labels).all():
            converged = True
            labels = new_labels
            break
        labels = new_labels

    return KMeansResult(centroids, labels, n_iter, converged, objective)
