"""Partitioning of enrolled signatures into groups.

Either a seeded uniform split into (near-)equal groups, or Lloyd k-means
with k-means++ seeding so that similar signatures share a group. The
smallest group size ``n_min`` is the anonymity figure reported alongside
verification results: a positive test only reveals membership in a group
of at least ``n_min`` users.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .aggregation import SignatureSet


@dataclass(frozen=True)
class GroupAssignment:
    """Group label per signature plus the per-group sizes."""

    labels: np.ndarray
    n_groups: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-D array")
        if labels.min() < 0 or labels.max() >= self.n_groups:
            raise ValueError("labels out of range")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def count(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_groups)

    @property
    def n_min(self) -> int:
        return int(self.sizes.min())

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


def random_partition(count: int, n_groups: int, seed: int) -> GroupAssignment:
    """Seeded uniform split; group sizes differ by at most one."""
    _check_counts(count, n_groups)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(count)
    labels = np.empty(count, dtype=int)
    labels[perm] = np.arange(count) % n_groups
    return GroupAssignment(labels=labels, n_groups=n_groups)


def kmeans_partition(sigs: SignatureSet, n_groups: int, seed: int,
                     max_iters: int = 100) -> GroupAssignment:
    """Lloyd k-means over raw signatures with k-means++ seeding.

    Iterates until no label changes or ``max_iters`` is reached. An empty
    cluster is re-seeded at the point farthest from its assigned centroid
    so the result always has ``n_groups`` non-empty groups.
    """
    _check_counts(sigs.count, n_groups)
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    points = sigs.matrix.T  # rows are signatures
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, n_groups, rng)
    labels = None
    for _ in range(max_iters):
        d2 = _sq_distances(points, centroids)
        new_labels = d2.argmin(axis=1)
        new_labels = _repair_empty(points, centroids, new_labels, d2, n_groups)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(n_groups):
            members = points[labels == k]
            if members.size:
                centroids[k] = members.mean(axis=0)
    return GroupAssignment(labels=labels, n_groups=n_groups)


def _check_counts(count: int, n_groups: int) -> None:
    if n_groups < 1:
        raise ValueError("need at least one group")
    if n_groups > count:
        raise ValueError(f"cannot split {count} signatures into {n_groups} groups")


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    p2 = (points * points).sum(axis=1)[:, None]
    c2 = (centroids * centroids).sum(axis=1)[None, :]
    return np.maximum(p2 + c2 - 2.0 * points @ centroids.T, 0.0)


def _kmeanspp_init(points: np.ndarray, n_groups: int,
                   rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((n_groups, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = _sq_distances(points, centroids[:1])[:, 0]
    for k in range(1, n_groups):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centroids[k] = points[idx]
        closest = np.minimum(closest, _sq_distances(points, centroids[k:k + 1])[:, 0])
    return centroids


def _repair_empty(points, centroids, labels, d2, n_groups) -> np.ndarray:
    labels = labels.copy()
    sizes = np.bincount(labels, minlength=n_groups)
    own_dist = d2[np.arange(points.shape[0]), labels]
    for k in np.flatnonzero(sizes == 0):
        donors = sizes[labels] >= 2  # moving must not empty another group
        candidates = np.where(donors, own_dist, -np.inf)
        far = int(candidates.argmax())
        sizes[labels[far]] -= 1
        labels[far] = k
        sizes[k] = 1
        centroids[k] = points[far]
        own_dist[far] = 0.0
    return labels


def write_assignment_csv(assignment: GroupAssignment, path) -> None:
    """CSV export: one (index, group_id) row per signature."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "group_id"])
        for i, g in enumerate(assignment.labels):
            writer.writerow([i, int(g)])
