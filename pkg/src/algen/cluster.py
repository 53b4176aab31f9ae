"""k-means partitioning of the unlabeled pool's vector space.

Lloyd's algorithm with k-means++ seeding. Empty clusters are repaired by
stealing the point farthest from its assigned centroid, which keeps the
cluster count at exactly m (the per-cluster quota logic depends on that).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .featurize import FeatureVector


class ClusterError(ValueError):
    pass


@dataclass
class Clustering:
    centroids: np.ndarray  # [m, dim]
    assignment: dict[str, int]
    inertia: float
    m: int
    seed: int
    inertia_history: list[float] = field(default_factory=list)

    def sizes(self) -> list[int]:
        counts = [0] * self.m
        for c in self.assignment.values():
            counts[c] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "centroids": self.centroids.tolist(),
            "assignment": dict(self.assignment),
            "inertia": self.inertia,
            "m": self.m,
            "seed": self.seed,
            "inertia_history": list(self.inertia_history),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Clustering":
        return cls(
            centroids=np.asarray(data["centroids"], dtype=np.float64),
            assignment={k: int(v) for k, v in data["assignment"].items()},
            inertia=float(data["inertia"]),
            m=int(data["m"]),
            seed=int(data["seed"]),
            inertia_history=[float(x) for x in data.get("inertia_history", [])],
        )


def _as_matrix(vectors: Sequence[FeatureVector] | np.ndarray) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=np.float64)
    return np.stack([v.to_dense() for v in vectors])


def _sq_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """[n, k] squared Euclidean distances, clipped at zero against float noise."""
    sq = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers**2, axis=1)[None, :]
    )
    return np.maximum(sq, 0.0)


def _kmeanspp_init(points: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((m, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_distances(points, centers[:1])[:, 0]
    for j in range(1, m):
        total = float(closest.sum())
        if total <= 0.0:
            # All points coincide with existing centers; any choice works.
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[j] = points[idx]
        closest = np.minimum(closest, _sq_distances(points, centers[j : j + 1])[:, 0])
    return centers


def kmeans_fit(
    vectors: Sequence[FeatureVector] | np.ndarray,
    m: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-6,
    ids: Sequence[str] | None = None,
) -> Clustering:
    """Cluster vectors into m groups. Deterministic for a fixed seed.

    ids, when given, key the assignment map; otherwise positional string
    indices are used. Ties in the nearest-centroid rule go to the lowest
    centroid index.
    """
    points = _as_matrix(vectors)
    n = points.shape[0]
    if m < 1:
        raise ClusterError("m must be a positive integer")
    if n < m:
        raise ClusterError(f"need at least m={m} vectors, got {n}")
    if ids is None:
        ids = [str(i) for i in range(n)]
    elif len(ids) != n:
        raise ClusterError(f"got {len(ids)} ids for {n} vectors")

    rng = np.random.default_rng(seed)
    centers = _kmeanspp_init(points, m, rng)
    inertia_history: list[float] = []
    for _ in range(max_iter):
        sq = _sq_distances(points, centers)
        labels = np.argmin(sq, axis=1)
        inertia_history.append(float(sq[np.arange(n), labels].sum()))

        new_centers = centers.copy()
        for j in range(m):
            mask = labels == j
            if mask.any():
                new_centers[j] = points[mask].mean(axis=0)
        # Repair empty clusters with the point currently worst-served.
        empty = [j for j in range(m) if not (labels == j).any()]
        if empty:
            dist_to_own = sq[np.arange(n), labels]
            order = np.argsort(-dist_to_own, kind="stable")
            for rank, j in enumerate(empty):
                new_centers[j] = points[order[rank % n]]
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < tol:
            break
    sq = _sq_distances(points, centers)
    labels = np.argmin(sq, axis=1)
    inertia = float(sq[np.arange(n), labels].sum())
    inertia_history.append(inertia)
    assignment = {ids[i]: int(labels[i]) for i in range(n)}
    return Clustering(
        centroids=centers,
        assignment=assignment,
        inertia=inertia,
        m=m,
        seed=seed,
        inertia_history=inertia_history,
    )


def assign(clustering: Clustering, vector: FeatureVector | np.ndarray) -> int:
    """Index of the nearest centroid; ties break toward the lowest index."""
    dense = vector.to_dense() if isinstance(vector, FeatureVector) else np.asarray(vector, dtype=np.float64)
    if dense.shape[0] != clustering.centroids.shape[1]:
        raise ClusterError(
            f"dimension mismatch: vector has {dense.shape[0]}, centroids have {clustering.centroids.shape[1]}"
        )
    sq = _sq_distances(dense[None, :], clustering.centroids)[0]
    return int(np.argmin(sq))
