"""Acquisition strategies: which unlabeled instances go to the annotator next.

Four paradigms with stable string names used in configs, CLI flags, split
names, and reports: "random", "topn", "coreset", "cluster_al". All
tie-breaking is by lexicographic instance id so runs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import featurize
from .cluster import Clustering
from .corpus import Pool
from .featurize import Vocabulary
from .learner import SupportsPredict

STRATEGIES = ("random", "topn", "coreset", "cluster_al")


class StrategyError(ValueError):
    pass


@dataclass
class Selection:
    """Chosen instance ids plus, for informativeness-driven strategies, their scores."""

    chosen: list[str]
    scores: dict[str, float] | None = None


def entropy(p) -> float:
    """Shannon entropy -sum(p_i ln p_i) in nats, with 0*ln(0) taken as 0.

    The log base never changes which instance maximizes entropy, so natural
    log is used throughout.
    """
    arr = np.asarray(p, dtype=np.float64)
    nz = arr[arr > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def _entropies(u: Pool, learner: SupportsPredict) -> dict[str, float]:
    ids = u.ids()
    probs = learner.predict_proba_texts([u.get(i).text for i in ids])
    nz = np.where(probs > 0.0, probs, 1.0)  # log(1) = 0 contributes nothing
    values = -np.sum(nz * np.log(nz), axis=1)
    return dict(zip(ids, values.tolist()))


def select_random(u: Pool, n: int, seed: int) -> Selection:
    """Uniform sample without replacement; deterministic per seed."""
    if len(u) == 0:
        raise StrategyError("unlabeled pool is empty")
    ids = u.ids()
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    take = min(n, len(ids))
    return Selection(chosen=[ids[i] for i in order[:take]])


def select_topn(u: Pool, learner: SupportsPredict, n: int) -> Selection:
    """The n highest-entropy instances under the current learner."""
    scores = _entropies(u, learner)
    ranked = sorted(scores, key=lambda i: (-scores[i], i))
    chosen = ranked[: min(n, len(ranked))]
    return Selection(chosen=chosen, scores={i: scores[i] for i in chosen})


def select_coreset(u: Pool, l: Pool, n: int, vocab: Vocabulary) -> Selection:
    """Greedy k-center with the labeled set as committed centers.

    Each pick maximizes the minimum distance to L plus the already-chosen
    set; its score is that covering distance.
    """
    if len(l) == 0:
        raise StrategyError("coreset selection needs a non-empty labeled pool")
    u_ids = u.ids()
    u_mat = featurize.matrix(vocab, [u.get(i).text for i in u_ids])
    l_mat = featurize.matrix(vocab, [inst.text for inst in l])
    min_dist = np.sqrt(_sq_dists(u_mat, l_mat)).min(axis=1)

    chosen: list[str] = []
    scores: dict[str, float] = {}
    available = np.ones(len(u_ids), dtype=bool)
    for _ in range(min(n, len(u_ids))):
        best = np.max(min_dist[available])
        tied = [i for i in np.flatnonzero(available & (min_dist == best))]
        pick = min(tied, key=lambda i: u_ids[i])
        chosen.append(u_ids[pick])
        scores[u_ids[pick]] = float(min_dist[pick])
        available[pick] = False
        dist_to_pick = np.sqrt(_sq_dists(u_mat, u_mat[pick : pick + 1]))[:, 0]
        min_dist = np.minimum(min_dist, dist_to_pick)
    return Selection(chosen=chosen, scores=scores)


def select_cluster_al(u: Pool, learner: SupportsPredict, clustering: Clustering, n: int) -> Selection:
    """Per-cluster quota of maximum-entropy instances.

    The quota is ceil(n / m') over the m' clusters that still contain pool
    members. Overshoot is trimmed by ascending entropy (ties drop the higher
    id); per-cluster shortfall is refilled from the whole remaining pool by
    descending entropy so the batch size stays exact.
    """
    scores = _entropies(u, learner)
    by_cluster: dict[int, list[str]] = {}
    for instance_id in u.ids():
        cid = clustering.assignment.get(instance_id)
        if cid is None:
            raise StrategyError(f"instance {instance_id!r} is not covered by the clustering")
        by_cluster.setdefault(cid, []).append(instance_id)

    n = min(n, len(u))
    quota = math.ceil(n / len(by_cluster))
    picked: list[str] = []
    for cid in sorted(by_cluster):
        members = sorted(by_cluster[cid], key=lambda i: (-scores[i], i))
        picked.extend(members[:quota])

    if len(picked) > n:
        picked = sorted(picked, key=lambda i: (-scores[i], i))[:n]
    elif len(picked) < n:
        taken = set(picked)
        backfill = sorted((i for i in scores if i not in taken), key=lambda i: (-scores[i], i))
        picked.extend(backfill[: n - len(picked)])

    picked = sorted(picked, key=lambda i: (-scores[i], i))
    return Selection(chosen=picked, scores={i: scores[i] for i in picked})


def _sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = np.sum(a**2, axis=1)[:, None] - 2.0 * a @ b.T + np.sum(b**2, axis=1)[None, :]
    return np.maximum(sq, 0.0)
