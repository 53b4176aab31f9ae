"""Seeded synthetic corpora with controllable class imbalance.

Each class draws from its own token vocabulary plus a shared ambiguous pool,
so lexical signal exists but is noisy: rare classes overlap a frequent
neighbor and only separate once enough of their examples are labeled. That
makes acquisition balance matter, which is exactly what the trend
experiments measure. Texts are unique by dedup key, and the generating
class doubles as a scripted-annotator oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corpus import Instance, Pool, Taxonomy, dedup_key, default_taxonomy

DEFAULT_PRIORS = (0.30, 0.25, 0.20, 0.15, 0.08, 0.02)


@dataclass
class SyntheticDataset:
    taxonomy: Taxonomy
    unlabeled: Pool
    bootstrap: Pool
    dev: Pool
    test: Pool
    oracle: dict[str, str] = field(default_factory=dict)

    def answers(self) -> dict[str, str]:
        """id -> true label for every instance, usable as scripted-annotator answers."""
        return dict(self.oracle)


def _class_tokens(class_index: int, size: int) -> list[str]:
    return [f"c{class_index}w{j:02d}" for j in range(size)]


def _sample_text(
    rng: np.random.Generator,
    own: list[str],
    neighbor: list[str],
    shared: list[str],
    overlap: float,
    length_range: tuple[int, int],
) -> str:
    length = int(rng.integers(length_range[0], length_range[1] + 1))
    words = []
    for _ in range(length):
        roll = rng.random()
        if roll < overlap and neighbor:
            pool = neighbor
        elif roll < overlap + 0.25:
            pool = shared
        else:
            pool = own
        words.append(pool[int(rng.integers(len(pool)))])
    return " ".join(words)


def make_dataset(
    n_unlabeled: int = 2000,
    priors: tuple[float, ...] = DEFAULT_PRIORS,
    seed: int = 0,
    taxonomy: Taxonomy | None = None,
    bootstrap_size: int = 60,
    dev_size: int = 60,
    test_size: int = 300,
    tokens_per_class: int = 40,
    shared_tokens: int = 30,
    overlap: float = 0.30,
    length_range: tuple[int, int] = (6, 12),
) -> SyntheticDataset:
    """Build unlabeled pool + labeled splits from class-conditioned vocabularies.

    priors weight the unlabeled pool; bootstrap/dev/test are drawn with the
    same priors (at least one item per class is forced into each labeled
    split so evaluation is defined everywhere). Rare classes borrow
    `overlap` of their tokens from the previous class's vocabulary.
    """
    taxonomy = taxonomy or default_taxonomy()
    n_classes = len(taxonomy)
    if len(priors) != n_classes:
        raise ValueError(f"got {len(priors)} priors for {n_classes} classes")
    if abs(sum(priors) - 1.0) > 1e-9:
        raise ValueError("priors must sum to 1")
    rng = np.random.default_rng(seed)
    vocabularies = [_class_tokens(c, tokens_per_class) for c in range(n_classes)]
    shared = [f"sharedw{j:02d}" for j in range(shared_tokens)]

    seen_keys: set[str] = set()

    def draw_text(class_index: int) -> str:
        neighbor = vocabularies[class_index - 1] if class_index > 0 else []
        while True:
            text = _sample_text(rng, vocabularies[class_index], neighbor, shared, overlap, length_range)
            key = dedup_key(text)
            if key not in seen_keys:
                seen_keys.add(key)
                return text

    def draw_classes(count: int, force_all: bool) -> list[int]:
        drawn = list(rng.choice(n_classes, size=count, p=np.asarray(priors)))
        if force_all:
            for c in range(n_classes):
                if c not in drawn:
                    drawn[int(rng.integers(count))] = c
        return [int(c) for c in drawn]

    oracle: dict[str, str] = {}

    def build_pool(prefix: str, count: int, labeled: bool, force_all: bool) -> Pool:
        pool = Pool("L" if labeled else "U")
        for i, class_index in enumerate(draw_classes(count, force_all)):
            label = taxonomy.classes[class_index]
            instance_id = f"{prefix}{i:05d}"
            pool.add(
                Instance(
                    id=instance_id,
                    text=draw_text(class_index),
                    label=label if labeled else None,
                    origin="bootstrap",
                    source="synthetic",
                )
            )
            oracle[instance_id] = label
        return pool

    return SyntheticDataset(
        taxonomy=taxonomy,
        unlabeled=build_pool("u", n_unlabeled, labeled=False, force_all=False),
        bootstrap=build_pool("b", bootstrap_size, labeled=True, force_all=True),
        dev=build_pool("d", dev_size, labeled=True, force_all=True),
        test=build_pool("t", test_size, labeled=True, force_all=True),
        oracle=oracle,
    )
