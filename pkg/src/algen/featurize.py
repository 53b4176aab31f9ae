"""Text vectorization: deterministic TF-IDF plus an optional remote-embedding client.

The default representation is unigram TF-IDF with smoothed idf,
idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1, L2-normalized per document.
It is cheap, dependency-free, and fully deterministic; a remote embedding
endpoint can be used instead when semantic vectors are wanted.
"""

from __future__ import annotations

import math
import os
import re
from collections import Counter
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from ._http import post_json

if TYPE_CHECKING:
    from .corpus import Pool

# Unicode alphanumeric runs; underscore is a separator like any other symbol.
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


class FeaturizeError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.casefold())


@dataclass(frozen=True)
class FeatureVector:
    """Sparse L2-normalized vector. indices strictly increasing, weights finite."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim)
        dense[self.indices] = self.values
        return dense


class Vocabulary:
    """Immutable term index fitted on a corpus; indices follow lexicographic term order."""

    def __init__(self, terms: Sequence[str], df: Sequence[int], n_docs: int):
        self.terms = list(terms)
        self.index = {term: i for i, term in enumerate(self.terms)}
        self.df = np.asarray(df, dtype=np.int64)
        self.n_docs = int(n_docs)
        if len(self.df) != len(self.terms):
            raise FeaturizeError("df length must match term count")
        # idf(t) = ln((1+n) / (1+df)) + 1; df == n_docs gives exactly 1.
        self.idf = np.log((1.0 + self.n_docs) / (1.0 + self.df)) + 1.0

    def __len__(self) -> int:
        return len(self.terms)

    def to_dict(self) -> dict:
        return {"terms": self.terms, "df": self.df.tolist(), "n_docs": self.n_docs}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(data["terms"], data["df"], data["n_docs"])


def fit(pool: "Pool | Iterable") -> Vocabulary:
    """Fit a vocabulary on a pool's texts. Every term seen in at least one document is kept."""
    texts = [inst.text for inst in pool]
    if not texts:
        raise FeaturizeError("cannot fit a vocabulary on an empty pool")
    df: Counter[str] = Counter()
    for text in texts:
        df.update(set(tokenize(text)))
    terms = sorted(df)
    return Vocabulary(terms, [df[t] for t in terms], len(texts))


def transform(vocab: Vocabulary, text: str) -> FeatureVector:
    """TF-IDF transform of one text; out-of-vocabulary terms are ignored.

    Texts with no in-vocabulary term map to the zero vector (norm 0); all
    others come out with norm 1.
    """
    counts = Counter(tokenize(text))
    pairs = sorted((vocab.index[t], n) for t, n in counts.items() if t in vocab.index)
    if not pairs:
        return FeatureVector(np.empty(0, dtype=np.int64), np.empty(0), len(vocab))
    indices = np.array([i for i, _ in pairs], dtype=np.int64)
    tf = np.array([n for _, n in pairs], dtype=np.float64)
    weights = tf * vocab.idf[indices]
    weights = weights / math.sqrt(float(np.sum(weights**2)))
    return FeatureVector(indices, weights, len(vocab))


def matrix(vocab: Vocabulary, texts: Sequence[str]) -> np.ndarray:
    """Dense [n_texts, |vocab|] TF-IDF matrix; rows match transform() exactly."""
    out = np.zeros((len(texts), len(vocab)))
    for row, text in enumerate(texts):
        vec = transform(vocab, text)
        out[row, vec.indices] = vec.values
    return out


def distance(a: FeatureVector, b: FeatureVector) -> float:
    """Euclidean distance; for unit vectors this equals sqrt(2 - 2*cos(a, b)).

    Computed over the merged index difference, so identical vectors give
    exactly 0 with no float residue.
    """
    if a.dim != b.dim:
        raise FeaturizeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    diff: dict[int, float] = {}
    for i, v in zip(a.indices.tolist(), a.values.tolist()):
        diff[i] = v
    for i, v in zip(b.indices.tolist(), b.values.tolist()):
        diff[i] = diff.get(i, 0.0) - v
    # Sorted index order makes the summation order, and so the result,
    # independent of argument order.
    return math.sqrt(sum(diff[i] ** 2 for i in sorted(diff)))


def embed_remote(
    endpoint: str,
    texts: Sequence[str],
    *,
    max_retries: int = 3,
    timeout: float = 30.0,
    backoff_base: float = 1.0,
    api_key_env: str = "ALGEN_EMBED_API_KEY",
) -> np.ndarray:
    """Fetch dense embeddings from an embeddings-API-compatible endpoint.

    Sends POST {"input": [...texts]} and expects {"data": [{"embedding": [...]}, ...]}
    in input order. Vectors are L2-normalized on receipt.
    """
    if not texts:
        raise FeaturizeError("texts must be non-empty")
    headers = None
    api_key = os.environ.get(api_key_env)
    if api_key:
        headers = {"Authorization": f"Bearer {api_key}"}
    body = post_json(
        endpoint,
        {"input": list(texts)},
        max_retries=max_retries,
        timeout=timeout,
        backoff_base=backoff_base,
        headers=headers,
    )
    data = body.get("data") if isinstance(body, dict) else None
    if not isinstance(data, list):
        raise FeaturizeError('embedding response missing "data" list')
    if len(data) != len(texts):
        raise FeaturizeError(f"embedding count mismatch: sent {len(texts)} texts, got {len(data)} vectors")
    rows = []
    dim = None
    for i, item in enumerate(data):
        emb = item.get("embedding")
        if not isinstance(emb, list):
            raise FeaturizeError(f"embedding row {i} malformed")
        if dim is None:
            dim = len(emb)
        elif len(emb) != dim:
            raise FeaturizeError(f"embedding dimension mismatch at row {i}: {len(emb)} vs {dim}")
        rows.append(emb)
    out = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return out / norms
