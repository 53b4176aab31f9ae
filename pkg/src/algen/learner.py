"""The trainable learner behind acquisition: per-class probabilities fitted on L.

Two realizations share one predict interface:

* NativeLearner: multinomial logistic regression over TF-IDF, trained by
  full-batch gradient descent. Deterministic, desk-scale, no extra services.
* RemoteLearner: thin client for the model-server protocol (POST /train,
  /predict_proba, /reset), which lets an external fine-tunable classifier
  act as the learner.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import featurize
from ._http import TransportError, post_json
from .corpus import Pool, Taxonomy
from .featurize import FeatureVector, Vocabulary

# Remote probability rows: renormalize small float drift, reject real violations.
SUM_REJECT_TOL = 1e-3


class LearnerError(ValueError):
    pass


class ProtocolError(RuntimeError):
    """Model-server protocol violation (bad shapes, invalid distributions)."""


class SupportsPredict(Protocol):
    def predict_proba_texts(self, texts: Sequence[str]) -> np.ndarray: ...


@dataclass
class NativeLearnerParams:
    learning_rate: float = 0.5
    epochs: int = 200
    l2_lambda: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise LearnerError("learning_rate must be > 0")
        if self.epochs < 1:
            raise LearnerError("epochs must be >= 1")
        if self.l2_lambda < 0:
            raise LearnerError("l2_lambda must be >= 0")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "l2_lambda": self.l2_lambda,
            "seed": self.seed,
        }


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def loss_and_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    l2_lambda: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + (lambda/2)*||W||^2 and its exact gradient.

    x is [n, features], y is [n] class indices. The bias is not regularized.
    """
    if x.shape[0] == 0:
        raise LearnerError("batch must be non-empty")
    n = x.shape[0]
    probs = softmax(x @ weights.T + bias)
    # log of the true-class probability, guarded away from log(0)
    true_p = probs[np.arange(n), y]
    ce = -float(np.mean(np.log(np.maximum(true_p, 1e-300))))
    loss = ce + 0.5 * l2_lambda * float(np.sum(weights**2))
    delta = probs
    delta[np.arange(n), y] -= 1.0
    grad_w = delta.T @ x / n + l2_lambda * weights
    grad_b = delta.sum(axis=0) / n
    return loss, grad_w, grad_b


class NativeLearner:
    """Softmax regression fitted on a labeled pool; immutable after fit."""

    def __init__(self, weights: np.ndarray, bias: np.ndarray, vocab: Vocabulary, taxonomy: Taxonomy, params: NativeLearnerParams):
        self.weights = weights
        self.bias = bias
        self.vocab = vocab
        self.taxonomy = taxonomy
        self.params = params

    def predict_proba(self, vec: FeatureVector) -> np.ndarray:
        if vec.dim != self.weights.shape[1]:
            raise LearnerError(f"dimension mismatch: vector has {vec.dim}, model has {self.weights.shape[1]}")
        logits = self.weights[:, vec.indices] @ vec.values + self.bias
        return softmax(logits)

    def predict_proba_matrix(self, x: np.ndarray) -> np.ndarray:
        if x.shape[1] != self.weights.shape[1]:
            raise LearnerError(f"dimension mismatch: matrix has {x.shape[1]}, model has {self.weights.shape[1]}")
        return softmax(x @ self.weights.T + self.bias)

    def predict_proba_texts(self, texts: Sequence[str]) -> np.ndarray:
        return self.predict_proba_matrix(featurize.matrix(self.vocab, texts))

    def to_dict(self) -> dict:
        return {
            "kind": "native",
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "params": self.params.to_dict(),
        }


def fit_native(
    labeled: Pool,
    vocab: Vocabulary,
    taxonomy: Taxonomy,
    params: NativeLearnerParams | None = None,
) -> NativeLearner:
    """Train from scratch on a labeled pool by full-batch gradient descent.

    Weights start at zero, so symmetry is broken by the data and the fit is
    deterministic for a fixed (pool, params, vocab). Classes absent from the
    pool are allowed and simply receive low probability mass.
    """
    if len(labeled) == 0:
        raise LearnerError("cannot fit on an empty labeled pool")
    params = params or NativeLearnerParams()
    texts = [inst.text for inst in labeled]
    x = featurize.matrix(vocab, texts)
    y = np.array([taxonomy.index(inst.label) for inst in labeled], dtype=np.int64)
    n_classes = len(taxonomy)
    weights = np.zeros((n_classes, x.shape[1]))
    bias = np.zeros(n_classes)
    for _ in range(params.epochs):
        _, grad_w, grad_b = loss_and_gradient(weights, bias, x, y, params.l2_lambda)
        weights -= params.learning_rate * grad_w
        bias -= params.learning_rate * grad_b
    return NativeLearner(weights, bias, vocab, taxonomy, params)


def validate_probability_rows(rows: Sequence[Sequence[float]], n_classes: int) -> np.ndarray:
    """Check each row is a probability simplex; renormalize float drift, reject the rest."""
    out = np.asarray(rows, dtype=np.float64)
    if out.ndim != 2 or out.shape[1] != n_classes:
        raise ProtocolError(f"expected rows of {n_classes} probabilities, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ProtocolError("invalid distribution: non-finite probability")
    if np.any(out < -1e-9) or np.any(out > 1.0 + SUM_REJECT_TOL):
        raise ProtocolError("invalid distribution: probability outside [0, 1]")
    sums = out.sum(axis=1)
    bad = np.abs(sums - 1.0) > SUM_REJECT_TOL
    if bad.any():
        row = int(np.argmax(bad))
        raise ProtocolError(f"invalid distribution: row {row} sums to {sums[row]:.6f}")
    out = np.clip(out, 0.0, None)
    return out / out.sum(axis=1, keepdims=True)


@dataclass
class RemoteConfig:
    """Training hyperparameters forwarded to the model server."""

    learning_rate: float = 2e-5
    batch_size: int = 16
    max_length: int = 50
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_length": self.max_length,
            "seed": self.seed,
        }
        out.update(self.extra)
        return out


class RemoteLearner:
    """Client for a model server implementing /train, /predict_proba, /reset."""

    def __init__(
        self,
        endpoint: str,
        taxonomy: Taxonomy,
        config: RemoteConfig | None = None,
        *,
        max_retries: int = 3,
        timeout: float = 120.0,
        backoff_base: float = 1.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.taxonomy = taxonomy
        self.config = config or RemoteConfig()
        self.max_retries = max_retries
        self.timeout = timeout
        self.backoff_base = backoff_base

    def _post(self, route: str, payload: dict) -> dict:
        try:
            return post_json(
                f"{self.endpoint}{route}",
                payload,
                max_retries=self.max_retries,
                timeout=self.timeout,
                backoff_base=self.backoff_base,
            )
        except TransportError as exc:
            detail = f": {exc.body}" if exc.body else ""
            raise ProtocolError(f"model server {route} failed ({exc}){detail}") from exc

    def train(self, labeled: Pool) -> None:
        """Retrain the server from its base checkpoint on exactly this pool."""
        payload = {
            "instances": [{"text": inst.text, "label": inst.label} for inst in labeled],
            "classes": list(self.taxonomy.classes),
            "config": self.config.to_dict(),
        }
        self._post("/train", payload)

    def predict_proba_texts(self, texts: Sequence[str]) -> np.ndarray:
        body = self._post("/predict_proba", {"texts": list(texts)})
        probs = body.get("probs")
        if not isinstance(probs, list) or len(probs) != len(texts):
            got = len(probs) if isinstance(probs, list) else "none"
            raise ProtocolError(f"prediction count mismatch: sent {len(texts)} texts, got {got} rows")
        return validate_probability_rows(probs, len(self.taxonomy))

    def reset(self) -> None:
        self._post("/reset", {})


def remote_train(endpoint: str, labeled: Pool, taxonomy: Taxonomy, config: RemoteConfig | None = None, **kwargs) -> None:
    RemoteLearner(endpoint, taxonomy, config, **kwargs).train(labeled)


def remote_predict(endpoint: str, texts: Sequence[str], taxonomy: Taxonomy, **kwargs) -> np.ndarray:
    return RemoteLearner(endpoint, taxonomy, **kwargs).predict_proba_texts(texts)
