"""Fine-tunable text classifier backing the model-server protocol.

The default backend is a small transformer encoder trained from scratch on
CPU: hashed unigram tokens, learned positional embeddings, one encoder
block, mean pooling, linear head. It is deliberately tiny so /train on a
few hundred instances completes in seconds while keeping the same training
surface (learning rate, batch size, max length, seed) as a pretrained
checkpoint would. Pass any HuggingFace model name as `base` to swap in a
pretrained encoder when its weights are available locally.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import torch
from torch import nn

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

LOCAL_TINY = "local-tiny"


@dataclass
class AdapterConfig:
    base: str = LOCAL_TINY
    learning_rate: float = 2e-5
    batch_size: int = 16
    max_length: int = 50
    seed: int = 0
    device: str = "cpu"
    epochs: int = 30
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_request(cls, payload: dict) -> "AdapterConfig":
        payload = dict(payload or {})
        known = {}
        for key in ("base", "learning_rate", "batch_size", "max_length", "seed", "device", "epochs"):
            if key in payload:
                known[key] = payload.pop(key)
        return cls(**known, extra=payload)


def hash_tokenize(text: str, vocab_size: int, max_length: int) -> list[int]:
    """Stable hashed token ids; 0 is reserved for padding."""
    ids = []
    for token in _TOKEN.findall(text.casefold())[:max_length]:
        digest = hashlib.md5(token.encode("utf-8")).digest()
        ids.append(1 + int.from_bytes(digest[:4], "big") % (vocab_size - 1))
    return ids or [1]


class TinyTransformer(nn.Module):
    def __init__(self, n_classes: int, vocab_size: int = 4096, dim: int = 64, heads: int = 4, max_length: int = 50):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_length = max_length
        self.embed = nn.Embedding(vocab_size, dim, padding_idx=0)
        self.positional = nn.Embedding(max_length, dim)
        self.encoder = nn.TransformerEncoderLayer(
            d_model=dim, nhead=heads, dim_feedforward=dim * 2, dropout=0.0, batch_first=True
        )
        self.head = nn.Linear(dim, n_classes)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(token_ids.shape[1], device=token_ids.device)
        hidden = self.embed(token_ids) + self.positional(positions)[None, :, :]
        padding_mask = token_ids == 0
        hidden = self.encoder(hidden, src_key_padding_mask=padding_mask)
        keep = (~padding_mask).float().unsqueeze(-1)
        pooled = (hidden * keep).sum(dim=1) / keep.sum(dim=1).clamp(min=1.0)
        return self.head(pooled)


class TextClassifier:
    """Train-from-base classifier with deterministic behavior per seed."""

    def __init__(self, classes: list[str], config: AdapterConfig):
        if config.base != LOCAL_TINY:
            raise NotImplementedError(
                f"pretrained base {config.base!r} requires locally available weights; "
                f'use base "{LOCAL_TINY}" for the self-contained backend'
            )
        self.classes = list(classes)
        self.config = config
        torch.manual_seed(config.seed)
        self.model = TinyTransformer(n_classes=len(classes), max_length=config.max_length)
        self.model.to(config.device)

    def _batch(self, texts: list[str]) -> torch.Tensor:
        rows = [hash_tokenize(t, self.model.vocab_size, self.config.max_length) for t in texts]
        width = max(len(r) for r in rows)
        padded = [r + [0] * (width - len(r)) for r in rows]
        return torch.tensor(padded, dtype=torch.long, device=self.config.device)

    def train(self, instances: list[dict]) -> None:
        config = self.config
        torch.manual_seed(config.seed)
        self.model.train()
        optimizer = torch.optim.Adam(self.model.parameters(), lr=config.learning_rate)
        loss_fn = nn.CrossEntropyLoss()
        label_index = {name: i for i, name in enumerate(self.classes)}
        texts = [item["text"] for item in instances]
        labels = torch.tensor([label_index[item["label"]] for item in instances], device=config.device)
        n = len(texts)
        for _ in range(config.epochs):
            for start in range(0, n, config.batch_size):
                batch_texts = texts[start : start + config.batch_size]
                batch_labels = labels[start : start + config.batch_size]
                optimizer.zero_grad()
                logits = self.model(self._batch(batch_texts))
                loss = loss_fn(logits, batch_labels)
                loss.backward()
                optimizer.step()
        self.model.eval()

    @torch.no_grad()
    def predict_proba(self, texts: list[str]) -> list[list[float]]:
        self.model.eval()
        logits = self.model(self._batch(texts)).double()
        probs = torch.softmax(logits, dim=-1)
        # Exact renormalization so serialized rows meet the 1e-6 sum contract.
        probs = probs / probs.sum(dim=-1, keepdim=True)
        return probs.cpu().tolist()
