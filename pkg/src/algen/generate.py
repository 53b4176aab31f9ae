"""Template-driven LLM variation generation and validation.

For each newly labeled instance, the LLM is prompted to produce k distinct
rephrasings that stay in the human-assigned class. Responses are parsed
defensively (strict JSON array first, enumerated-list fallback), deduplicated
against the labeled pool, and carry the parent's label forward.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ._http import TransportError, post_json
from .corpus import Instance, Pool, dedup_key
from .learner import SupportsPredict

log = logging.getLogger(__name__)

PLACEHOLDERS = ("{text}", "{label}", "{k}")

_PLACEHOLDER_RE = re.compile(r"\{(text|label|k)\}")
_ENUMERATED_LINE = re.compile(r"^\s*(?:\d+[.)]\s+|[-*]\s+)(.+?)\s*$")


class GenerationError(RuntimeError):
    pass


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Template:
    """Prompting structure with {text}, {label}, {k} placeholders in the user turn."""

    name: str
    system_text: str
    user_text: str
    k: int = 5

    def __post_init__(self) -> None:
        if self.k < 1:
            raise TemplateError("k must be a positive integer")
        for placeholder in PLACEHOLDERS:
            count = self.user_text.count(placeholder)
            if count != 1:
                raise TemplateError(
                    f"template {self.name!r}: user_text must contain {placeholder} exactly once, found {count}"
                )

    def to_dict(self) -> dict:
        return {"name": self.name, "system_text": self.system_text, "user_text": self.user_text, "k": self.k}

    @classmethod
    def from_dict(cls, data: dict) -> "Template":
        try:
            return cls(
                name=data["name"],
                system_text=data["system_text"],
                user_text=data["user_text"],
                k=int(data.get("k", 5)),
            )
        except KeyError as exc:
            raise TemplateError(f"template file missing field {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "Template":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_template() -> Template:
    text = resources.files("algen").joinpath("templates/default.json").read_text(encoding="utf-8")
    return Template.from_dict(json.loads(text))


@dataclass(frozen=True)
class PromptPair:
    """Rendered system/user prompts plus the render inputs (used by mock mode)."""

    system: str
    user: str
    text: str
    label: str
    k: int


@dataclass
class LlmConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    temperature: float = 0.7
    max_retries: int = 3
    timeout: float = 60.0
    mock: bool = False
    backoff_base: float = 1.0
    api_key_env: str = "ALGEN_LLM_API_KEY"

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise TemplateError("temperature must be >= 0")
        if self.max_retries < 0:
            raise TemplateError("max_retries must be >= 0")

    def to_dict(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "model": self.model,
            "temperature": self.temperature,
            "max_retries": self.max_retries,
            "timeout": self.timeout,
            "mock": self.mock,
            "backoff_base": self.backoff_base,
            "api_key_env": self.api_key_env,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LlmConfig":
        return cls(**data)


def render(template: Template, instance: Instance, label: str) -> PromptPair:
    """Substitute placeholders in a single pass; substituted values are never re-scanned."""
    mapping = {"text": instance.text, "label": label, "k": str(template.k)}
    user = _PLACEHOLDER_RE.sub(lambda m: mapping[m.group(1)], template.user_text)
    return PromptPair(system=template.system_text, user=user, text=instance.text, label=label, k=template.k)


def mock_response(prompt: PromptPair) -> str:
    """Deterministic stand-in for the LLM: exactly k enumerated variations of the input."""
    return json.dumps([f"variation {i}: {prompt.text}" for i in range(1, prompt.k + 1)])


def call_llm(cfg: LlmConfig, prompt: PromptPair) -> str:
    """First choice's message content from a chat-completions endpoint.

    Retries with exponential backoff on 429/5xx/timeouts. In mock mode no
    network is touched and the deterministic mock response is returned.
    """
    if cfg.mock:
        return mock_response(prompt)
    headers = None
    api_key = os.environ.get(cfg.api_key_env)
    if api_key:
        headers = {"Authorization": f"Bearer {api_key}"}
    payload = {
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": [
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": prompt.user},
        ],
    }
    try:
        body = post_json(
            cfg.endpoint,
            payload,
            max_retries=cfg.max_retries,
            timeout=cfg.timeout,
            backoff_base=cfg.backoff_base,
            headers=headers,
        )
    except TransportError as exc:
        raise GenerationError(f"LLM call failed: {exc}") from exc
    try:
        return body["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise GenerationError("LLM response missing choices[0].message.content") from None


def _first_json_string_array(response: str) -> list[str] | None:
    decoder = json.JSONDecoder()
    for start in range(len(response)):
        if response[start] != "[":
            continue
        try:
            value, _ = decoder.raw_decode(response, start)
        except json.JSONDecodeError:
            continue
        if isinstance(value, list) and value and all(isinstance(v, str) for v in value):
            return value
    return None


def parse_variations(response: str, k: int) -> list[str]:
    """Extract up to k candidate variations from a raw LLM response.

    Primary parse is the first JSON array of strings anywhere in the text;
    fallback accepts enumerated lines ("1.", "2)", "- "). Excess items are
    truncated to k; a deficit is accepted with a warning.
    """
    items = _first_json_string_array(response)
    if items is None:
        items = []
        for line in response.splitlines():
            match = _ENUMERATED_LINE.match(line)
            if match:
                items.append(match.group(1))
    items = [item for item in items if item.strip()]
    if not items:
        raise GenerationError(f"unparseable generation: {response[:200]!r}")
    if len(items) < k:
        log.warning("generation deficit: wanted %d variations, parsed %d", k, len(items))
    return items[:k]


@dataclass
class Variation:
    text: str
    parent_id: str
    label: str
    relation_ok: bool = True


def filter_variations(
    candidates: list[str],
    parent: Instance,
    label: str,
    l: Pool,
    mode: str = "inherit",
    learner: SupportsPredict | None = None,
    threshold: float = 0.9,
) -> list[Variation]:
    """Drop empty, duplicate, or (optionally) label-inconsistent candidates.

    Duplicates are detected by dedup key against the parent, everything in L,
    and earlier candidates. Mode "inherit" keeps every survivor under the
    parent's label; "learner_consistent" additionally vetoes candidates the
    learner confidently places in another class (max probability above the
    threshold with a different argmax).
    """
    if mode not in ("inherit", "learner_consistent"):
        raise GenerationError(f"unknown relation mode {mode!r}")
    if mode == "learner_consistent" and learner is None:
        raise GenerationError("learner_consistent mode requires a learner")
    seen = {dedup_key(inst.text) for inst in l}
    seen.add(dedup_key(parent.text))
    kept: list[Variation] = []
    for text in candidates:
        if not text.strip():
            continue
        key = dedup_key(text)
        if key in seen:
            continue
        seen.add(key)
        kept.append(Variation(text=text, parent_id=parent.id, label=label))
    if mode == "learner_consistent" and kept:
        assert learner is not None
        probs = learner.predict_proba_texts([v.text for v in kept])
        argmax = np.argmax(probs, axis=1)
        maxp = probs[np.arange(len(kept)), argmax]
        label_idx = learner.taxonomy.index(label)
        survivors = []
        for i, variation in enumerate(kept):
            # Conservative veto: only drop when the learner is confident AND disagrees.
            if maxp[i] > threshold and int(argmax[i]) != label_idx:
                log.info("learner veto: dropped variation of %s (confidence %.3f)", parent.id, maxp[i])
                continue
            survivors.append(variation)
        kept = survivors
    return kept


def generate_variations(
    cfg: LlmConfig,
    template: Template,
    parent: Instance,
    label: str,
    l: Pool,
    mode: str = "inherit",
    learner: SupportsPredict | None = None,
    threshold: float = 0.9,
) -> list[Variation]:
    """Render, call, parse, and filter: the full per-instance generation step."""
    prompt = render(template, parent, label)
    response = call_llm(cfg, prompt)
    candidates = parse_variations(response, template.k)
    return filter_variations(candidates, parent, label, l, mode=mode, learner=learner, threshold=threshold)
