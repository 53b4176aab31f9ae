"""Budgeted select -> annotate -> generate -> retrain iterations with resumable state.

One run owns its pools exclusively. Every source of randomness is derived
from (config seed, iteration number), so a resumed run replays exactly like
an uninterrupted one and twin runs produce identical event histories. Events
carry logical timestamps (a monotone sequence number plus the iteration
stamp) rather than wall-clock time for the same reason.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np

from . import featurize, strategy
from .cluster import Clustering, kmeans_fit
from .corpus import Instance, Pool, Taxonomy, default_taxonomy, promote
from .featurize import Vocabulary
from .generate import (
    GenerationError,
    LlmConfig,
    Template,
    call_llm,
    default_template,
    filter_variations,
    parse_variations,
    render,
)
from .learner import (
    NativeLearner,
    NativeLearnerParams,
    RemoteConfig,
    RemoteLearner,
    fit_native,
)

CHECKPOINT_SCHEMA_VERSION = 1

ANNOTATOR_KINDS = ("scripted", "interactive", "service")

Observer = Callable[[str, dict], None]


class OrchestrationError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


class Annotator(Protocol):
    def annotate(self, instances: Sequence[Instance], taxonomy: Taxonomy) -> dict[str, str]: ...


class ScriptedAnnotator:
    """Answers from an id -> label mapping; any gap is a hard error."""

    def __init__(self, answers: dict[str, str] | str | Path):
        if isinstance(answers, (str, Path)):
            with open(answers, encoding="utf-8") as fh:
                answers = json.load(fh)
        if not isinstance(answers, dict):
            raise OrchestrationError("scripted answers must be a JSON object of id -> label")
        self.answers = dict(answers)

    def annotate(self, instances: Sequence[Instance], taxonomy: Taxonomy) -> dict[str, str]:
        missing = [inst.id for inst in instances if inst.id not in self.answers]
        if missing:
            raise OrchestrationError(f"scripted answers missing ids: {missing}")
        out = {}
        for inst in instances:
            label = self.answers[inst.id]
            if label not in taxonomy:
                raise OrchestrationError(f"scripted answer for {inst.id!r} has unknown label {label!r}")
            out[inst.id] = label
        return out


class InteractiveAnnotator:
    """Terminal prompt; re-asks until the answer names a taxonomy class."""

    def __init__(self, reader: Callable[[str], str] = input, writer: Callable[[str], None] = print):
        self._read = reader
        self._write = writer

    def annotate(self, instances: Sequence[Instance], taxonomy: Taxonomy) -> dict[str, str]:
        out: dict[str, str] = {}
        classes = list(taxonomy.classes)
        for pos, inst in enumerate(instances, start=1):
            self._write(f"\n[{pos}/{len(instances)}] {inst.text}")
            for i, name in enumerate(classes, start=1):
                self._write(f"  {i}. {name}")
            while True:
                raw = self._read("label (number or name): ").strip()
                if raw.isdigit() and 1 <= int(raw) <= len(classes):
                    out[inst.id] = classes[int(raw) - 1]
                    break
                if raw in taxonomy:
                    out[inst.id] = raw
                    break
                self._write(f"  not a taxonomy class: {raw!r}")
        return out


@dataclass
class RunConfig:
    strategy: str = "cluster_al"
    budget: int = 100
    batch: int = 20
    clusters: int = 20
    variations: int = 5
    seed: int = 0
    annotator: str = "scripted"
    llm: LlmConfig = field(default_factory=LlmConfig)
    learner_kind: str = "native"
    learner_params: NativeLearnerParams = field(default_factory=NativeLearnerParams)
    remote_endpoint: str | None = None
    remote_config: RemoteConfig = field(default_factory=RemoteConfig)
    template: Template | None = None
    relation_mode: str = "inherit"
    relation_threshold: float = 0.9
    taxonomy: Taxonomy = field(default_factory=default_taxonomy)
    refresh_clusters: bool = False
    generation_concurrency: int = 4

    def __post_init__(self) -> None:
        if self.strategy not in strategy.STRATEGIES:
            raise OrchestrationError(f"unknown strategy {self.strategy!r}; choose from {strategy.STRATEGIES}")
        if self.budget < 1:
            raise OrchestrationError("budget must be positive")
        if self.batch < 1:
            raise OrchestrationError("batch must be positive")
        if self.batch > self.budget:
            raise OrchestrationError(f"batch ({self.batch}) must not exceed budget ({self.budget})")
        if self.clusters < 1:
            raise OrchestrationError("clusters must be positive")
        if self.variations < 0:
            raise OrchestrationError("variations must be non-negative")
        if self.seed < 0:
            raise OrchestrationError("seed must be non-negative")
        if self.annotator not in ANNOTATOR_KINDS:
            raise OrchestrationError(f"unknown annotator {self.annotator!r}; choose from {ANNOTATOR_KINDS}")
        if self.learner_kind not in ("native", "remote"):
            raise OrchestrationError('learner_kind must be "native" or "remote"')
        if self.learner_kind == "remote" and not self.remote_endpoint:
            raise OrchestrationError("remote learner needs remote_endpoint")
        if self.relation_mode not in ("inherit", "learner_consistent"):
            raise OrchestrationError('relation_mode must be "inherit" or "learner_consistent"')
        if self.generation_concurrency < 1:
            raise OrchestrationError("generation_concurrency must be >= 1")
        if self.template is None:
            self.template = default_template()
        if self.variations >= 1 and self.template.k != self.variations:
            self.template = replace(self.template, k=self.variations)

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "budget": self.budget,
            "batch": self.batch,
            "clusters": self.clusters,
            "variations": self.variations,
            "seed": self.seed,
            "annotator": self.annotator,
            "llm": self.llm.to_dict(),
            "learner_kind": self.learner_kind,
            "learner_params": self.learner_params.to_dict(),
            "remote_endpoint": self.remote_endpoint,
            "remote_config": self.remote_config.to_dict(),
            "template": self.template.to_dict() if self.template else None,
            "relation_mode": self.relation_mode,
            "relation_threshold": self.relation_threshold,
            "taxonomy": self.taxonomy.to_dict(),
            "refresh_clusters": self.refresh_clusters,
            "generation_concurrency": self.generation_concurrency,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if "llm" in data and isinstance(data["llm"], dict):
            data["llm"] = LlmConfig.from_dict(data["llm"])
        if "learner_params" in data and isinstance(data["learner_params"], dict):
            data["learner_params"] = NativeLearnerParams(**data["learner_params"])
        if "remote_config" in data and isinstance(data["remote_config"], dict):
            rc = dict(data["remote_config"])
            known = {k: rc.pop(k) for k in ("learning_rate", "batch_size", "max_length", "seed") if k in rc}
            data["remote_config"] = RemoteConfig(**known, extra=rc)
        if "template" in data and isinstance(data["template"], dict):
            data["template"] = Template.from_dict(data["template"])
        if "taxonomy" in data and isinstance(data["taxonomy"], dict):
            data["taxonomy"] = Taxonomy.from_dict(data["taxonomy"])
        return cls(**data)


@dataclass
class RunState:
    config: RunConfig
    u: Pool
    l: Pool
    remaining_budget: int
    iteration: int
    vocab: Vocabulary
    learner: NativeLearner | RemoteLearner
    clustering: Clustering | None
    bootstrap_ids: frozenset[str]
    dev: Pool | None = None
    history: list[dict] = field(default_factory=list)
    _seq: int = 0

    @property
    def taxonomy(self) -> Taxonomy:
        return self.config.taxonomy

    def log(self, event_type: str, iteration: int, **payload) -> None:
        event = {"seq": self._seq, "iteration": iteration, "type": event_type}
        event.update(payload)
        self.history.append(event)
        self._seq += 1

    def acquired(self) -> Pool:
        """The in-run additions to L: human labels plus generated variations."""
        return Pool("L", (inst.copy() for inst in self.l if inst.origin in ("human", "generated")))

    def class_counts(self, pool: Pool | None = None) -> dict[str, int]:
        pool = pool if pool is not None else self.acquired()
        counts = {name: 0 for name in self.taxonomy.classes}
        for inst in pool:
            counts[inst.label] += 1
        return counts


def iteration_seed(config_seed: int, iteration: int) -> int:
    """Stable per-iteration seed; the (seed, iteration) pair is the whole RNG cursor."""
    return int(np.random.SeedSequence([config_seed, iteration]).generate_state(1)[0])


def _fit_learner(config: RunConfig, l: Pool, vocab: Vocabulary) -> NativeLearner | RemoteLearner:
    if config.learner_kind == "native":
        return fit_native(l, vocab, config.taxonomy, config.learner_params)
    learner = RemoteLearner(config.remote_endpoint, config.taxonomy, config.remote_config)
    learner.train(l)
    return learner


def init_run(config: RunConfig, u: Pool, bootstrap: Pool, dev: Pool | None = None) -> RunState:
    """Copy the pools, fit the first learner on the bootstrap set, cluster U if needed."""
    if u.kind != "U":
        raise OrchestrationError("u must be an unlabeled pool")
    if bootstrap.kind != "L" or len(bootstrap) == 0:
        raise OrchestrationError("bootstrap must be a non-empty labeled pool")
    if len(u) < config.budget:
        raise OrchestrationError(f"budget exceeds pool: budget={config.budget} but |U|={len(u)}")
    overlap = set(u.ids()) & set(bootstrap.ids())
    if overlap:
        raise OrchestrationError(f"U and bootstrap share ids: {sorted(overlap)[:5]}")
    for inst in bootstrap:
        if inst.label not in config.taxonomy:
            raise OrchestrationError(f"bootstrap instance {inst.id!r} has unknown label {inst.label!r}")

    u = u.copy()
    l = Pool("L")
    for inst in bootstrap:
        # Whatever provenance the file carried, inside this run the set IS the bootstrap.
        copy = inst.copy()
        copy.origin = "bootstrap"
        copy.parent_id = None
        copy.iteration = None
        l.add(copy)
    vocab = featurize.fit(u)
    learner = _fit_learner(config, l, vocab)
    clustering = None
    if config.strategy == "cluster_al":
        vectors = featurize.matrix(vocab, [inst.text for inst in u])
        clustering = kmeans_fit(vectors, config.clusters, seed=config.seed, ids=u.ids())
    state = RunState(
        config=config,
        u=u,
        l=l,
        remaining_budget=config.budget,
        iteration=0,
        vocab=vocab,
        learner=learner,
        clustering=clustering,
        bootstrap_ids=frozenset(bootstrap.ids()),
        dev=dev.copy() if dev is not None else None,
    )
    state.log(
        "init",
        0,
        strategy=config.strategy,
        budget=config.budget,
        batch=config.batch,
        unlabeled=len(u),
        bootstrap=len(l),
        clusters=clustering.sizes() if clustering else None,
    )
    return state


def _select(state: RunState) -> strategy.Selection:
    config = state.config
    n = config.batch
    if config.strategy == "random":
        return strategy.select_random(state.u, n, iteration_seed(config.seed, state.iteration))
    if config.strategy == "topn":
        return strategy.select_topn(state.u, state.learner, n)
    if config.strategy == "coreset":
        return strategy.select_coreset(state.u, state.l, n, state.vocab)
    if config.refresh_clusters and state.iteration > 0:
        vectors = featurize.matrix(state.vocab, [inst.text for inst in state.u])
        state.clustering = kmeans_fit(
            vectors, config.clusters, seed=iteration_seed(config.seed, state.iteration), ids=state.u.ids()
        )
    assert state.clustering is not None
    # Clustering was fitted over the initial U; promoted ids are simply stale.
    live = {i: c for i, c in state.clustering.assignment.items() if i in state.u}
    live_clustering = replace(state.clustering, assignment=live)
    return strategy.select_cluster_al(state.u, state.learner, live_clustering, n)


def _generate_for(state: RunState, parent: Instance) -> tuple[str, list[str] | None, str | None]:
    """Concurrent-safe phase of generation: render, call, parse. Never touches L."""
    config = state.config
    try:
        prompt = render(config.template, parent, parent.label)
        response = call_llm(config.llm, prompt)
        return parent.id, parse_variations(response, config.template.k), None
    except GenerationError as exc:
        return parent.id, None, str(exc)


def run_iteration(state: RunState, annotator: Annotator, observer: Observer | None = None) -> RunState:
    """One full loop body: select N, annotate, generate up to N*k variations, retrain."""
    config = state.config
    if state.remaining_budget < config.batch:
        raise OrchestrationError(
            f"remaining budget {state.remaining_budget} is below batch size {config.batch}"
        )
    notify = observer or (lambda phase, payload: None)
    iteration = state.iteration

    notify("selecting", {"iteration": iteration})
    selection = _select(state)
    state.log(
        "selection",
        iteration,
        strategy=config.strategy,
        chosen=list(selection.chosen),
        scores={k: round(v, 10) for k, v in selection.scores.items()} if selection.scores else None,
    )

    chosen_instances = [state.u.get(i) for i in selection.chosen]
    notify("awaiting_labels", {"iteration": iteration, "pending": list(selection.chosen)})
    labels = annotator.annotate(chosen_instances, config.taxonomy)
    missing = [inst.id for inst in chosen_instances if inst.id not in labels]
    if missing:
        raise OrchestrationError(f"annotator returned no label for: {missing}")
    for inst in chosen_instances:
        if labels[inst.id] not in config.taxonomy:
            raise OrchestrationError(f"annotator label {labels[inst.id]!r} is outside the taxonomy")

    for instance_id in selection.chosen:
        promote(state.u, state.l, instance_id, labels[instance_id], config.taxonomy, iteration=iteration)
        state.log("label", iteration, id=instance_id, label=labels[instance_id])

    generated_added = 0
    parse_deficits = 0
    dedup_dropped = 0
    if config.variations > 0:
        notify("generating", {"iteration": iteration})
        parents = sorted((state.l.get(i) for i in selection.chosen), key=lambda inst: inst.id)
        if config.llm.mock or config.generation_concurrency == 1:
            raw_results = [_generate_for(state, parent) for parent in parents]
        else:
            with ThreadPoolExecutor(max_workers=config.generation_concurrency) as pool:
                raw_results = list(pool.map(lambda p: _generate_for(state, p), parents))
        for parent, (parent_id, candidates, error) in zip(parents, raw_results):
            if error is not None:
                state.log("generation_failed", iteration, id=parent_id, error=error)
                continue
            assert candidates is not None
            variations = filter_variations(
                candidates,
                parent,
                parent.label,
                state.l,
                mode=config.relation_mode,
                learner=state.learner if config.relation_mode == "learner_consistent" else None,
                threshold=config.relation_threshold,
            )
            parse_deficits += config.template.k - len(candidates)
            dedup_dropped += len(candidates) - len(variations)
            added_ids = []
            for ordinal, variation in enumerate(variations, start=1):
                child = Instance(
                    id=f"{parent.id}#g{ordinal}",
                    text=variation.text,
                    label=variation.label,
                    origin="generated",
                    parent_id=parent.id,
                    iteration=iteration,
                    source="mock" if config.llm.mock else config.llm.model,
                )
                state.l.add(child)
                added_ids.append(child.id)
            generated_added += len(added_ids)
            state.log("generation", iteration, id=parent_id, parsed=len(candidates), kept=len(added_ids), ids=added_ids)

    notify("retraining", {"iteration": iteration})
    state.learner = _fit_learner(config, state.l, state.vocab)
    retrain_payload: dict = {"labeled_size": len(state.l)}
    if state.dev is not None and len(state.dev) > 0:
        from .evaluation import evaluate_learner

        retrain_payload["dev_macro_f1"] = round(
            evaluate_learner(state.learner, state.dev, config.taxonomy).macro_f1, 10
        )
    state.log("retrain", iteration, **retrain_payload)

    state.remaining_budget -= config.batch
    state.iteration += 1
    state.log(
        "iteration_complete",
        iteration,
        remaining_budget=state.remaining_budget,
        human_added=len(selection.chosen),
        generated_added=generated_added,
        parse_deficits=parse_deficits,
        dedup_dropped=dedup_dropped,
        labeled_size=len(state.l),
        class_counts=state.class_counts(),
    )
    validate_state(state)
    notify("boundary", {"iteration": state.iteration, "remaining_budget": state.remaining_budget})
    return state


def run_until_budget(state: RunState, annotator: Annotator, observer: Observer | None = None) -> RunState:
    """Repeat iterations while a full batch of budget remains and U is non-empty."""
    ran = 0
    while state.remaining_budget >= state.config.batch and len(state.u) > 0:
        run_iteration(state, annotator, observer)
        ran += 1
    if ran == 0:
        state.log("noop", state.iteration, remaining_budget=state.remaining_budget)
    return state


def validate_state(state: RunState) -> None:
    """Assert every cross-pool invariant; raises OrchestrationError on violation."""
    config = state.config
    expected_remaining = config.budget - state.iteration * config.batch
    if state.remaining_budget != expected_remaining:
        raise OrchestrationError(
            f"budget invariant violated: remaining {state.remaining_budget}, expected {expected_remaining}"
        )
    human = sum(1 for inst in state.l if inst.origin == "human")
    if human != state.iteration * config.batch:
        raise OrchestrationError(
            f"human-label invariant violated: {human} labeled, expected {state.iteration * config.batch}"
        )
    overlap = set(state.u.ids()) & set(state.l.ids())
    if overlap:
        raise OrchestrationError(f"U and L share ids: {sorted(overlap)[:5]}")
    for inst in state.l:
        if inst.origin == "generated":
            if inst.parent_id not in state.l:
                raise OrchestrationError(f"generated {inst.id!r} has unresolved parent {inst.parent_id!r}")
            parent = state.l.get(inst.parent_id)
            if parent.origin not in ("human", "bootstrap"):
                raise OrchestrationError(f"generated {inst.id!r} has generated parent {parent.id!r}")
            if state.config.relation_mode == "inherit" and inst.label != parent.label:
                raise OrchestrationError(f"generated {inst.id!r} label differs from parent's")


def _training_fingerprint(l: Pool) -> str:
    digest = hashlib.sha256()
    for inst in sorted(l, key=lambda i: i.id):
        digest.update(f"{inst.id}\x00{inst.text}\x00{inst.label}\x1e".encode("utf-8"))
    return digest.hexdigest()


def checkpoint(state: RunState, path: str | Path) -> None:
    """Serialize the full run state as one JSON document at an iteration boundary."""
    if isinstance(state.learner, NativeLearner):
        learner_doc = state.learner.to_dict()
    else:
        learner_doc = {"kind": "remote", "fingerprint": _training_fingerprint(state.l)}
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "config": state.config.to_dict(),
        "u": [inst.to_dict() for inst in state.u],
        "l": [inst.to_dict() for inst in state.l],
        "dev": [inst.to_dict() for inst in state.dev] if state.dev is not None else None,
        "remaining_budget": state.remaining_budget,
        "iteration": state.iteration,
        "vocab": state.vocab.to_dict(),
        "clustering": state.clustering.to_dict() if state.clustering else None,
        "learner": learner_doc,
        "bootstrap_ids": sorted(state.bootstrap_ids),
        "history": state.history,
        "seq": state._seq,
    }
    Path(path).write_text(json.dumps(doc), encoding="utf-8")


def _field(doc: dict, key: str, kind: type, path: str):
    if key not in doc:
        raise CheckpointError(f"checkpoint missing field {path}.{key}")
    value = doc[key]
    if not isinstance(value, kind):
        raise CheckpointError(f"checkpoint field {path}.{key} has type {type(value).__name__}, wanted {kind.__name__}")
    return value


def resume(path: str | Path) -> RunState:
    """Rebuild a RunState whose continuation is identical to the uninterrupted run."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint root must be a JSON object at $")
    version = _field(doc, "schema_version", int, "$")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise CheckpointError(f"schema version mismatch at $.schema_version: {version} != {CHECKPOINT_SCHEMA_VERSION}")
    try:
        config = RunConfig.from_dict(_field(doc, "config", dict, "$"))
    except (TypeError, OrchestrationError, ValueError) as exc:
        raise CheckpointError(f"invalid checkpoint field $.config: {exc}") from None

    u = Pool("U")
    for i, record in enumerate(_field(doc, "u", list, "$")):
        try:
            u.add(Instance.from_dict(record))
        except ValueError as exc:
            raise CheckpointError(f"invalid checkpoint field $.u[{i}]: {exc}") from None
    l = Pool("L")
    for i, record in enumerate(_field(doc, "l", list, "$")):
        try:
            l.add(Instance.from_dict(record))
        except ValueError as exc:
            raise CheckpointError(f"invalid checkpoint field $.l[{i}]: {exc}") from None
    dev = None
    if doc.get("dev") is not None:
        dev = Pool("L")
        for i, record in enumerate(doc["dev"]):
            try:
                dev.add(Instance.from_dict(record))
            except ValueError as exc:
                raise CheckpointError(f"invalid checkpoint field $.dev[{i}]: {exc}") from None

    remaining = _field(doc, "remaining_budget", int, "$")
    iteration = _field(doc, "iteration", int, "$")
    if remaining != config.budget - iteration * config.batch:
        raise CheckpointError(
            f"invalid checkpoint field $.remaining_budget: {remaining} violates the budget invariant "
            f"(budget {config.budget}, iteration {iteration}, batch {config.batch})"
        )
    try:
        vocab = Vocabulary.from_dict(_field(doc, "vocab", dict, "$"))
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"invalid checkpoint field $.vocab: {exc}") from None
    clustering = None
    if doc.get("clustering") is not None:
        try:
            clustering = Clustering.from_dict(doc["clustering"])
        except (KeyError, ValueError) as exc:
            raise CheckpointError(f"invalid checkpoint field $.clustering: {exc}") from None

    learner_doc = _field(doc, "learner", dict, "$")
    kind = learner_doc.get("kind")
    learner: NativeLearner | RemoteLearner
    if kind == "native":
        try:
            learner = NativeLearner(
                weights=np.asarray(learner_doc["weights"], dtype=np.float64),
                bias=np.asarray(learner_doc["bias"], dtype=np.float64),
                vocab=vocab,
                taxonomy=config.taxonomy,
                params=NativeLearnerParams(**learner_doc["params"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"invalid checkpoint field $.learner: {exc}") from None
    elif kind == "remote":
        learner = RemoteLearner(config.remote_endpoint, config.taxonomy, config.remote_config)
        # The adapter is stateless across restarts: re-issue training on resume.
        learner.train(l)
    else:
        raise CheckpointError(f'invalid checkpoint field $.learner.kind: {kind!r} (wanted "native" or "remote")')

    state = RunState(
        config=config,
        u=u,
        l=l,
        remaining_budget=remaining,
        iteration=iteration,
        vocab=vocab,
        learner=learner,
        clustering=clustering,
        bootstrap_ids=frozenset(_field(doc, "bootstrap_ids", list, "$")),
        dev=dev,
        history=_field(doc, "history", list, "$"),
        _seq=_field(doc, "seq", int, "$"),
    )
    validate_state(state)
    return state


def write_event_log(state: RunState, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for event in state.history:
            fh.write(json.dumps(event, ensure_ascii=False) + "\n")
