"""HTTP facade for live runs: annotation queue, run control, status, metrics.

One orchestrator thread per run is the only writer of that run's state. The
annotation queue parks the thread between the selection and generation steps;
posting the last pending label resumes it automatically. Status reads serve
the snapshot committed at the last iteration boundary plus the live phase.

Routes (all under /v1, JSON bodies):
    POST /v1/runs                   create and start a run
    GET  /v1/runs/{id}              status snapshot + live phase
    GET  /v1/runs/{id}/queue        pending annotation items, selection order
    POST /v1/runs/{id}/labels       submit one label
    GET  /v1/runs/{id}/metrics      latest boundary metrics
    GET  /v1/runs/{id}/events       event-log tail

Optional static bearer auth: set ALGEN_SERVICE_TOKEN and clients must send
Authorization: Bearer <token>.
"""

from __future__ import annotations

import os
import threading
import uuid
from typing import Sequence

from fastapi import Body, FastAPI, Header, HTTPException

from .corpus import Instance, Pool, Taxonomy, load_jsonl
from .evaluation import class_count_stddev
from .orchestrate import OrchestrationError, RunConfig, RunState, init_run, run_until_budget

PHASES = ("initializing", "selecting", "awaiting_labels", "generating", "retraining", "finished", "failed")


class _StopRun(Exception):
    pass


class QueueAnnotator:
    """Bridges the orchestrator thread to the HTTP label queue."""

    def __init__(self, handle: "RunHandle"):
        self.handle = handle

    def annotate(self, instances: Sequence[Instance], taxonomy: Taxonomy) -> dict[str, str]:
        handle = self.handle
        with handle.lock:
            handle.pending = {inst.id: inst for inst in instances}
            handle.pending_order = [inst.id for inst in instances]
            handle.labeled = {}
            handle.set_phase_locked("awaiting_labels")
        while True:
            with handle.lock:
                if handle.stop_requested:
                    raise _StopRun()
                if not handle.pending:
                    labels = dict(handle.labeled)
                    handle.pending_order = []
                    return labels
                handle.wakeup.wait(timeout=0.2)


class RunHandle:
    """Everything the HTTP layer knows about one run."""

    def __init__(self, run_id: str, config: RunConfig):
        self.run_id = run_id
        self.config = config
        self.lock = threading.RLock()
        self.wakeup = threading.Condition(self.lock)
        self.phase = "initializing"
        self.phase_history: list[str] = ["initializing"]
        self.pending: dict[str, Instance] = {}
        self.pending_order: list[str] = []
        self.labeled: dict[str, str] = {}
        self.selected_at = 0
        self.snapshot: dict = {}
        self.state: RunState | None = None
        self.error: str | None = None
        self.stop_requested = False
        self.thread: threading.Thread | None = None

    def set_phase_locked(self, phase: str) -> None:
        assert phase in PHASES
        if phase != self.phase:
            self.phase = phase
            self.phase_history.append(phase)

    def set_phase(self, phase: str) -> None:
        with self.lock:
            self.set_phase_locked(phase)

    def observer(self, phase: str, payload: dict) -> None:
        if phase == "boundary":
            self.commit_snapshot()
            return
        if phase == "awaiting_labels":
            return  # QueueAnnotator owns this transition together with the queue
        if phase in PHASES:
            self.set_phase(phase)
        if phase == "selecting":
            with self.lock:
                self.selected_at = payload.get("iteration", self.selected_at)

    def commit_snapshot(self) -> None:
        state = self.state
        if state is None:
            return
        counts = state.class_counts()
        acquired_total = sum(counts.values())
        stddev = class_count_stddev(list(counts.values())) if acquired_total > 0 else None
        trajectory = [
            {"iteration": e["iteration"], "labeled_size": e.get("labeled_size"), "dev_macro_f1": e.get("dev_macro_f1")}
            for e in state.history
            if e["type"] == "retrain"
        ]
        with self.lock:
            self.snapshot = {
                "iteration": state.iteration,
                "remaining_budget": state.remaining_budget,
                "labeled_size": len(state.l),
                "class_counts": counts,
                "class_count_stddev": stddev,
                "trajectory": trajectory,
                "taxonomy": list(state.taxonomy.classes),
            }

    def run(self, u: Pool, bootstrap: Pool, dev: Pool | None) -> None:
        try:
            self.state = init_run(self.config, u, bootstrap, dev=dev)
            self.commit_snapshot()
            run_until_budget(self.state, QueueAnnotator(self), observer=self.observer)
            self.commit_snapshot()
            self.set_phase("finished")
        except _StopRun:
            with self.lock:
                self.error = "stopped"
                self.set_phase_locked("failed")
        except Exception as exc:  # surfaced through /runs/{id}, not swallowed
            with self.lock:
                self.error = f"{type(exc).__name__}: {exc}"
                self.set_phase_locked("failed")

    def start(self, u: Pool, bootstrap: Pool, dev: Pool | None) -> None:
        self.thread = threading.Thread(target=self.run, args=(u, bootstrap, dev), daemon=True)
        self.thread.start()

    def stop(self) -> None:
        with self.lock:
            self.stop_requested = True
            self.wakeup.notify_all()


class RunRegistry:
    def __init__(self):
        self.runs: dict[str, RunHandle] = {}
        self.idempotency: dict[str, str] = {}
        self.lock = threading.Lock()

    def get(self, run_id: str) -> RunHandle:
        with self.lock:
            handle = self.runs.get(run_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return handle

    def stop_all(self) -> None:
        with self.lock:
            handles = list(self.runs.values())
        for handle in handles:
            handle.stop()


def create_app(registry: RunRegistry | None = None) -> FastAPI:
    registry = registry or RunRegistry()
    app = FastAPI(title="algen service", version="1")
    app.state.registry = registry

    def check_auth(authorization: str | None) -> None:
        token = os.environ.get("ALGEN_SERVICE_TOKEN")
        if not token:
            return
        if authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.post("/v1/runs", status_code=201)
    def create_run(body: dict = Body(...), authorization: str | None = Header(default=None)):
        check_auth(authorization)
        idem = body.get("idempotency_key")
        if idem:
            with registry.lock:
                if idem in registry.idempotency:
                    return {"run_id": registry.idempotency[idem], "idempotent": True}

        config_doc = body.get("config")
        if not isinstance(config_doc, dict):
            raise HTTPException(status_code=422, detail='body must carry a "config" object')
        corpus = body.get("corpus")
        if not isinstance(corpus, dict):
            raise HTTPException(status_code=422, detail='body must carry a "corpus" object')
        for key in ("unlabeled", "bootstrap"):
            if not corpus.get(key):
                raise HTTPException(status_code=422, detail=f'"corpus.{key}" is required')

        taxonomy = None
        if corpus.get("taxonomy"):
            try:
                taxonomy = Taxonomy.load(corpus["taxonomy"])
            except FileNotFoundError:
                raise HTTPException(status_code=404, detail=f"taxonomy file not found: {corpus['taxonomy']}") from None
        config_doc = dict(config_doc)
        config_doc["annotator"] = "service"
        if taxonomy is not None:
            config_doc["taxonomy"] = taxonomy.to_dict()
        try:
            config = RunConfig.from_dict(config_doc)
        except (OrchestrationError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=f"invalid config: {exc}") from None
        except TypeError as exc:
            raise HTTPException(status_code=422, detail=f"invalid config field: {exc}") from None

        pools = {}
        for key, required_kind in (("unlabeled", "U"), ("bootstrap", "L"), ("dev", "L")):
            path = corpus.get(key)
            if not path:
                pools[key] = None
                continue
            try:
                pools[key] = load_jsonl(path, config.taxonomy)
            except FileNotFoundError:
                raise HTTPException(status_code=404, detail=f"corpus file not found: {path}") from None
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=f"corpus file {path}: {exc}") from None
            if pools[key].kind != required_kind:
                raise HTTPException(status_code=422, detail=f"corpus.{key} must be of kind {required_kind}")

        run_id = uuid.uuid4().hex[:12]
        handle = RunHandle(run_id, config)
        with registry.lock:
            registry.runs[run_id] = handle
            if idem:
                registry.idempotency[idem] = run_id
        try:
            # Fail fast on budget/pool mismatches so creation errors are synchronous.
            if len(pools["unlabeled"]) < config.budget:
                raise OrchestrationError(
                    f"budget exceeds pool: budget={config.budget} but |U|={len(pools['unlabeled'])}"
                )
        except OrchestrationError as exc:
            with registry.lock:
                registry.runs.pop(run_id, None)
            raise HTTPException(status_code=422, detail=str(exc)) from None
        handle.start(pools["unlabeled"], pools["bootstrap"], pools["dev"])
        return {"run_id": run_id}

    @app.get("/v1/runs/{run_id}")
    def fetch_status(run_id: str, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        handle = registry.get(run_id)
        with handle.lock:
            return {
                "run_id": run_id,
                "phase": handle.phase,
                "phase_history": list(handle.phase_history),
                "error": handle.error,
                "pending_count": len(handle.pending),
                **handle.snapshot,
            }

    @app.get("/v1/runs/{run_id}/queue")
    def fetch_queue(run_id: str, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        handle = registry.get(run_id)
        with handle.lock:
            if handle.phase != "awaiting_labels":
                return []
            classes = list(handle.config.taxonomy.classes)
            return [
                {
                    "run_id": run_id,
                    "instance_id": instance_id,
                    "text": handle.pending[instance_id].text,
                    "candidate_classes": classes,
                    "selected_at": handle.selected_at,
                    "status": "pending",
                }
                for instance_id in handle.pending_order
                if instance_id in handle.pending
            ]

    @app.post("/v1/runs/{run_id}/labels")
    def submit_label(run_id: str, body: dict = Body(...), authorization: str | None = Header(default=None)):
        check_auth(authorization)
        handle = registry.get(run_id)
        instance_id = body.get("instance_id")
        label = body.get("label")
        if not instance_id or not isinstance(label, str):
            raise HTTPException(status_code=422, detail='body needs "instance_id" and "label"')
        with handle.lock:
            if label not in handle.config.taxonomy:
                raise HTTPException(
                    status_code=422,
                    detail=f"label {label!r} is not in the taxonomy {list(handle.config.taxonomy.classes)}",
                )
            if instance_id in handle.labeled:
                if handle.labeled[instance_id] == label:
                    return {"status": "unchanged", "instance_id": instance_id, "label": label}
                raise HTTPException(
                    status_code=409,
                    detail=f"instance {instance_id!r} already labeled {handle.labeled[instance_id]!r}",
                )
            if instance_id not in handle.pending:
                raise HTTPException(status_code=409, detail=f"instance {instance_id!r} is not pending")
            handle.labeled[instance_id] = label
            del handle.pending[instance_id]
            remaining = len(handle.pending)
            if remaining == 0:
                handle.set_phase_locked("generating")
            handle.wakeup.notify_all()
        return {"status": "accepted", "instance_id": instance_id, "label": label, "remaining": remaining}

    @app.get("/v1/runs/{run_id}/metrics")
    def fetch_metrics(run_id: str, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        handle = registry.get(run_id)
        with handle.lock:
            if not handle.snapshot:
                raise HTTPException(status_code=404, detail="no boundary committed yet")
            return dict(handle.snapshot)

    @app.get("/v1/runs/{run_id}/events")
    def fetch_events(run_id: str, tail: int = 50, authorization: str | None = Header(default=None)):
        check_auth(authorization)
        handle = registry.get(run_id)
        state = handle.state
        if state is None:
            return []
        events = list(state.history)
        return events[-tail:] if tail > 0 else events

    return app


app = create_app()
