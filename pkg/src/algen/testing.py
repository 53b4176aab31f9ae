"""In-process HTTP fakes: a deterministic model server and a scriptable chat endpoint.

Both bind an ephemeral localhost port and run on a daemon thread, so the
whole pipeline (retries included) is exercisable offline. The mock model
server implements the model-server protocol (/train, /predict_proba, /reset)
over a token-overlap scorer: deterministic, trains instantly, and produces
valid probability rows.
"""

from __future__ import annotations

import json
import math
import threading
from collections import Counter
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .featurize import tokenize


class _JsonHandler(BaseHTTPRequestHandler):
    def log_message(self, fmt, *args):  # silence request logging in tests
        pass

    def _read_json(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length) if length else b""
        try:
            return json.loads(raw) if raw else {}
        except json.JSONDecodeError:
            return None

    def _send(self, status: int, body: dict) -> None:
        payload = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)


class _ServerThread:
    handler_class: type[BaseHTTPRequestHandler]

    def __init__(self):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), self.handler_class)
        self.server.owner = self  # type: ignore[attr-defined]
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def port(self) -> int:
        return self.server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def start(self) -> "_ServerThread":
        self.thread.start()
        return self

    def stop(self) -> None:
        self.server.shutdown()
        self.server.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


class _MockModelHandler(_JsonHandler):
    def do_POST(self):
        owner: MockModelServer = self.server.owner  # type: ignore[attr-defined]
        body = self._read_json()
        if body is None:
            self._send(400, {"error": "request body is not JSON"})
            return
        if owner.fail_next:
            self._send(owner.fail_next.pop(0), {"error": "scripted failure"})
            return
        if self.path == "/train":
            self._handle_train(owner, body)
        elif self.path == "/predict_proba":
            self._handle_predict(owner, body)
        elif self.path == "/reset":
            owner.model = None
            self._send(200, {"status": "reset"})
        else:
            self._send(404, {"error": f"unknown route {self.path}"})

    def _handle_train(self, owner: "MockModelServer", body: dict) -> None:
        instances = body.get("instances")
        classes = body.get("classes")
        if not isinstance(classes, list) or not classes:
            self._send(422, {"error": 'missing or empty "classes"'})
            return
        if not isinstance(instances, list) or not instances:
            self._send(400, {"error": 'missing or empty "instances"'})
            return
        token_counts: dict[str, Counter] = {c: Counter() for c in classes}
        for i, item in enumerate(instances):
            label = item.get("label")
            if label not in token_counts:
                self._send(422, {"error": f"instance {i} has unknown class {label!r}"})
                return
            token_counts[label].update(tokenize(item.get("text", "")))
        owner.model = {"classes": classes, "token_counts": token_counts}
        owner.train_requests.append(body)
        self._send(200, {"status": "trained", "n": len(instances)})

    def _handle_predict(self, owner: "MockModelServer", body: dict) -> None:
        if owner.model is None:
            self._send(409, {"error": "predict before train"})
            return
        texts = body.get("texts")
        if not isinstance(texts, list):
            self._send(400, {"error": 'missing "texts"'})
            return
        if owner.canned_probs is not None:
            self._send(200, {"probs": owner.canned_probs})
            return
        classes = owner.model["classes"]
        rows = []
        for text in texts:
            tokens = Counter(tokenize(text))
            scores = []
            for cls in classes:
                counts = owner.model["token_counts"][cls]
                scores.append(sum(min(n, counts[t]) for t, n in tokens.items()))
            exps = [math.exp(float(s) - max(scores)) for s in scores]
            total = sum(exps)
            rows.append([e / total for e in exps])
        self._send(200, {"probs": rows})


class MockModelServer(_ServerThread):
    """Reference realization of the model-server protocol for contract tests."""

    handler_class = _MockModelHandler

    def __init__(self):
        super().__init__()
        self.model: dict | None = None
        self.train_requests: list[dict] = []
        self.fail_next: list[int] = []  # statuses to emit before behaving, for retry tests
        self.canned_probs: list[list[float]] | None = None


class _MockChatHandler(_JsonHandler):
    def do_POST(self):
        owner: MockChatServer = self.server.owner  # type: ignore[attr-defined]
        body = self._read_json()
        owner.requests.append(body)
        if owner.fail_next:
            self._send(owner.fail_next.pop(0), {"error": "scripted failure"})
            return
        if owner.responses:
            content = owner.responses.pop(0)
        else:
            content = owner.default_response
        self._send(200, {"choices": [{"message": {"role": "assistant", "content": content}}]})


class MockChatServer(_ServerThread):
    """Chat-completions endpoint with scriptable failures and canned completions."""

    handler_class = _MockChatHandler

    def __init__(self, default_response: str = '["mock variation"]'):
        super().__init__()
        self.default_response = default_response
        self.responses: list[str] = []
        self.fail_next: list[int] = []
        self.requests: list[dict] = []


class _MockEmbeddingHandler(_JsonHandler):
    def do_POST(self):
        owner: MockEmbeddingServer = self.server.owner  # type: ignore[attr-defined]
        body = self._read_json()
        owner.requests.append(body)
        if owner.fail_next:
            self._send(owner.fail_next.pop(0), {"error": "scripted failure"})
            return
        texts = body.get("input", [])
        if owner.canned is not None:
            data = [{"embedding": row} for row in owner.canned]
        else:
            data = []
            for i, _ in enumerate(texts):
                row = [0.0] * owner.dim
                row[i % owner.dim] = 1.0
                data.append({"embedding": row})
        self._send(200, {"data": data})


class MockEmbeddingServer(_ServerThread):
    """Embeddings endpoint returning unit basis vectors (or canned rows)."""

    handler_class = _MockEmbeddingHandler

    def __init__(self, dim: int = 8):
        super().__init__()
        self.dim = dim
        self.canned: list[list[float]] | None = None
        self.fail_next: list[int] = []
        self.requests: list[dict] = []


class AsgiServerThread:
    """Run an ASGI app (e.g. the annotation service) over real HTTP on a free port."""

    def __init__(self, app):
        import uvicorn

        self.config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
        self.server = uvicorn.Server(self.config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def start(self) -> "AsgiServerThread":
        import time

        self.thread.start()
        for _ in range(500):
            if self.server.started:
                break
            time.sleep(0.01)
        else:
            raise RuntimeError("ASGI server did not start")
        return self

    @property
    def port(self) -> int:
        return self.server.servers[0].sockets[0].getsockname()[1]

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def stop(self) -> None:
        self.server.should_exit = True
        self.thread.join(timeout=10)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()
