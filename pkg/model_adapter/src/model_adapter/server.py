"""Model-server protocol over the transformer classifier.

POST /train          {"instances": [{"text","label"},...], "classes": [...], "config": {...}}
POST /predict_proba  {"texts": [...]} -> {"probs": [[...], ...]} in class order
POST /reset          {} -> restores the untrained base

Training always restarts from the base checkpoint for the provided seed, so
identical (payload, seed) pairs reproduce identical heads. The server keeps
no state across restarts except that base; callers re-issue /train to
rehydrate after a restart.
"""

from __future__ import annotations

import argparse
import threading

from fastapi import Body, FastAPI, HTTPException

from .model import AdapterConfig, TextClassifier


def create_app() -> FastAPI:
    app = FastAPI(title="model adapter", version="1")
    state: dict = {"classifier": None}
    train_lock = threading.Lock()

    @app.post("/train")
    def train(body: dict = Body(...)):
        instances = body.get("instances")
        classes = body.get("classes")
        if not isinstance(classes, list) or not classes:
            raise HTTPException(status_code=422, detail='missing or empty "classes"')
        if not isinstance(instances, list) or not instances:
            raise HTTPException(status_code=400, detail='missing or empty "instances"')
        for i, item in enumerate(instances):
            if not isinstance(item, dict) or "text" not in item or "label" not in item:
                raise HTTPException(status_code=422, detail=f'instance {i} needs "text" and "label"')
            if item["label"] not in classes:
                raise HTTPException(status_code=422, detail=f"instance {i} has unknown class {item['label']!r}")
        try:
            config = AdapterConfig.from_request(body.get("config", {}))
        except TypeError as exc:
            raise HTTPException(status_code=422, detail=f"bad config: {exc}") from None
        with train_lock:
            try:
                classifier = TextClassifier([str(c) for c in classes], config)
            except NotImplementedError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            classifier.train(instances)
            state["classifier"] = classifier
        return {"status": "trained", "n": len(instances), "classes": classes}

    @app.post("/predict_proba")
    def predict_proba(body: dict = Body(...)):
        classifier: TextClassifier | None = state["classifier"]
        if classifier is None:
            raise HTTPException(status_code=409, detail="predict before train")
        texts = body.get("texts")
        if not isinstance(texts, list) or not all(isinstance(t, str) for t in texts):
            raise HTTPException(status_code=422, detail='missing "texts" list')
        return {"probs": classifier.predict_proba(texts)}

    @app.post("/reset")
    def reset():
        state["classifier"] = None
        return {"status": "reset"}

    return app


app = create_app()


def main() -> None:
    import uvicorn

    parser = argparse.ArgumentParser(description="model-server protocol adapter")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=9009)
    args = parser.parse_args()
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")


if __name__ == "__main__":
    main()
