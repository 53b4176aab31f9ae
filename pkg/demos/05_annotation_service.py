"""Drive a live run through the HTTP annotation service, like the web console does.

Boots the service in-process on a free port, creates a mock-LLM run, labels
the queue over real HTTP, and watches the phases advance.

Run: python3 demos/05_annotation_service.py
"""

import tempfile
import time
from pathlib import Path

import requests

from algen.corpus import save_jsonl
from algen.service import RunRegistry, create_app
from algen.synthetic import make_dataset
from algen.testing import AsgiServerThread

world = make_dataset(n_unlabeled=300, seed=13, bootstrap_size=24, dev_size=12, test_size=12)

with tempfile.TemporaryDirectory() as tmp:
    save_jsonl(world.unlabeled, Path(tmp) / "unlabeled.jsonl")
    save_jsonl(world.bootstrap, Path(tmp) / "bootstrap.jsonl")

    registry = RunRegistry()
    with AsgiServerThread(create_app(registry)) as server:
        print(f"service listening at {server.url}")
        created = requests.post(
            f"{server.url}/v1/runs",
            json={
                "config": {
                    "strategy": "cluster_al",
                    "budget": 40,
                    "batch": 20,
                    "clusters": 10,
                    "variations": 3,
                    "seed": 2,
                    "llm": {"mock": True},
                    "learner_params": {"epochs": 60},
                },
                "corpus": {
                    "unlabeled": str(Path(tmp) / "unlabeled.jsonl"),
                    "bootstrap": str(Path(tmp) / "bootstrap.jsonl"),
                },
            },
        )
        run_id = created.json()["run_id"]
        print(f"created run {run_id}")

        while True:
            status = requests.get(f"{server.url}/v1/runs/{run_id}").json()
            if status["phase"] in ("awaiting_labels", "finished", "failed"):
                break
            time.sleep(0.05)

        while status["phase"] == "awaiting_labels":
            queue = requests.get(f"{server.url}/v1/runs/{run_id}/queue").json()
            print(f"\niteration {status.get('iteration')}: {len(queue)} items pending; labeling them all...")
            for item in queue:
                requests.post(
                    f"{server.url}/v1/runs/{run_id}/labels",
                    json={"instance_id": item["instance_id"], "label": world.oracle[item["instance_id"]]},
                )
            while True:
                status = requests.get(f"{server.url}/v1/runs/{run_id}").json()
                if status["phase"] in ("awaiting_labels", "finished", "failed"):
                    if status["phase"] != "awaiting_labels" or status.get("pending_count", 0) > 0:
                        break
                time.sleep(0.05)

        print(f"\nfinal phase: {status['phase']} after {status.get('iteration')} iterations")
        print(f"phases seen: {' -> '.join(status['phase_history'])}")
        metrics = requests.get(f"{server.url}/v1/runs/{run_id}/metrics").json()
        print(f"acquired class counts: {metrics['class_counts']}")
        print(f"class-count stddev: {metrics['class_count_stddev']:.2f}")
        registry.stop_all()
