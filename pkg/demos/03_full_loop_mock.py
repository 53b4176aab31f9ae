"""One full budgeted run: select, annotate, generate variations, retrain.

Uses the mock LLM (deterministic offline stand-in) and a scripted oracle as
the annotator, then checkpoints, resumes, and shows both paths agree.

Run: python3 demos/03_full_loop_mock.py
"""

import tempfile
from pathlib import Path

from algen.evaluation import class_count_stddev, report_run
from algen.generate import LlmConfig
from algen.learner import NativeLearnerParams
from algen.orchestrate import RunConfig, ScriptedAnnotator, checkpoint, init_run, resume, run_iteration, run_until_budget
from algen.synthetic import make_dataset

world = make_dataset(n_unlabeled=2000, seed=7)
annotator = ScriptedAnnotator(world.answers())

config = RunConfig(
    strategy="cluster_al",
    budget=100,
    batch=20,
    clusters=20,
    variations=5,
    seed=1,
    llm=LlmConfig(mock=True),
    learner_params=NativeLearnerParams(epochs=120),
)

print("== Iterating under a budget of 100 human labels, 20 per round ==")
state = init_run(config, world.unlabeled, world.bootstrap, dev=world.dev)
while state.remaining_budget >= config.batch:
    run_iteration(state, annotator)
    last = state.history[-1]
    print(
        f"iteration {last['iteration'] + 1}: +{last['human_added']} human, "
        f"+{last['generated_added']} generated, |L| = {last['labeled_size']}, "
        f"budget left {last['remaining_budget']}"
    )

counts = state.class_counts()
print("\nacquired class counts:", dict(counts))
print(f"class-count stddev: {class_count_stddev(list(counts.values())):.1f} (lower = more balanced)")

report, _ = report_run(state, world.test)
print(f"test macro-F1 after the run: {report.macro_f1:.4f}")

print("\n== Checkpoint and resume reproduce the same run ==")
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "checkpoint.json"
    world2 = make_dataset(n_unlabeled=2000, seed=7)
    half = init_run(config, world2.unlabeled, world2.bootstrap, dev=world2.dev)
    run_iteration(half, annotator)
    run_iteration(half, annotator)
    checkpoint(half, path)
    resumed = resume(path)
    run_until_budget(resumed, annotator)
    twin_report, _ = report_run(resumed, world2.test)
    print(f"uninterrupted run report == resumed run report: {report.to_json() == twin_report.to_json()}")
