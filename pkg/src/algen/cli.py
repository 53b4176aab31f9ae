"""Operator command line: ingest, bootstrap-split, run, evaluate, matrix, serve, report.

Flags mirror the loop's resource symbols (--budget, --batch, --clusters,
--variations) so configs read directly against the acquisition loop. All
commands are deterministic under fixed seeds with the mock LLM.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import featurize
from .corpus import (
    CorpusError,
    Instance,
    Pool,
    SplitSet,
    Taxonomy,
    dedup_key,
    default_taxonomy,
    load_jsonl,
    save_jsonl,
)
from .evaluation import class_count_stddev, evaluate_learner, report_run
from .generate import LlmConfig, Template
from .learner import NativeLearnerParams, RemoteLearner, fit_native
from .orchestrate import (
    InteractiveAnnotator,
    RunConfig,
    ScriptedAnnotator,
    checkpoint,
    init_run,
    resume,
    run_until_budget,
    write_event_log,
)
from .strategy import STRATEGIES

log = logging.getLogger("algen")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="algen", description=__doc__)
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    p_ingest = commands.add_parser("ingest", help="normalize raw text/JSONL files into a corpus")
    p_ingest.add_argument("inputs", nargs="+", type=Path)
    p_ingest.add_argument("--output", required=True, type=Path)
    p_ingest.add_argument("--keep-duplicates", action="store_true", help="keep dedup-key duplicates")

    p_split = commands.add_parser("bootstrap-split", help="carve seeded bootstrap/dev/test splits")
    p_split.add_argument("--corpus", required=True, type=Path)
    p_split.add_argument("--bootstrap", required=True, type=int)
    p_split.add_argument("--dev", required=True, type=int)
    p_split.add_argument("--test", required=True, type=int)
    p_split.add_argument("--labels", required=True, type=Path, help="JSON object of id -> label")
    p_split.add_argument("--seed", type=int, default=0)
    p_split.add_argument("--taxonomy", type=Path)
    p_split.add_argument("--outdir", required=True, type=Path)

    p_run = commands.add_parser("run", help="run the acquisition loop end to end")
    _add_run_arguments(p_run)

    p_eval = commands.add_parser("evaluate", help="train on splits, evaluate on test, cross-table")
    p_eval.add_argument("--splits", required=True, nargs="+", type=Path)
    p_eval.add_argument("--bootstrap", type=Path, help="prepend this labeled pool to every training split")
    p_eval.add_argument("--test", required=True, type=Path)
    p_eval.add_argument("--learner", default="native", choices=["native", "none"], help="in-process learner")
    p_eval.add_argument("--transfer", nargs="*", default=[], metavar="NAME=URL", help="remote model servers")
    p_eval.add_argument("--taxonomy", type=Path)
    p_eval.add_argument("--epochs", type=int, default=200)
    p_eval.add_argument("--outdir", required=True, type=Path)

    p_matrix = commands.add_parser("matrix", help="strategies x seeds grid on shared splits")
    _add_run_arguments(p_matrix, matrix=True)
    p_matrix.add_argument("--strategies", default=",".join(STRATEGIES))
    p_matrix.add_argument("--seeds", default="0", help="comma-separated seed list")
    p_matrix.add_argument("--test", required=True, type=Path)

    p_serve = commands.add_parser("serve", help="start the annotation service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    p_report = commands.add_parser("report", help="evaluate a checkpointed run against a test split")
    p_report.add_argument("--checkpoint", required=True, type=Path)
    p_report.add_argument("--test", required=True, type=Path)
    p_report.add_argument("--outdir", required=True, type=Path)

    return parser


def _add_run_arguments(parser: argparse.ArgumentParser, matrix: bool = False) -> None:
    parser.add_argument("--unlabeled", required=True, type=Path)
    parser.add_argument("--bootstrap", required=True, type=Path)
    parser.add_argument("--dev", type=Path)
    parser.add_argument("--taxonomy", type=Path)
    parser.add_argument("--config", type=Path, help="JSON file of RunConfig fields; flags override")
    if not matrix:
        parser.add_argument("--strategy", default="cluster_al", choices=STRATEGIES)
        parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--budget", type=int, default=100)
    parser.add_argument("--batch", type=int, default=20)
    parser.add_argument("--clusters", type=int, default=None, help="m; defaults to --batch")
    parser.add_argument("--variations", type=int, default=5)
    parser.add_argument("--mock-llm", action="store_true")
    parser.add_argument("--llm-endpoint", default=None)
    parser.add_argument("--llm-model", default=None)
    parser.add_argument("--temperature", type=float, default=None)
    parser.add_argument("--template", type=Path)
    parser.add_argument("--relation-mode", default="inherit", choices=["inherit", "learner_consistent"])
    parser.add_argument("--learner", default="native", choices=["native", "remote"])
    parser.add_argument("--learner-endpoint", default=None)
    parser.add_argument("--epochs", type=int, default=200, help="native learner epochs")
    parser.add_argument("--annotator", default="scripted", choices=["scripted", "interactive"])
    parser.add_argument("--answers", type=Path, help="scripted annotator id -> label JSON")
    parser.add_argument("--outdir", required=True, type=Path)


def cmd_ingest(args) -> int:
    instances: list[Instance] = []
    seen_keys: dict[str, str] = {}
    duplicates: list[tuple[str, str]] = []
    rejected: list[str] = []
    counter = 0
    for path in args.inputs:
        raw = path.read_bytes()
        for lineno, line in enumerate(raw.split(b"\n"), start=1):
            if not line.strip():
                continue
            try:
                text_line = line.decode("utf-8")
            except UnicodeDecodeError:
                rejected.append(f"{path}:{lineno}: not UTF-8")
                continue
            if path.suffix == ".jsonl":
                try:
                    record = json.loads(text_line)
                except json.JSONDecodeError:
                    rejected.append(f"{path}:{lineno}: malformed JSON")
                    continue
                text = record.get("text", "")
                instance_id = record.get("id") or f"ing{counter:06d}"
            else:
                text = text_line.strip()
                instance_id = f"ing{counter:06d}"
            if not text:
                rejected.append(f"{path}:{lineno}: empty text")
                continue
            counter += 1
            key = dedup_key(text)
            if key in seen_keys and not args.keep_duplicates:
                duplicates.append((instance_id, seen_keys[key]))
                continue
            seen_keys.setdefault(key, instance_id)
            instances.append(Instance(id=instance_id, text=text))
    if not instances:
        print("error: zero usable lines", file=sys.stderr)
        return 1
    save_jsonl(Pool("U", instances), args.output)
    print(f"wrote {len(instances)} instances to {args.output}")
    if duplicates:
        print(f"dropped {len(duplicates)} dedup-key duplicates:")
        for dup_id, kept_id in duplicates[:20]:
            print(f"  {dup_id} duplicates {kept_id}")
    for line in rejected:
        print(f"rejected {line}")
    return 0


def cmd_bootstrap_split(args) -> int:
    taxonomy = Taxonomy.load(args.taxonomy) if args.taxonomy else default_taxonomy()
    corpus = load_jsonl(args.corpus, taxonomy)
    total = args.bootstrap + args.dev + args.test
    if len(corpus) < total:
        print(f"error: corpus has {len(corpus)} instances, need {total}", file=sys.stderr)
        return 1
    with open(args.labels, encoding="utf-8") as fh:
        answers = json.load(fh)
    rng = np.random.default_rng(args.seed)
    ids = corpus.ids()
    order = [ids[i] for i in rng.permutation(len(ids))]
    sampled = order[:total]
    missing = [i for i in sampled if i not in answers]
    if missing:
        print(f"error: label answer file missing {len(missing)} sampled ids: {missing[:10]}", file=sys.stderr)
        return 1
    bad = [i for i in sampled if answers[i] not in taxonomy]
    if bad:
        print(f"error: labels outside taxonomy for ids: {bad[:10]}", file=sys.stderr)
        return 1

    def labeled_pool(id_slice):
        pool = Pool("L")
        for instance_id in id_slice:
            inst = corpus.get(instance_id).copy()
            inst.label = answers[instance_id]
            inst.origin = "bootstrap"
            pool.add(inst)
        return pool

    args.outdir.mkdir(parents=True, exist_ok=True)
    split_set = SplitSet(
        bootstrap=labeled_pool(order[: args.bootstrap]),
        dev=labeled_pool(order[args.bootstrap : args.bootstrap + args.dev]),
        test=labeled_pool(order[args.bootstrap + args.dev : total]),
    )
    split_set.validate()
    splits = {
        "bootstrap": split_set.bootstrap,
        "dev": split_set.dev,
        "test": split_set.test,
        "unlabeled": Pool("U", (corpus.get(i).copy() for i in order[total:])),
    }
    for name, pool in splits.items():
        save_jsonl(pool, args.outdir / f"{name}.jsonl")
        print(f"{name}: {len(pool)} instances")
    return 0


def _config_from_args(args, strategy: str, seed: int) -> RunConfig:
    doc: dict = {}
    if args.config:
        doc.update(json.loads(args.config.read_text(encoding="utf-8")))
    doc["strategy"] = strategy
    doc["seed"] = seed
    doc["budget"] = args.budget
    doc["batch"] = args.batch
    doc["clusters"] = args.clusters if args.clusters is not None else args.batch
    doc["variations"] = args.variations
    doc["annotator"] = args.annotator
    doc["learner_kind"] = args.learner
    if args.learner_endpoint:
        doc["remote_endpoint"] = args.learner_endpoint
    doc.setdefault("learner_params", {})
    if isinstance(doc["learner_params"], dict):
        doc["learner_params"].setdefault("epochs", args.epochs)
    llm = doc.setdefault("llm", {})
    if isinstance(llm, dict):
        if args.mock_llm:
            llm["mock"] = True
        if args.llm_endpoint:
            llm["endpoint"] = args.llm_endpoint
        if args.llm_model:
            llm["model"] = args.llm_model
        if args.temperature is not None:
            llm["temperature"] = args.temperature
    if args.template:
        doc["template"] = json.loads(args.template.read_text(encoding="utf-8"))
    doc["relation_mode"] = args.relation_mode
    if args.taxonomy:
        doc["taxonomy"] = Taxonomy.load(args.taxonomy).to_dict()
    return RunConfig.from_dict(doc)


def _run_one(args, config: RunConfig, outdir: Path):
    taxonomy = config.taxonomy
    u = load_jsonl(args.unlabeled, taxonomy)
    bootstrap = load_jsonl(args.bootstrap, taxonomy)
    dev = load_jsonl(args.dev, taxonomy) if args.dev else None
    if config.annotator == "interactive":
        annotator = InteractiveAnnotator()
    else:
        if not args.answers:
            raise CorpusError("scripted annotator needs --answers")
        annotator = ScriptedAnnotator(args.answers)
    state = init_run(config, u, bootstrap, dev=dev)
    run_until_budget(state, annotator)

    outdir.mkdir(parents=True, exist_ok=True)
    checkpoint(state, outdir / "checkpoint.json")
    write_event_log(state, outdir / "events.jsonl")
    acquired = state.acquired()
    split_path = outdir / f"train_{config.strategy}.jsonl"
    save_jsonl(acquired, split_path)
    counts = state.class_counts(acquired)
    summary = {
        "strategy": config.strategy,
        "seed": config.seed,
        "iterations": state.iteration,
        "acquired": len(acquired),
        "human": sum(1 for i in acquired if i.origin == "human"),
        "generated": sum(1 for i in acquired if i.origin == "generated"),
        "class_counts": counts,
        "class_count_stddev": class_count_stddev(list(counts.values())) if len(counts) >= 2 else None,
    }
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    return state, summary


def cmd_run(args) -> int:
    config = _config_from_args(args, args.strategy, args.seed)
    state, summary = _run_one(args, config, args.outdir)
    print(json.dumps(summary, indent=2))
    return 0


def _evaluate_split(split_pool: Pool, bootstrap: Pool | None, test: Pool, taxonomy: Taxonomy, learner_spec, epochs: int):
    train = Pool("L")
    if bootstrap is not None:
        for inst in bootstrap:
            train.add(inst.copy())
    for inst in split_pool:
        train.add(inst.copy())
    if learner_spec == "native":
        vocab = featurize.fit(train)
        learner = fit_native(train, vocab, taxonomy, NativeLearnerParams(epochs=epochs))
    else:  # (name, url) remote pair
        learner = RemoteLearner(learner_spec[1], taxonomy)
        learner.train(train)
    report = evaluate_learner(learner, test, taxonomy)
    counts = {name: 0 for name in taxonomy.classes}
    for inst in split_pool:
        counts[inst.label] += 1
    report.class_counts = counts
    report.class_count_stddev = class_count_stddev(list(counts.values())) if len(counts) >= 2 else None
    return report


def cmd_evaluate(args) -> int:
    taxonomy = Taxonomy.load(args.taxonomy) if args.taxonomy else default_taxonomy()
    test = load_jsonl(args.test, taxonomy)
    bootstrap = load_jsonl(args.bootstrap, taxonomy) if args.bootstrap else None
    learners: list = []
    if args.learner == "native":
        learners.append("native")
    for pair in args.transfer:
        name, _, url = pair.partition("=")
        if not url:
            name, url = f"remote{len(learners)}", pair
        learners.append((name, url))
    if not learners:
        print("error: no learners selected", file=sys.stderr)
        return 1

    args.outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for split_path in args.splits:
        split_name = split_path.stem
        split_pool = load_jsonl(split_path, taxonomy)
        for learner_spec in learners:
            learner_name = learner_spec if isinstance(learner_spec, str) else learner_spec[0]
            try:
                report = _evaluate_split(split_pool, bootstrap, test, taxonomy, learner_spec, args.epochs)
            except Exception as exc:
                log.warning("cell (%s, %s) failed: %s", split_name, learner_name, exc)
                rows.append({"split": split_name, "learner": learner_name, "error": str(exc)})
                continue
            stem = f"report_{split_name}_{learner_name}"
            (args.outdir / f"{stem}.json").write_text(report.to_json(), encoding="utf-8")
            (args.outdir / f"{stem}.md").write_text(report.to_markdown(taxonomy), encoding="utf-8")
            rows.append(
                {
                    "split": split_name,
                    "learner": learner_name,
                    "accuracy": round(report.accuracy, 6),
                    "macro_precision": round(report.macro_precision, 6),
                    "macro_recall": round(report.macro_recall, 6),
                    "macro_f1": round(report.macro_f1, 6),
                    "error_rate_stddev": round(report.error_rate_stddev, 6)
                    if report.error_rate_stddev is not None
                    else None,
                }
            )
    table_path = args.outdir / "cross_table.csv"
    fields = ["split", "learner", "accuracy", "macro_precision", "macro_recall", "macro_f1", "error_rate_stddev", "error"]
    with open(table_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {table_path}")
    return 0


def cmd_matrix(args) -> int:
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    unknown = [s for s in strategies if s not in STRATEGIES]
    if unknown:
        print(f"error: unknown strategies {unknown}; choose from {list(STRATEGIES)}", file=sys.stderr)
        return 2
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    taxonomy = Taxonomy.load(args.taxonomy) if args.taxonomy else default_taxonomy()
    test = load_jsonl(args.test, taxonomy)
    bootstrap = load_jsonl(args.bootstrap, taxonomy)

    per_cell = []
    for strategy_name in strategies:
        for seed in seeds:
            cell_dir = args.outdir / f"{strategy_name}_seed{seed}"
            try:
                config = _config_from_args(args, strategy_name, seed)
                state, summary = _run_one(args, config, cell_dir)
                train = Pool("L")
                for inst in bootstrap:
                    train.add(inst.copy())
                for inst in state.acquired():
                    train.add(inst.copy())
                vocab = featurize.fit(train)
                learner = fit_native(train, vocab, taxonomy, NativeLearnerParams(epochs=args.epochs))
                report = evaluate_learner(learner, test, taxonomy)
                per_cell.append(
                    {
                        "strategy": strategy_name,
                        "seed": seed,
                        "class_count_stddev": summary["class_count_stddev"],
                        "macro_f1": report.macro_f1,
                        "accuracy": report.accuracy,
                    }
                )
            except Exception as exc:
                log.warning("matrix cell (%s, %s) failed: %s", strategy_name, seed, exc)
                per_cell.append({"strategy": strategy_name, "seed": seed, "error": str(exc)})

    args.outdir.mkdir(parents=True, exist_ok=True)
    with open(args.outdir / "cells.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["strategy", "seed", "class_count_stddev", "macro_f1", "accuracy", "error"])
        writer.writeheader()
        writer.writerows(per_cell)
    aggregate = []
    for strategy_name in strategies:
        done = [c for c in per_cell if c["strategy"] == strategy_name and "error" not in c]
        if not done:
            aggregate.append({"strategy": strategy_name, "runs": 0})
            continue
        aggregate.append(
            {
                "strategy": strategy_name,
                "runs": len(done),
                "mean_class_count_stddev": round(float(np.mean([c["class_count_stddev"] for c in done])), 6),
                "mean_macro_f1": round(float(np.mean([c["macro_f1"] for c in done])), 6),
                "mean_accuracy": round(float(np.mean([c["accuracy"] for c in done])), 6),
            }
        )
    with open(args.outdir / "aggregate.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["strategy", "runs", "mean_class_count_stddev", "mean_macro_f1", "mean_accuracy"]
        )
        writer.writeheader()
        writer.writerows(aggregate)
    print(json.dumps(aggregate, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def cmd_report(args) -> int:
    state = resume(args.checkpoint)
    test = load_jsonl(args.test, state.taxonomy)
    report, markdown = report_run(state, test)
    args.outdir.mkdir(parents=True, exist_ok=True)
    (args.outdir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (args.outdir / "report.md").write_text(markdown, encoding="utf-8")
    print(f"macro F1 {report.macro_f1:.4f}, accuracy {report.accuracy:.4f}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "bootstrap-split": cmd_bootstrap_split,
    "run": cmd_run,
    "evaluate": cmd_evaluate,
    "matrix": cmd_matrix,
    "serve": cmd_serve,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CorpusError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
