from __future__ import annotations

import csv
import json

import pytest

from algen.cli import main
from algen.corpus import default_taxonomy, load_jsonl
from algen.synthetic import make_dataset

TAX = default_taxonomy()


@pytest.fixture(scope="module")
def world_dir(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli-world")
    world = make_dataset(
        n_unlabeled=120,
        seed=9,
        bootstrap_size=18,
        dev_size=12,
        test_size=30,
        tokens_per_class=12,
        shared_tokens=8,
    )
    from algen.corpus import save_jsonl

    save_jsonl(world.unlabeled, base / "unlabeled.jsonl")
    save_jsonl(world.bootstrap, base / "bootstrap.jsonl")
    save_jsonl(world.dev, base / "dev.jsonl")
    save_jsonl(world.test, base / "test.jsonl")
    (base / "answers.json").write_text(json.dumps(world.answers()))
    return base, world


class TestIngest:
    def test_plain_text_lines_get_ids(self, tmp_path, capsys):
        source = tmp_path / "posts.txt"
        source.write_text("first post\nsecond post\nthird post\n", encoding="utf-8")
        out = tmp_path / "corpus.jsonl"
        assert main(["ingest", str(source), "--output", str(out)]) == 0
        pool = load_jsonl(out, TAX)
        assert len(pool) == 3
        assert all(i.startswith("ing") for i in pool.ids())

    def test_duplicates_reported_and_dropped(self, tmp_path, capsys):
        source = tmp_path / "posts.txt"
        source.write_text("same  post\nSAME POST\nother\n", encoding="utf-8")
        out = tmp_path / "corpus.jsonl"
        assert main(["ingest", str(source), "--output", str(out)]) == 0
        assert len(load_jsonl(out, TAX)) == 2
        assert "dropped 1 dedup-key duplicates" in capsys.readouterr().out

    def test_non_utf8_line_rejected_with_line_number(self, tmp_path, capsys):
        source = tmp_path / "posts.txt"
        source.write_bytes(b"good line\n\xff\xfe broken\nanother good\n")
        out = tmp_path / "corpus.jsonl"
        assert main(["ingest", str(source), "--output", str(out)]) == 0
        captured = capsys.readouterr().out
        assert ":2: not UTF-8" in captured
        assert len(load_jsonl(out, TAX)) == 2

    def test_zero_usable_lines_errors(self, tmp_path, capsys):
        source = tmp_path / "empty.txt"
        source.write_text("\n\n", encoding="utf-8")
        assert main(["ingest", str(source), "--output", str(tmp_path / "o.jsonl")]) == 1


class TestBootstrapSplit:
    def test_sizes_and_remainder(self, world_dir, tmp_path):
        base, world = world_dir
        outdir = tmp_path / "splits"
        code = main(
            [
                "bootstrap-split",
                "--corpus", str(base / "unlabeled.jsonl"),
                "--bootstrap", "10", "--dev", "10", "--test", "20",
                "--labels", str(base / "answers.json"),
                "--seed", "4",
                "--outdir", str(outdir),
            ]
        )
        assert code == 0
        assert len(load_jsonl(outdir / "bootstrap.jsonl", TAX)) == 10
        assert len(load_jsonl(outdir / "dev.jsonl", TAX)) == 10
        assert len(load_jsonl(outdir / "test.jsonl", TAX)) == 20
        assert len(load_jsonl(outdir / "unlabeled.jsonl", TAX)) == 120 - 40

    def test_same_seed_same_split(self, world_dir, tmp_path):
        base, _ = world_dir
        ids = []
        for name in ("a", "b"):
            outdir = tmp_path / name
            main(
                [
                    "bootstrap-split",
                    "--corpus", str(base / "unlabeled.jsonl"),
                    "--bootstrap", "10", "--dev", "10", "--test", "20",
                    "--labels", str(base / "answers.json"),
                    "--seed", "4",
                    "--outdir", str(outdir),
                ]
            )
            ids.append(load_jsonl(outdir / "bootstrap.jsonl", TAX).ids())
        assert ids[0] == ids[1]

    def test_oversized_request_errors(self, world_dir, tmp_path):
        base, _ = world_dir
        code = main(
            [
                "bootstrap-split",
                "--corpus", str(base / "unlabeled.jsonl"),
                "--bootstrap", "100", "--dev", "100", "--test", "100",
                "--labels", str(base / "answers.json"),
                "--outdir", str(tmp_path / "x"),
            ]
        )
        assert code == 1

    def test_missing_labels_listed(self, world_dir, tmp_path, capsys):
        base, _ = world_dir
        (tmp_path / "partial.json").write_text("{}")
        code = main(
            [
                "bootstrap-split",
                "--corpus", str(base / "unlabeled.jsonl"),
                "--bootstrap", "5", "--dev", "5", "--test", "5",
                "--labels", str(tmp_path / "partial.json"),
                "--outdir", str(tmp_path / "x"),
            ]
        )
        assert code == 1
        assert "missing 15 sampled ids" in capsys.readouterr().err


def run_args(base, outdir, **kw):
    args = [
        "run",
        "--unlabeled", str(base / "unlabeled.jsonl"),
        "--bootstrap", str(base / "bootstrap.jsonl"),
        "--dev", str(base / "dev.jsonl"),
        "--answers", str(base / "answers.json"),
        "--outdir", str(outdir),
        "--mock-llm",
        "--epochs", "25",
    ]
    for key, value in kw.items():
        args += [f"--{key.replace('_', '-')}", str(value)]
    return args


class TestRun:
    def test_full_scale_run_yields_600_instance_split(self, tmp_path):
        # The canonical configuration: budget 100, batch 20, k=5 variations.
        from algen.corpus import save_jsonl
        from algen.synthetic import make_dataset

        base = tmp_path / "world"
        base.mkdir()
        world = make_dataset(n_unlabeled=2000, seed=7)
        save_jsonl(world.unlabeled, base / "unlabeled.jsonl")
        save_jsonl(world.bootstrap, base / "bootstrap.jsonl")
        save_jsonl(world.dev, base / "dev.jsonl")
        (base / "answers.json").write_text(json.dumps(world.answers()))
        outdir = tmp_path / "full"
        code = main(run_args(base, outdir, strategy="cluster_al", budget=100, batch=20, variations=5, seed=1))
        assert code == 0
        acquired = load_jsonl(outdir / "train_cluster_al.jsonl", TAX)
        assert len(acquired) == 600

    def test_acquired_split_size_follows_growth_law(self, world_dir, tmp_path):
        base, _ = world_dir
        outdir = tmp_path / "run1"
        code = main(run_args(base, outdir, strategy="cluster_al", budget=40, batch=20, variations=5, seed=1))
        assert code == 0
        acquired = load_jsonl(outdir / "train_cluster_al.jsonl", TAX)
        assert len(acquired) == 40 * 6  # 40 human + 200 generated
        assert (outdir / "checkpoint.json").exists()
        assert (outdir / "events.jsonl").exists()
        summary = json.loads((outdir / "summary.json").read_text())
        assert summary["human"] == 40
        assert summary["generated"] == 200

    def test_zero_variations_gives_pure_human_split(self, world_dir, tmp_path):
        base, _ = world_dir
        outdir = tmp_path / "run0"
        code = main(run_args(base, outdir, strategy="random", budget=40, batch=20, variations=0, seed=1))
        assert code == 0
        acquired = load_jsonl(outdir / "train_random.jsonl", TAX)
        assert len(acquired) == 40
        assert all(inst.origin == "human" for inst in acquired)

    def test_invalid_strategy_is_usage_error(self, world_dir, tmp_path):
        base, _ = world_dir
        with pytest.raises(SystemExit) as excinfo:
            main(run_args(base, tmp_path / "x", strategy="bogus"))
        assert excinfo.value.code == 2

    def test_report_command_round_trips_checkpoint(self, world_dir, tmp_path):
        base, _ = world_dir
        outdir = tmp_path / "run2"
        main(run_args(base, outdir, strategy="topn", budget=20, batch=10, variations=2, seed=2))
        report_dir = tmp_path / "report"
        code = main(
            ["report", "--checkpoint", str(outdir / "checkpoint.json"), "--test", str(base / "test.jsonl"), "--outdir", str(report_dir)]
        )
        assert code == 0
        report = json.loads((report_dir / "report.json").read_text())
        assert report["trajectory"][0]["iteration"] == 0
        assert (report_dir / "report.md").exists()


class TestEvaluate:
    def test_cross_table_over_two_splits(self, world_dir, tmp_path):
        base, _ = world_dir
        run_a = tmp_path / "ra"
        run_b = tmp_path / "rb"
        main(run_args(base, run_a, strategy="random", budget=20, batch=10, variations=2, seed=3))
        main(run_args(base, run_b, strategy="cluster_al", budget=20, batch=10, variations=2, seed=3))
        outdir = tmp_path / "eval"
        code = main(
            [
                "evaluate",
                "--splits", str(run_a / "train_random.jsonl"), str(run_b / "train_cluster_al.jsonl"),
                "--bootstrap", str(base / "bootstrap.jsonl"),
                "--test", str(base / "test.jsonl"),
                "--epochs", "25",
                "--outdir", str(outdir),
            ]
        )
        assert code == 0
        with open(outdir / "cross_table.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 2
        assert {r["split"] for r in rows} == {"train_random", "train_cluster_al"}
        assert all(0.0 <= float(r["macro_f1"]) <= 1.0 for r in rows)
        assert (outdir / "report_train_random_native.json").exists()
        assert (outdir / "report_train_random_native.md").exists()

    def test_remote_transfer_row(self, world_dir, tmp_path):
        from algen.testing import MockModelServer

        base, _ = world_dir
        run_a = tmp_path / "ra"
        main(run_args(base, run_a, strategy="random", budget=20, batch=10, variations=0, seed=3))
        outdir = tmp_path / "eval-remote"
        with MockModelServer() as server:
            code = main(
                [
                    "evaluate",
                    "--splits", str(run_a / "train_random.jsonl"),
                    "--test", str(base / "test.jsonl"),
                    "--learner", "native",
                    "--transfer", f"tokenmatch={server.url}",
                    "--epochs", "25",
                    "--outdir", str(outdir),
                ]
            )
        assert code == 0
        with open(outdir / "cross_table.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["learner"] for r in rows} == {"native", "tokenmatch"}

    def test_unreachable_remote_records_failure_and_continues(self, world_dir, tmp_path):
        base, _ = world_dir
        run_a = tmp_path / "ra2"
        main(run_args(base, run_a, strategy="random", budget=20, batch=10, variations=0, seed=3))
        outdir = tmp_path / "eval-fail"
        code = main(
            [
                "evaluate",
                "--splits", str(run_a / "train_random.jsonl"),
                "--test", str(base / "test.jsonl"),
                "--transfer", "dead=http://127.0.0.1:9/",
                "--epochs", "25",
                "--outdir", str(outdir),
            ]
        )
        assert code == 0
        with open(outdir / "cross_table.csv") as fh:
            rows = {r["learner"]: r for r in csv.DictReader(fh)}
        assert rows["dead"]["error"]
        assert rows["native"]["macro_f1"]

    def test_missing_test_split_errors(self, world_dir, tmp_path):
        base, _ = world_dir
        code = main(
            [
                "evaluate",
                "--splits", str(base / "bootstrap.jsonl"),
                "--test", str(base / "nope.jsonl"),
                "--outdir", str(tmp_path / "x"),
            ]
        )
        assert code == 1


class TestMatrix:
    def test_two_by_two_grid_aggregates(self, world_dir, tmp_path):
        base, _ = world_dir
        outdir = tmp_path / "matrix"
        code = main(
            [
                "matrix",
                "--unlabeled", str(base / "unlabeled.jsonl"),
                "--bootstrap", str(base / "bootstrap.jsonl"),
                "--answers", str(base / "answers.json"),
                "--test", str(base / "test.jsonl"),
                "--strategies", "random,cluster_al",
                "--seeds", "1,2",
                "--budget", "20", "--batch", "10", "--variations", "2",
                "--mock-llm",
                "--epochs", "25",
                "--outdir", str(outdir),
            ]
        )
        assert code == 0
        with open(outdir / "cells.csv") as fh:
            cells = list(csv.DictReader(fh))
        assert len(cells) == 4
        with open(outdir / "aggregate.csv") as fh:
            aggregate = list(csv.DictReader(fh))
        assert [row["strategy"] for row in aggregate] == ["random", "cluster_al"]
        assert all(row["runs"] == "2" for row in aggregate)
        assert (outdir / "random_seed1" / "train_random.jsonl").exists()

    def test_unknown_strategy_errors_listing_names(self, world_dir, tmp_path, capsys):
        base, _ = world_dir
        code = main(
            [
                "matrix",
                "--unlabeled", str(base / "unlabeled.jsonl"),
                "--bootstrap", str(base / "bootstrap.jsonl"),
                "--test", str(base / "test.jsonl"),
                "--strategies", "random,frobnicate",
                "--outdir", str(tmp_path / "x"),
            ]
        )
        assert code == 2
        err = capsys.readouterr().err
        assert "frobnicate" in err and "cluster_al" in err
