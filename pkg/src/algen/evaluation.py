"""Classification metrics and distributional-bias statistics.

Conventions that matter downstream:

* macro precision/recall/F1 average over ALL taxonomy classes, and any 0/0
  scores 0, so classes the model never predicts drag the macro down.
* class_count_stddev uses the sample convention (divisor n-1).
* error_rate_stddev is the sample std of per-class error percentages,
  computed over classes with non-zero gold support.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import Pool, Taxonomy


class EvalError(ValueError):
    pass


def confusion(gold: Sequence[str], pred: Sequence[str], taxonomy: Taxonomy) -> np.ndarray:
    """Confusion matrix with rows = gold, columns = predicted, in taxonomy order."""
    if len(gold) != len(pred):
        raise EvalError(f"length mismatch: {len(gold)} gold vs {len(pred)} predictions")
    counts = np.zeros((len(taxonomy), len(taxonomy)), dtype=np.int64)
    for g, p in zip(gold, pred):
        counts[taxonomy.index(g), taxonomy.index(p)] += 1
    return counts


def macro_prf1(cm: np.ndarray, taxonomy: Taxonomy) -> dict:
    """Per-class and macro precision/recall/F1 plus accuracy from a confusion matrix."""
    cm = np.asarray(cm)
    tp = np.diag(cm).astype(np.float64)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    total = int(cm.sum())
    per_class = {
        name: {
            "precision": float(precision[i]),
            "recall": float(recall[i]),
            "f1": float(f1[i]),
            "support": int(cm[i].sum()),
        }
        for i, name in enumerate(taxonomy.classes)
    }
    return {
        "accuracy": float(tp.sum() / total) if total else 0.0,
        "per_class": per_class,
        "macro_precision": float(precision.mean()),
        "macro_recall": float(recall.mean()),
        "macro_f1": float(f1.mean()),
    }


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def class_count_stddev(counts: Sequence[int]) -> float:
    """Sample standard deviation (divisor n-1) of per-class acquisition counts."""
    if len(counts) < 2:
        raise EvalError("need at least 2 class counts")
    return float(np.std(np.asarray(counts, dtype=np.float64), ddof=1))


def error_rate_stddev(cm: np.ndarray) -> float:
    """Sample std of per-class error percentages, over classes with gold support."""
    cm = np.asarray(cm)
    row_totals = cm.sum(axis=1)
    included = row_totals > 0
    if not included.any():
        raise EvalError("confusion matrix has no gold instances")
    rows = row_totals[included].astype(np.float64)
    diag = np.diag(cm)[included].astype(np.float64)
    error_pct = 100.0 * (rows - diag) / rows
    if error_pct.size < 2:
        return 0.0
    return float(np.std(error_pct, ddof=1))


def per_class_error(cm: np.ndarray, taxonomy: Taxonomy) -> dict[str, float | None]:
    """Error percentage per class; None for classes absent from gold."""
    cm = np.asarray(cm)
    out: dict[str, float | None] = {}
    for i, name in enumerate(taxonomy.classes):
        row = int(cm[i].sum())
        out[name] = None if row == 0 else float(100.0 * (row - cm[i, i]) / row)
    return out


def cohen_kappa(a: Sequence[str], b: Sequence[str]) -> float:
    """Chance-corrected agreement between two labelings of the same items."""
    if len(a) != len(b) or len(a) == 0:
        raise EvalError("labelings must be non-empty and of equal length")
    n = len(a)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    classes = sorted(set(a) | set(b))
    p_e = sum((a.count(c) / n) * (b.count(c) / n) for c in classes)
    if p_e >= 1.0 - 1e-15:
        if p_o >= 1.0 - 1e-15:
            return 1.0
        raise EvalError("degenerate marginals: chance agreement is 1 but raters disagree")
    return (p_o - p_e) / (1.0 - p_e)


@dataclass
class MetricsReport:
    """Everything measured about one (training split, learner, test set) cell."""

    accuracy: float
    per_class: dict
    macro_precision: float
    macro_recall: float
    macro_f1: float
    confusion: list[list[int]]
    class_counts: dict[str, int] | None = None
    class_count_stddev: float | None = None
    error_rate_stddev: float | None = None
    per_class_error: dict | None = None
    kappa: float | None = None
    trajectory: list[dict] = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class": self.per_class,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "confusion": self.confusion,
            "class_counts": self.class_counts,
            "class_count_stddev": self.class_count_stddev,
            "error_rate_stddev": self.error_rate_stddev,
            "per_class_error": self.per_class_error,
            "kappa": self.kappa,
            "trajectory": self.trajectory,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(**data)

    def to_markdown(self, taxonomy: Taxonomy) -> str:
        out = io.StringIO()
        out.write("# Evaluation report\n\n")
        out.write(f"- accuracy: {self.accuracy:.4f}\n")
        out.write(f"- macro precision: {self.macro_precision:.4f}\n")
        out.write(f"- macro recall: {self.macro_recall:.4f}\n")
        out.write(f"- macro F1: {self.macro_f1:.4f}\n")
        if self.class_count_stddev is not None:
            out.write(f"- acquired class-count stddev: {self.class_count_stddev:.2f}\n")
        if self.error_rate_stddev is not None:
            out.write(f"- error-rate stddev (per-class error %, sample std): {self.error_rate_stddev:.2f}\n")
        if self.kappa is not None:
            out.write(f"- Cohen's kappa: {self.kappa:.4f}\n")
        out.write("\n## Per-class metrics\n\n")
        out.write("| class | precision | recall | F1 | support |\n|---|---|---|---|---|\n")
        for name in taxonomy.classes:
            row = self.per_class[name]
            out.write(
                f"| {name} | {row['precision']:.4f} | {row['recall']:.4f} | {row['f1']:.4f} | {row['support']} |\n"
            )
        if self.class_counts is not None:
            out.write("\n## Acquired instances per class\n\n")
            out.write("| class | count |\n|---|---|\n")
            for name in taxonomy.classes:
                out.write(f"| {name} | {self.class_counts.get(name, 0)} |\n")
        out.write("\n## Confusion matrix (rows = gold, columns = predicted)\n\n")
        header = " | ".join(taxonomy.classes)
        out.write(f"| | {header} |\n|{'---|' * (len(taxonomy) + 1)}\n")
        for i, name in enumerate(taxonomy.classes):
            cells = " | ".join(str(v) for v in self.confusion[i])
            out.write(f"| {name} | {cells} |\n")
        if self.trajectory:
            out.write("\n## Per-iteration trajectory\n\n")
            out.write("| iteration | labeled pool size | dev macro F1 |\n|---|---|---|\n")
            for point in self.trajectory:
                f1 = point.get("dev_macro_f1")
                f1_text = f"{f1:.4f}" if f1 is not None else "-"
                out.write(f"| {point['iteration']} | {point.get('labeled_size', '-')} | {f1_text} |\n")
        return out.getvalue()


def confusion_to_csv(cm: np.ndarray, taxonomy: Taxonomy) -> str:
    lines = ["gold\\pred," + ",".join(taxonomy.classes)]
    for i, name in enumerate(taxonomy.classes):
        lines.append(name + "," + ",".join(str(int(v)) for v in np.asarray(cm)[i]))
    return "\n".join(lines) + "\n"


def evaluate_predictions(gold: Sequence[str], pred: Sequence[str], taxonomy: Taxonomy) -> MetricsReport:
    cm = confusion(gold, pred, taxonomy)
    frag = macro_prf1(cm, taxonomy)
    return MetricsReport(
        accuracy=frag["accuracy"],
        per_class=frag["per_class"],
        macro_precision=frag["macro_precision"],
        macro_recall=frag["macro_recall"],
        macro_f1=frag["macro_f1"],
        confusion=cm.tolist(),
        error_rate_stddev=error_rate_stddev(cm),
        per_class_error=per_class_error(cm, taxonomy),
    )


def evaluate_learner(learner, test: Pool, taxonomy: Taxonomy) -> MetricsReport:
    """Run the learner over a labeled test pool and score it."""
    if len(test) == 0:
        raise EvalError("test pool is empty")
    texts = [inst.text for inst in test]
    gold = [inst.label for inst in test]
    probs = learner.predict_proba_texts(texts)
    pred = [taxonomy.classes[i] for i in np.argmax(probs, axis=1)]
    return evaluate_predictions(gold, pred, taxonomy)


def report_run(state, test: Pool) -> tuple[MetricsReport, str]:
    """Full report for a finished (or in-flight) run: test metrics, acquired
    class-count table with its stddev, and the per-iteration trajectory
    recorded in the event history. Returns the report and its Markdown form.
    """
    taxonomy = state.taxonomy
    report = evaluate_learner(state.learner, test, taxonomy)
    acquired_counts = state.class_counts()
    report.class_counts = acquired_counts
    if sum(acquired_counts.values()) > 0:
        report.class_count_stddev = class_count_stddev(list(acquired_counts.values()))
    # Row at iteration 0 is the bootstrap-only learner; retrain events are
    # stamped with the batch index they closed, so they land at iteration i+1.
    report.trajectory = [{"iteration": 0, "labeled_size": len(state.bootstrap_ids), "dev_macro_f1": None}] + [
        {"iteration": e["iteration"] + 1, "labeled_size": e.get("labeled_size"), "dev_macro_f1": e.get("dev_macro_f1")}
        for e in state.history
        if e["type"] == "retrain"
    ]
    report.notes = {
        "strategy": state.config.strategy,
        "iterations": state.iteration,
        "remaining_budget": state.remaining_budget,
        "error_rate_stddev_definition": "sample std of per-class error percentages over classes with gold support",
    }
    return report, report.to_markdown(taxonomy)
