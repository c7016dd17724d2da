"""Offline evaluation: detection metrics against human labels, model
comparison, and silver-label export for scorer training.

The positive class is "hallucination": a verdict predicts positive whenever
its status is anything but SAFE. ERROR verdicts are excluded from metrics.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .pipeline import PassageVerdict, RunSummary, VerdictStatus
from .scoring import LLM_GRADER, format_hypothesis
from .types import PassageGuardError


class UnmatchedLabel(PassageGuardError):
    pass


class EmptyJoin(PassageGuardError):
    pass


class NoScoredPairs(PassageGuardError):
    pass


@dataclass(frozen=True)
class HumanLabel:
    entity_id: str
    is_hallucination: bool
    annotator_id: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "entity_id": self.entity_id,
            "is_hallucination": self.is_hallucination,
            "annotator_id": self.annotator_id,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "HumanLabel":
        return cls(
            entity_id=str(obj["entity_id"]),
            is_hallucination=bool(obj["is_hallucination"]),
            annotator_id=obj.get("annotator_id"),
        )


@dataclass(frozen=True)
class MetricReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int

    def to_json(self) -> dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics_from_counts(tp: int, fp: int, fn: int, tn: int) -> MetricReport:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return MetricReport(precision, recall, f1_score(precision, recall), tp, fp, fn, tn)


def resolve_labels(labels: list[HumanLabel]) -> dict[str, bool]:
    """Collapse duplicate annotations per entity: majority wins, ties count
    as hallucination (the conservative reading)."""
    votes: dict[str, list[bool]] = {}
    for label in labels:
        votes.setdefault(label.entity_id, []).append(label.is_hallucination)
    resolved: dict[str, bool] = {}
    for entity_id, flags in votes.items():
        positive = sum(flags)
        resolved[entity_id] = positive * 2 >= len(flags)
    return resolved


def detection_metrics(
    verdicts: list[PassageVerdict], labels: list[HumanLabel]
) -> MetricReport:
    """Confusion matrix of pipeline flags against human hallucination labels."""
    by_id = {v.entity.entity_id: v for v in verdicts}
    resolved = resolve_labels(labels)
    tp = fp = fn = tn = 0
    joined = 0
    for entity_id, is_hallucination in resolved.items():
        verdict = by_id.get(entity_id)
        if verdict is None:
            raise UnmatchedLabel(f"label references unknown entity_id {entity_id!r}")
        if verdict.status is VerdictStatus.ERROR:
            continue
        joined += 1
        predicted = verdict.status is not VerdictStatus.SAFE
        if predicted and is_hallucination:
            tp += 1
        elif predicted and not is_hallucination:
            fp += 1
        elif not predicted and is_hallucination:
            fn += 1
        else:
            tn += 1
    if joined == 0:
        raise EmptyJoin("no labels joined a usable (non-ERROR) verdict")
    return metrics_from_counts(tp, fp, fn, tn)


def compare_models(
    summaries: list[RunSummary],
    labels: list[HumanLabel] | None = None,
    verdicts: list[PassageVerdict] | None = None,
) -> list[dict[str, Any]]:
    """One row per model, sorted by pipeline score descending.

    When labels are given, verdicts are required to join each label to its
    model, and each row also carries the human non-hallucination rate.
    """
    if not summaries:
        raise PassageGuardError("compare_models needs at least one summary")
    human_rates: dict[str, tuple[float, int]] = {}
    if labels:
        if verdicts is None:
            raise PassageGuardError("labels were given without verdicts to join them to")
        model_by_entity = {v.entity.entity_id: v.entity.model_id for v in verdicts}
        resolved = resolve_labels(labels)
        per_model: dict[str, list[bool]] = {}
        for entity_id, is_hallucination in resolved.items():
            model_id = model_by_entity.get(entity_id)
            if model_id is None:
                raise UnmatchedLabel(f"label references unknown entity_id {entity_id!r}")
            per_model.setdefault(model_id, []).append(not is_hallucination)
        for model_id, oks in per_model.items():
            human_rates[model_id] = (sum(oks) / len(oks), len(oks))
    rows: list[dict[str, Any]] = []
    for summary in sorted(summaries, key=lambda s: (-s.safepassage_score, s.model_id)):
        row: dict[str, Any] = {
            "model_id": summary.model_id,
            "safepassage_score": summary.safepassage_score,
            "n_entities": summary.n_entities,
        }
        if summary.model_id in human_rates:
            rate, n_labeled = human_rates[summary.model_id]
            row["human_score"] = rate
            row["n_labeled"] = n_labeled
        rows.append(row)
    return rows


def export_silver(verdicts: list[PassageVerdict]) -> list[dict[str, Any]]:
    """Turn grader-scored verdicts into premise/hypothesis training pairs.

    Alignment-rejected entities never reached scoring and are skipped; each
    scored verdict yields one record labeled 1 when the grader accepted it.
    """
    records: list[dict[str, Any]] = []
    for verdict in verdicts:
        if verdict.score is None:
            continue
        if verdict.score.backend != LLM_GRADER:
            raise PassageGuardError(
                f"silver export needs grader scores, got backend {verdict.score.backend!r} "
                f"for {verdict.entity.entity_id!r}"
            )
        assert verdict.alignment is not None
        records.append({
            "premise": verdict.alignment.aligned_text,
            "hypothesis": format_hypothesis(verdict.entity),
            "label": 1 if verdict.score.score == 1.0 else 0,
        })
    if not records:
        raise NoScoredPairs("no verdicts carry a grader score")
    return records


def render_table(rows: list[dict[str, Any]], columns: list[str]) -> str:
    """Align rows into a fixed-width plain-text table."""

    def fmt(value: Any) -> str:
        if isinstance(value, float):
            return f"{value:.3f}"
        if value is None:
            return "-"
        return str(value)

    cells = [[fmt(row.get(col)) for col in columns] for row in rows]
    widths = [max(len(col), *(len(row[i]) for row in cells)) if cells else len(col)
              for i, col in enumerate(columns)]
    lines = ["  ".join(col.ljust(w) for col, w in zip(columns, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def comparison_csv(rows: list[dict[str, Any]]) -> str:
    """Plot-ready CSV of per-model pipeline and human scores."""
    lines = ["model_id,safepassage_score,human_score"]
    for row in rows:
        human = row.get("human_score")
        human_str = f"{human:.6f}" if human is not None else ""
        lines.append(f"{row['model_id']},{row['safepassage_score']:.6f},{human_str}")
    return "\n".join(lines) + "\n"
