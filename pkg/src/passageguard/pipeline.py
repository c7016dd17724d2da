"""Orchestration: generate, then align, then score, one verdict per entity.

Alignment strictly gates scoring: an entity whose context cannot be aligned
is rejected without ever reaching the scorer. Per-entity failures become
ERROR verdicts; a document-level extraction failure produces an empty
verdict list plus a run-level error record so other documents keep going.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Any

from .align import AlignmentResult, ColumnCounts, align, diagnose
from .config import PipelineConfig
from .extraction import ExtractionResponse, ExtractionRequest, LLMTransport, extract
from .normalize import normalize
from .scoring import EvidenceScorer, ScoredPair, ScoreResult, format_hypothesis
from .types import Document, Entity, EntityType, PassageGuardError


class VerdictStatus(str, Enum):
    SAFE = "SAFE"
    REJECTED_ALIGNMENT = "REJECTED_ALIGNMENT"
    REJECTED_SCORE = "REJECTED_SCORE"
    ERROR = "ERROR"


@dataclass(frozen=True)
class PassageVerdict:
    entity: Entity
    alignment: AlignmentResult | None
    score: ScoreResult | None
    status: VerdictStatus
    error_detail: str | None = None

    def __post_init__(self) -> None:
        if self.status is VerdictStatus.SAFE:
            assert self.alignment is not None and self.alignment.accepted
            assert self.score is not None and self.score.passed
        elif self.status is VerdictStatus.REJECTED_ALIGNMENT:
            assert self.alignment is None or not self.alignment.accepted
            assert self.score is None
        elif self.status is VerdictStatus.REJECTED_SCORE:
            assert self.alignment is not None and self.alignment.accepted
            assert self.score is not None and not self.score.passed

    def to_json(self) -> dict[str, Any]:
        alignment_json = None
        if self.alignment is not None:
            alignment_json = self.alignment.to_json()
            alignment_json["diagnosis"] = diagnose(self.alignment, self.entity.context).value
        return {
            "entity": self.entity.to_json(),
            "alignment": alignment_json,
            "score": self.score.to_json() if self.score is not None else None,
            "status": self.status.value,
            "error_detail": self.error_detail,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "PassageVerdict":
        alignment = None
        if obj.get("alignment") is not None:
            a = obj["alignment"]
            counts = a["column_counts"]
            alignment = AlignmentResult(
                matched_span_original=(int(a["span_start"]), int(a["span_end"])),
                aligned_text=str(a["aligned_text"]),
                matched_columns=int(a["matches"]),
                total_columns=int(a["columns"]),
                score=float(a["score"]),
                column_counts=ColumnCounts(
                    int(counts["matches"]), int(counts["mismatches"]),
                    int(counts["insertions"]), int(counts["deletions"]),
                ),
                accepted=bool(a["accepted"]),
            )
        score = None
        if obj.get("score") is not None:
            score = ScoreResult.from_json(obj["score"])
        return cls(
            entity=Entity.from_json(obj["entity"]),
            alignment=alignment,
            score=score,
            status=VerdictStatus(obj["status"]),
            error_detail=obj.get("error_detail"),
        )


@dataclass(frozen=True)
class RunSummary:
    model_id: str
    n_entities: int
    n_safe: int
    n_rejected_alignment: int
    n_rejected_score: int
    n_error: int
    safepassage_score: float

    def to_json(self) -> dict[str, Any]:
        return {
            "model_id": self.model_id,
            "n_entities": self.n_entities,
            "n_safe": self.n_safe,
            "n_rejected_alignment": self.n_rejected_alignment,
            "n_rejected_score": self.n_rejected_score,
            "n_error": self.n_error,
            "safepassage_score": self.safepassage_score,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "RunSummary":
        return cls(
            model_id=str(obj["model_id"]),
            n_entities=int(obj["n_entities"]),
            n_safe=int(obj["n_safe"]),
            n_rejected_alignment=int(obj["n_rejected_alignment"]),
            n_rejected_score=int(obj["n_rejected_score"]),
            n_error=int(obj["n_error"]),
            safepassage_score=float(obj["safepassage_score"]),
        )


class Extractor:
    """Binds a transport, model id, and prompt template into a per-document call."""

    def __init__(
        self,
        transport: LLMTransport,
        model_id: str,
        prompt_template: str,
        max_retries: int = 2,
    ) -> None:
        self._transport = transport
        self._model_id = model_id
        self._template = prompt_template
        self._max_retries = max_retries

    def extract_document(self, doc: Document, schema: list[EntityType]) -> ExtractionResponse:
        req = ExtractionRequest(
            doc=doc,
            schema=schema,
            prompt_template=self._template,
            model_id=self._model_id,
            max_retries=self._max_retries,
        )
        return extract(req, self._transport)


@dataclass(frozen=True)
class DocumentRunResult:
    verdicts: list[PassageVerdict]
    run_error: str | None = None
    parse_warnings: tuple[str, ...] = ()


def _score_accepted(
    entries: list[tuple[Entity, AlignmentResult]], scorer: EvidenceScorer
) -> list[tuple[ScoreResult | None, str | None]]:
    """Score accepted entities, isolating failures per entity.

    A batch endpoint is used when the scorer offers one; if the batch call
    fails, each pair is retried individually so one bad pair cannot take the
    whole document down.
    """
    pairs = [
        ScoredPair(premise=aln.aligned_text, hypothesis=format_hypothesis(entity),
                   entity_id=entity.entity_id)
        for entity, aln in entries
    ]
    batch = getattr(scorer, "score_pairs", None)
    if batch is not None:
        try:
            return [(result, None) for result in batch(pairs)]
        except PassageGuardError:
            pass  # fall through to per-pair scoring
    out: list[tuple[ScoreResult | None, str | None]] = []
    for pair in pairs:
        try:
            out.append((scorer.score_pair(pair), None))
        except PassageGuardError as exc:
            out.append((None, f"scoring failed: {exc}"))
    return out


def run_document(
    doc: Document,
    schema: list[EntityType],
    cfg: PipelineConfig,
    extractor: Any,
    scorer: EvidenceScorer,
) -> DocumentRunResult:
    """Run generate -> align -> score for one document."""
    try:
        response = extractor.extract_document(doc, schema)
    except PassageGuardError as exc:
        return DocumentRunResult([], run_error=f"{doc.doc_id}: extraction failed: {exc}")

    doc_norm = normalize(doc.text, fold_case=cfg.fold_case)
    staged: list[tuple[Entity, AlignmentResult | None, VerdictStatus | None, str | None]] = []
    to_score: list[tuple[int, Entity, AlignmentResult]] = []
    for entity in response.entities:
        ctx_len = len(normalize(entity.context, fold_case=cfg.fold_case).normalized)
        if ctx_len < cfg.min_context_chars:
            staged.append((entity, None, VerdictStatus.REJECTED_ALIGNMENT, None))
            continue
        try:
            result = align(entity.context, doc, cfg, doc_norm=doc_norm)
        except PassageGuardError as exc:
            staged.append((entity, None, VerdictStatus.ERROR, f"alignment failed: {exc}"))
            continue
        if not result.accepted:
            staged.append((entity, result, VerdictStatus.REJECTED_ALIGNMENT, None))
        else:
            to_score.append((len(staged), entity, result))
            staged.append((entity, result, None, None))

    scored = _score_accepted([(e, a) for _, e, a in to_score], scorer) if to_score else []
    score_by_index: dict[int, tuple[ScoreResult | None, str | None]] = {
        idx: outcome for (idx, _, _), outcome in zip(to_score, scored)
    }

    verdicts: list[PassageVerdict] = []
    for idx, (entity, alignment, status, detail) in enumerate(staged):
        if status is not None:
            verdicts.append(PassageVerdict(entity, alignment, None, status, detail))
            continue
        score, error = score_by_index[idx]
        if score is None:
            verdicts.append(
                PassageVerdict(entity, alignment, None, VerdictStatus.ERROR, error))
        elif score.passed:
            verdicts.append(PassageVerdict(entity, alignment, score, VerdictStatus.SAFE))
        else:
            verdicts.append(
                PassageVerdict(entity, alignment, score, VerdictStatus.REJECTED_SCORE))
    return DocumentRunResult(verdicts, parse_warnings=tuple(response.parse_warnings))


@dataclass(frozen=True)
class CorpusRunResult:
    verdicts: list[PassageVerdict]
    summaries: list[RunSummary]
    doc_errors: list[dict[str, str]]
    parse_warnings: list[str]


def run_corpus(
    docs: list[Document],
    schema: list[EntityType],
    cfg: PipelineConfig,
    extractor: Any,
    scorer: EvidenceScorer,
) -> CorpusRunResult:
    """Run the pipeline over a corpus with bounded document parallelism.

    Output order is the corpus order regardless of completion order, so runs
    are reproducible.
    """
    if cfg.doc_parallelism > 1 and len(docs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.doc_parallelism) as pool:
            results = list(pool.map(
                lambda d: run_document(d, schema, cfg, extractor, scorer), docs))
    else:
        results = [run_document(d, schema, cfg, extractor, scorer) for d in docs]

    verdicts: list[PassageVerdict] = []
    doc_errors: list[dict[str, str]] = []
    warnings: list[str] = []
    for doc, result in zip(docs, results):
        verdicts.extend(result.verdicts)
        if result.run_error is not None:
            doc_errors.append({"doc_id": doc.doc_id, "error": result.run_error})
        warnings.extend(result.parse_warnings)
    summaries = summarize_by_model(verdicts)
    return CorpusRunResult(verdicts, summaries, doc_errors, warnings)


def summarize(verdicts: list[PassageVerdict], model_id: str) -> RunSummary:
    """Aggregate one model's verdicts into counts and a pass rate.

    The score is the fraction SAFE among non-ERROR verdicts, so backend
    outages are not counted as hallucinations.
    """
    counts = {status: 0 for status in VerdictStatus}
    for v in verdicts:
        counts[v.status] += 1
    n = len(verdicts)
    n_error = counts[VerdictStatus.ERROR]
    denominator = n - n_error
    score = counts[VerdictStatus.SAFE] / denominator if denominator > 0 else 0.0
    return RunSummary(
        model_id=model_id,
        n_entities=n,
        n_safe=counts[VerdictStatus.SAFE],
        n_rejected_alignment=counts[VerdictStatus.REJECTED_ALIGNMENT],
        n_rejected_score=counts[VerdictStatus.REJECTED_SCORE],
        n_error=n_error,
        safepassage_score=score,
    )


def summarize_by_model(verdicts: list[PassageVerdict]) -> list[RunSummary]:
    by_model: dict[str, list[PassageVerdict]] = {}
    for v in verdicts:
        by_model.setdefault(v.entity.model_id, []).append(v)
    return [summarize(by_model[m], m) for m in sorted(by_model)]
