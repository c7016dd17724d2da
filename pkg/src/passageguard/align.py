"""Character-level local alignment of an extractor-copied context into a document.

The best local alignment (Smith-Waterman) of the normalized context against
the normalized document is scored as matched columns over total columns
(matches + mismatches + gap columns), and the extraction is kept only when
that ratio reaches the configured threshold.

Determinism contract: among equal-score alignments the one with the earliest
document start wins, then the earliest end; within a cell, predecessor
preference is diagonal, then context-gap, then document-gap. The score pass
is O(|context|) memory over the whole document; the traceback is recomputed
on just the matched window.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from .config import PipelineConfig
from .normalize import NormalizedText, normalize
from .types import Document, PassageGuardError


class ContextTooShort(PassageGuardError):
    pass


class EmptyDocument(PassageGuardError):
    pass


class ColumnCounts(NamedTuple):
    matches: int
    mismatches: int
    insertions: int  # context-side extra characters (gap in the document)
    deletions: int   # document-side extra characters (gap in the context)


class MismatchLabel(str, Enum):
    EXACT = "EXACT"
    CHAR_NOISE = "CHAR_NOISE"
    INSERTED_TOKENS = "INSERTED_TOKENS"
    ELIDED_TOKENS = "ELIDED_TOKENS"
    NOT_FOUND = "NOT_FOUND"


@dataclass(frozen=True)
class AlignmentResult:
    matched_span_original: tuple[int, int]
    aligned_text: str
    matched_columns: int
    total_columns: int
    score: float                    # matched_columns / total_columns
    column_counts: ColumnCounts
    accepted: bool
    # Gap-run texts kept for mismatch diagnosis: maximal runs of document-side
    # and context-side extra characters, in alignment order.
    deleted_runs: tuple[str, ...] = ()
    inserted_runs: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        c = self.column_counts
        assert c.matches + c.mismatches + c.insertions + c.deletions == self.total_columns
        assert self.matched_columns == c.matches

    def to_json(self) -> dict:
        return {
            "span_start": self.matched_span_original[0],
            "span_end": self.matched_span_original[1],
            "aligned_text": self.aligned_text,
            "matches": self.matched_columns,
            "columns": self.total_columns,
            "score": self.score,
            "column_counts": {
                "matches": self.column_counts.matches,
                "mismatches": self.column_counts.mismatches,
                "insertions": self.column_counts.insertions,
                "deletions": self.column_counts.deletions,
            },
            "accepted": self.accepted,
        }


def _score_pass(
    ctx: str, doc: str, match: int, mismatch: int, gap: int
) -> tuple[int, int, int, int]:
    """Forward pass; returns (best score, start, end, context rows consumed).

    start/end are normalized-document offsets of the winning alignment's
    span. The start of each cell's alignment is propagated forward so the
    earliest-start tie-break never needs a full matrix.
    """
    m = len(ctx)
    prev = [0] * (m + 1)
    prev_start = [0] * (m + 1)
    cur = [0] * (m + 1)
    cur_start = [0] * (m + 1)
    best_score = 0
    best_start = 0
    best_end = 0
    best_row = 0
    for j in range(1, len(doc) + 1):
        doc_ch = doc[j - 1]
        cur[0] = 0
        cur_start[0] = 0
        for i in range(1, m + 1):
            diag = prev[i - 1] + (match if ctx[i - 1] == doc_ch else mismatch)
            up = cur[i - 1] + gap
            left = prev[i] + gap
            v = diag
            if up > v:
                v = up
            if left > v:
                v = left
            if v <= 0:
                cur[i] = 0
                cur_start[i] = 0
                continue
            cur[i] = v
            if v == diag:
                cur_start[i] = prev_start[i - 1] if prev[i - 1] > 0 else j - 1
            elif v == up:
                cur_start[i] = cur_start[i - 1] if cur[i - 1] > 0 else j
            else:
                cur_start[i] = prev_start[i] if prev[i] > 0 else j - 1
            if v > best_score or (
                v == best_score
                and (cur_start[i], j, i) < (best_start, best_end, best_row)
            ):
                best_score = v
                best_start = cur_start[i]
                best_end = j
                best_row = i
        prev, cur = cur, prev
        prev_start, cur_start = cur_start, prev_start
    return best_score, best_start, best_end, best_row


def _traceback(
    ctx: str, window: str, end_row: int, expect_score: int,
    match: int, mismatch: int, gap: int,
) -> tuple[ColumnCounts, list[str], list[str]]:
    """Recompute the DP on the matched window and walk the winning path back."""
    m, w = len(ctx), len(window)
    h = [[0] * (w + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        ctx_ch = ctx[i - 1]
        row = h[i]
        above = h[i - 1]
        for j in range(1, w + 1):
            v = above[j - 1] + (match if ctx_ch == window[j - 1] else mismatch)
            up = above[j] + gap
            if up > v:
                v = up
            left = row[j - 1] + gap
            if left > v:
                v = left
            row[j] = v if v > 0 else 0
    i, j = end_row, w
    assert h[i][j] == expect_score, "window traceback lost the winning alignment"
    matches = mismatches = insertions = deletions = 0
    deleted_runs: list[str] = []
    inserted_runs: list[str] = []
    del_run: list[str] = []
    ins_run: list[str] = []

    def flush_runs() -> None:
        if del_run:
            deleted_runs.append("".join(reversed(del_run)))
            del_run.clear()
        if ins_run:
            inserted_runs.append("".join(reversed(ins_run)))
            ins_run.clear()

    while h[i][j] > 0:
        v = h[i][j]
        if i > 0 and j > 0 and v == h[i - 1][j - 1] + (
            match if ctx[i - 1] == window[j - 1] else mismatch
        ):
            flush_runs()
            if ctx[i - 1] == window[j - 1]:
                matches += 1
            else:
                mismatches += 1
            i -= 1
            j -= 1
        elif i > 0 and v == h[i - 1][j] + gap:
            if del_run:
                flush_runs()
            insertions += 1
            ins_run.append(ctx[i - 1])
            i -= 1
        elif j > 0 and v == h[i][j - 1] + gap:
            if ins_run:
                flush_runs()
            deletions += 1
            del_run.append(window[j - 1])
            j -= 1
        else:  # pragma: no cover - recurrence guarantees one branch applies
            raise AssertionError("no traceback move reproduces the cell score")
    flush_runs()
    deleted_runs.reverse()
    inserted_runs.reverse()
    return (
        ColumnCounts(matches, mismatches, insertions, deletions),
        deleted_runs,
        inserted_runs,
    )


def align(
    context: str,
    doc: Document,
    cfg: PipelineConfig,
    *,
    doc_norm: NormalizedText | None = None,
) -> AlignmentResult:
    """Find the best local alignment of `context` in `doc` and gate it at tau.

    Callers aligning many contexts against one document should pass a
    precomputed `doc_norm` (from normalize() with the same fold_case setting).
    """
    if doc_norm is None:
        doc_norm = normalize(doc.text, fold_case=cfg.fold_case)
    if not doc_norm.normalized:
        raise EmptyDocument(f"document {doc.doc_id!r} has no alignable text")
    ctx_norm = normalize(context, fold_case=cfg.fold_case)
    if len(ctx_norm.normalized) < cfg.min_context_chars:
        raise ContextTooShort(
            f"context normalizes to {len(ctx_norm.normalized)} chars, "
            f"need at least {cfg.min_context_chars}"
        )

    score, start, end, end_row = _score_pass(
        ctx_norm.normalized, doc_norm.normalized,
        cfg.match_score, cfg.mismatch_penalty, cfg.gap_penalty,
    )
    if score <= 0:
        return AlignmentResult(
            matched_span_original=(0, 0),
            aligned_text="",
            matched_columns=0,
            total_columns=0,
            score=0.0,
            column_counts=ColumnCounts(0, 0, 0, 0),
            accepted=False,
        )

    counts, deleted_runs, inserted_runs = _traceback(
        ctx_norm.normalized, doc_norm.normalized[start:end], end_row, score,
        cfg.match_score, cfg.mismatch_penalty, cfg.gap_penalty,
    )
    total = counts.matches + counts.mismatches + counts.insertions + counts.deletions
    ratio = counts.matches / total
    orig_start, orig_end = doc_norm.original_span(start, end)
    return AlignmentResult(
        matched_span_original=(orig_start, orig_end),
        aligned_text=doc.text[orig_start:orig_end],
        matched_columns=counts.matches,
        total_columns=total,
        score=ratio,
        column_counts=counts,
        accepted=ratio >= cfg.tau,
        deleted_runs=tuple(deleted_runs),
        inserted_runs=tuple(inserted_runs),
    )


def _has_token_run(runs: tuple[str, ...], min_len: int = 3) -> bool:
    return any(len(tok) >= min_len for run in runs for tok in run.split())


def diagnose(result: AlignmentResult, context: str, *, fold_case: bool = True) -> MismatchLabel:
    """Classify how an aligned context drifted from the document surface form."""
    if not result.accepted:
        return MismatchLabel.NOT_FOUND
    counts = result.column_counts
    if result.matched_columns == result.total_columns:
        span_norm = normalize(result.aligned_text, fold_case=fold_case).normalized
        ctx_norm = normalize(context, fold_case=fold_case).normalized
        if span_norm == ctx_norm:
            return MismatchLabel.EXACT
    if counts.deletions > counts.insertions and _has_token_run(result.deleted_runs):
        return MismatchLabel.INSERTED_TOKENS
    if counts.insertions > counts.deletions and _has_token_run(result.inserted_runs):
        return MismatchLabel.ELIDED_TOKENS
    return MismatchLabel.CHAR_NOISE
