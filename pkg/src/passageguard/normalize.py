"""Text normalization used on both sides of the character aligner.

OCR'd documents and LLM-copied snippets disagree on compatibility forms,
capitalization, and whitespace, so both are normalized before alignment:
per-character compatibility (NFKC) normalization, case folding, and
whitespace runs collapsed to a single space. Each kept character maps back
to the original character index it came from, which lets alignment results
report spans in original-document coordinates.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass


@dataclass(frozen=True)
class NormalizedText:
    normalized: str
    offset_map: tuple[int, ...]

    def __post_init__(self) -> None:
        assert len(self.offset_map) == len(self.normalized)

    def original_span(self, start: int, end: int) -> tuple[int, int]:
        """Map a [start, end) slice of the normalized text to original coordinates."""
        if start >= end:
            # Empty normalized span: anchor to the nearest original offset.
            anchor = self.offset_map[start] if start < len(self.offset_map) else (
                self.offset_map[-1] + 1 if self.offset_map else 0)
            return (anchor, anchor)
        return (self.offset_map[start], self.offset_map[end - 1] + 1)


def normalize(text: str, *, fold_case: bool = True) -> NormalizedText:
    """Normalize text for alignment, keeping a map back to original indices.

    Characters expanded by NFKC or case folding (e.g. ligatures) all map to
    the index of the original character that produced them. A collapsed
    whitespace run maps to the index of its first whitespace character;
    leading and trailing runs are dropped.
    """
    chars: list[str] = []
    offsets: list[int] = []
    pending_space_at: int | None = None
    for i, ch in enumerate(text):
        piece = unicodedata.normalize("NFKC", ch)
        if fold_case:
            piece = piece.casefold()
        for sub in piece:
            if sub.isspace():
                if pending_space_at is None:
                    pending_space_at = i
                continue
            if pending_space_at is not None:
                if chars:  # leading whitespace is dropped entirely
                    chars.append(" ")
                    offsets.append(pending_space_at)
                pending_space_at = None
            chars.append(sub)
            offsets.append(i)
    # a trailing pending run is dropped
    return NormalizedText("".join(chars), tuple(offsets))
