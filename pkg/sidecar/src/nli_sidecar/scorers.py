"""Scoring backends behind the /score protocol."""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Protocol


class ScorerBackend(Protocol):
    def probabilities(self, pairs: list[tuple[str, str]]) -> list[float]: ...


class StubScorer:
    """Deterministic containment heuristic, no model required.

    The hypothesis value (after "{type}: ") found inside the premise counts
    as entailed. A stable per-pair jitter keeps probabilities distinct so
    order bugs cannot hide.
    """

    def probabilities(self, pairs: list[tuple[str, str]]) -> list[float]:
        out = []
        for premise, hypothesis in pairs:
            value = hypothesis.split(": ", 1)[1] if ": " in hypothesis else hypothesis
            contained = bool(value) and value.casefold() in premise.casefold()
            digest = hashlib.sha256(f"{premise}\x00{hypothesis}".encode()).digest()
            jitter = int.from_bytes(digest[:4], "big") % 1000 / 100000.0
            out.append((0.95 if contained else 0.04) + jitter)
        return out


class ModelScorer:
    """Cross-encoder checkpoint: premise/hypothesis in, entailment probability out."""

    def __init__(self, model_path: str | Path, *, max_length: int = 256,
                 batch_size: int = 32) -> None:
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self._torch = torch
        self._tokenizer = AutoTokenizer.from_pretrained(str(model_path))
        self._model = AutoModelForSequenceClassification.from_pretrained(str(model_path))
        self._model.eval()
        self._max_length = max_length
        self._batch_size = batch_size

    def probabilities(self, pairs: list[tuple[str, str]]) -> list[float]:
        torch = self._torch
        out: list[float] = []
        with torch.no_grad():
            for start in range(0, len(pairs), self._batch_size):
                chunk = pairs[start:start + self._batch_size]
                encoded = self._tokenizer(
                    [p for p, _ in chunk],
                    [h for _, h in chunk],
                    padding=True,
                    truncation=True,
                    max_length=self._max_length,
                    return_tensors="pt",
                )
                logits = self._model(**encoded).logits
                if logits.shape[-1] == 1:
                    probs = torch.sigmoid(logits[:, 0])
                else:
                    # multi-class NLI head: entailment is the last label by
                    # convention; fall back to softmax over all classes
                    probs = torch.softmax(logits, dim=-1)[:, -1]
                out.extend(float(p) for p in probs)
        return out
