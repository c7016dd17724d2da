"""Training-pair files and label bookkeeping.

A pairs file is one JSON object per line: {"premise", "hypothesis", "label"}
with an optional "source" ("HUMAN" or "SILVER"); records without a source
take the source implied by which config path they came from.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

HUMAN = "HUMAN"
SILVER = "SILVER"


class SidecarError(Exception):
    pass


class EmptyTrainingSet(SidecarError):
    pass


class NonBinaryLabel(SidecarError):
    pass


@dataclass(frozen=True)
class TrainingPair:
    premise: str
    hypothesis: str
    label: int
    source: str

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise NonBinaryLabel(f"label must be 0 or 1, got {self.label!r}")
        if not self.premise or not self.hypothesis:
            raise SidecarError("premise and hypothesis must be non-empty")


def read_pairs(path: str | Path, default_source: str) -> list[TrainingPair]:
    pairs: list[TrainingPair] = []
    with Path(path).open("r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise SidecarError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            raw_label = obj.get("label")
            if raw_label not in (0, 1, True, False):
                raise NonBinaryLabel(f"{path}:{lineno}: label must be 0 or 1, "
                                     f"got {raw_label!r}")
            pairs.append(TrainingPair(
                premise=str(obj.get("premise") or ""),
                hypothesis=str(obj.get("hypothesis") or ""),
                label=int(raw_label),
                source=str(obj.get("source") or default_source),
            ))
    if not pairs:
        raise EmptyTrainingSet(f"no training pairs in {path}")
    return pairs


def stratified_split(
    pairs: list[TrainingPair], validation_fraction: float, seed: int
) -> tuple[list[TrainingPair], list[TrainingPair]]:
    """Deterministic label-stratified train/validation split."""
    rng = random.Random(seed)
    train: list[TrainingPair] = []
    validation: list[TrainingPair] = []
    for label in (0, 1):
        bucket = [p for p in pairs if p.label == label]
        rng.shuffle(bucket)
        n_val = round(len(bucket) * validation_fraction)
        # keep at least one example per side when the bucket allows it
        if bucket and n_val == 0 and validation_fraction > 0:
            n_val = 1
        n_val = min(n_val, max(len(bucket) - 1, 0))
        validation.extend(bucket[:n_val])
        train.extend(bucket[n_val:])
    rng.shuffle(train)
    rng.shuffle(validation)
    if not train:
        raise EmptyTrainingSet("training split is empty after validation holdout")
    return train, validation
