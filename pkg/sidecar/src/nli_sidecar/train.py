"""Cross-encoder fine-tuning on silver and human labels.

Supports three regimes: silver-only, human-only, and silver-then-human.
When both pair files are given, training runs in two phases: silver first,
then human; the second phase restarts the optimizer but keeps the weights.
Each phase early-stops on validation F1 and restores its best checkpoint.
"""
from __future__ import annotations

import copy
import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .data import (
    HUMAN,
    SILVER,
    EmptyTrainingSet,
    TrainingPair,
    read_pairs,
    stratified_split,
)


@dataclass(frozen=True)
class TrainConfig:
    base_model_id: str
    out_dir: str
    human_pairs_path: str | None = None
    silver_pairs_path: str | None = None
    max_human_pairs: int | None = None
    validation_fraction: float = 0.2
    patience: int = 3
    seed: int = 13
    max_epochs: int = 40
    batch_size: int = 16
    # Suits published checkpoints; from-scratch tiny models want ~1e-3.
    learning_rate: float = 2e-5
    # 0 keeps the learning rate constant; >0 enables warmup + linear decay,
    # which large pretrained checkpoints usually want.
    warmup_fraction: float = 0.0
    max_length: int = 256

    def validate(self) -> "TrainConfig":
        if self.human_pairs_path is None and self.silver_pairs_path is None:
            raise EmptyTrainingSet("need at least one of human/silver pairs paths")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0,1)")
        if self.patience < 0 or self.max_epochs < 1:
            raise ValueError("patience must be >= 0 and max_epochs >= 1")
        return self


def _seed_everything(seed: int) -> None:
    import torch

    random.seed(seed)
    torch.manual_seed(seed)


def _prf1(labels: list[int], predictions: list[int]) -> tuple[float, float, float]:
    tp = sum(1 for y, p in zip(labels, predictions) if y == 1 and p == 1)
    fp = sum(1 for y, p in zip(labels, predictions) if y == 0 and p == 1)
    fn = sum(1 for y, p in zip(labels, predictions) if y == 1 and p == 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


class _CrossEncoder:
    """Thin wrapper so training and evaluation share tokenization."""

    def __init__(self, base_model_id: str, max_length: int) -> None:
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self.tokenizer = AutoTokenizer.from_pretrained(base_model_id)
        self.model = AutoModelForSequenceClassification.from_pretrained(
            base_model_id, num_labels=1)
        self.max_length = max_length

    def encode(self, pairs: list[TrainingPair]):
        return self.tokenizer(
            [p.premise for p in pairs],
            [p.hypothesis for p in pairs],
            padding=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        )

    def predict(self, pairs: list[TrainingPair], batch_size: int) -> list[float]:
        import torch

        self.model.eval()
        probs: list[float] = []
        with torch.no_grad():
            for start in range(0, len(pairs), batch_size):
                chunk = pairs[start:start + batch_size]
                logits = self.model(**self.encode(chunk)).logits[:, 0]
                probs.extend(float(p) for p in torch.sigmoid(logits))
        return probs


def evaluate_f1(encoder: _CrossEncoder, pairs: list[TrainingPair],
                batch_size: int = 32) -> tuple[float, float, float]:
    probs = encoder.predict(pairs, batch_size)
    predictions = [1 if p >= 0.5 else 0 for p in probs]
    return _prf1([p.label for p in pairs], predictions)


def _train_phase(
    encoder: _CrossEncoder,
    phase_name: str,
    pairs: list[TrainingPair],
    cfg: TrainConfig,
) -> dict[str, Any]:
    import torch

    train_pairs, val_pairs = stratified_split(
        pairs, cfg.validation_fraction, cfg.seed)
    optimizer = torch.optim.AdamW(encoder.model.parameters(), lr=cfg.learning_rate)
    scheduler = None
    if cfg.warmup_fraction > 0:
        steps_per_epoch = (len(train_pairs) + cfg.batch_size - 1) // cfg.batch_size
        total_steps = max(1, steps_per_epoch * cfg.max_epochs)
        warmup_steps = max(1, int(total_steps * cfg.warmup_fraction))

        def lr_lambda(step: int) -> float:
            if step < warmup_steps:
                return (step + 1) / warmup_steps
            remaining = total_steps - warmup_steps
            return max(0.05, (total_steps - step) / remaining) if remaining else 1.0

        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, lr_lambda)
    loss_fn = torch.nn.BCEWithLogitsLoss()
    rng = random.Random(cfg.seed + 1)

    epochs: list[dict[str, float]] = []
    best_f1 = -1.0
    best_epoch = -1
    best_state = None
    since_best = 0
    for epoch in range(cfg.max_epochs):
        encoder.model.train()
        order = list(range(len(train_pairs)))
        rng.shuffle(order)
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_pairs[i] for i in order[start:start + cfg.batch_size]]
            encoded = encoder.encode(batch)
            labels = torch.tensor([float(p.label) for p in batch])
            optimizer.zero_grad()
            logits = encoder.model(**encoded).logits[:, 0]
            loss = loss_fn(logits, labels)
            loss.backward()
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
        precision, recall, f1 = (
            evaluate_f1(encoder, val_pairs) if val_pairs else (0.0, 0.0, 0.0))
        epochs.append({"epoch": epoch, "val_precision": precision,
                       "val_recall": recall, "val_f1": f1})
        if f1 > best_f1:
            best_f1 = f1
            best_epoch = epoch
            best_state = copy.deepcopy(encoder.model.state_dict())
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                break
    if best_state is not None:
        encoder.model.load_state_dict(best_state)
    return {
        "phase": phase_name,
        "train_size": len(train_pairs),
        "validation_size": len(val_pairs),
        "epochs": epochs,
        "chosen_epoch": best_epoch,
        "best_val_f1": best_f1 if best_f1 >= 0 else None,
    }


def train(cfg: TrainConfig) -> dict[str, Any]:
    """Run the configured fine-tuning regime; returns the metrics record.

    The fine-tuned checkpoint lands in cfg.out_dir along with metrics.json.
    """
    cfg = cfg.validate()
    _seed_everything(cfg.seed)

    silver = (read_pairs(cfg.silver_pairs_path, SILVER)
              if cfg.silver_pairs_path else [])
    human = (read_pairs(cfg.human_pairs_path, HUMAN)
             if cfg.human_pairs_path else [])
    if cfg.max_human_pairs is not None:
        human = human[:cfg.max_human_pairs]
    if not silver and not human:
        raise EmptyTrainingSet("no pairs found in the configured files")

    encoder = _CrossEncoder(cfg.base_model_id, cfg.max_length)
    phases: list[dict[str, Any]] = []
    if silver:
        phases.append(_train_phase(encoder, "silver", silver, cfg))
    if human:
        # optimizer restarts inside _train_phase; weights carry over
        phases.append(_train_phase(encoder, "human", human, cfg))

    regime = {
        (True, False): "silver_only",
        (False, True): "human_only",
        (True, True): "silver_then_human",
    }[(bool(silver), bool(human))]

    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    encoder.model.save_pretrained(out_dir)
    encoder.tokenizer.save_pretrained(out_dir)
    record = {
        "regime": regime,
        "base_model_id": cfg.base_model_id,
        "seed": cfg.seed,
        "train_sizes": {"silver": len(silver), "human": len(human)},
        "phases": phases,
        "artifact": str(out_dir),
    }
    (out_dir / "metrics.json").write_text(json.dumps(record, indent=2) + "\n",
                                          encoding="utf-8")
    return record
