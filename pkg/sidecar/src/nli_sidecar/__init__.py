"""Entailment scoring service plus cross-encoder fine-tuning."""

from .bootstrap import build_tiny_base
from .data import HUMAN, SILVER, EmptyTrainingSet, NonBinaryLabel, TrainingPair, read_pairs
from .scorers import ModelScorer, StubScorer
from .server import create_app
from .train import TrainConfig, evaluate_f1, train

__version__ = "0.1.0"
