from __future__ import annotations

import pytest

from nli_sidecar import build_tiny_base

from support_synth import containment_pairs, date_pairs, training_mix, vocabulary_for, write_pairs


@pytest.fixture(scope="session")
def tiny_base(tmp_path_factory) -> str:
    # vocabulary must cover the held-out draws too, so oversample generously
    corpus = training_mix(4000, 100)
    return build_tiny_base(tmp_path_factory.mktemp("base") / "model",
                           vocabulary_for(corpus))


@pytest.fixture(scope="session")
def trained_artifact(tiny_base, tmp_path_factory):
    """500 containment pairs; converges in a handful of epochs."""
    from nli_sidecar import TrainConfig, train

    tmp = tmp_path_factory.mktemp("train")
    pairs_path = write_pairs(tmp / "pairs.jsonl", containment_pairs(500, 1))
    cfg = TrainConfig(base_model_id=tiny_base, out_dir=str(tmp / "tuned"),
                      human_pairs_path=pairs_path, seed=13,
                      learning_rate=1e-3, batch_size=32, max_epochs=30,
                      patience=5)
    record = train(cfg)
    return cfg, record


@pytest.fixture(scope="session")
def date_artifact(tiny_base, tmp_path_factory):
    """500 hearing-date pairs; the matching circuit needs ~40+ epochs."""
    from nli_sidecar import TrainConfig, train

    tmp = tmp_path_factory.mktemp("train-dates")
    pairs_path = write_pairs(tmp / "pairs.jsonl", date_pairs(500, 21))
    cfg = TrainConfig(base_model_id=tiny_base, out_dir=str(tmp / "tuned"),
                      human_pairs_path=pairs_path, seed=13,
                      learning_rate=1e-3, batch_size=32, max_epochs=80,
                      patience=15)
    record = train(cfg)
    return cfg, record
