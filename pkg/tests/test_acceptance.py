"""Acceptance suite: one test per shipping criterion, at its stated tolerance.

Run with `python3 -m pytest tests/test_acceptance.py -v -s` to see one
pass/fail line per criterion.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from passageguard import (
    Document,
    PipelineConfig,
    ScoredPair,
    VerdictStatus,
    align,
    normalize,
    run_document,
    score_llm,
)
from passageguard.cli import main as cli_main
from passageguard.evaluation import f1_score
from passageguard.extraction import FixtureTransport
from passageguard.scoring import UnparseableGraderReply

from support.oracle import oracle_align
from test_pipeline import RecordingScorer, run_randomized_trial

FIXTURES = Path(__file__).parent / "fixtures"
CFG = PipelineConfig()


def report(name: str) -> None:
    print(f"\n[acceptance] PASS - {name}")


def test_alignment_score_arithmetic():
    """31 matched columns out of 35 score 0.886 within 5e-4."""
    assert abs(31 / 35 - 0.886) <= 0.0005

    context = "plaintiff moved for judgment 17"
    doc = Document("d", "order of the court: the plaintiff movqqed for "
                        "judgzzment 17, and costs were awarded.")
    result = align(context, doc, CFG)
    assert result.matched_columns == 31
    assert result.total_columns == 35
    assert abs(result.score - 0.886) <= 0.0005
    report("alignment score arithmetic: 31/35 columns -> 0.886 +/- 0.0005")


def test_aligner_matches_bruteforce_oracle_on_1000_cases():
    rng = random.Random(424242)
    cfg = PipelineConfig(min_context_chars=1)
    checked = 0
    while checked < 1000:
        m = rng.randint(1, 32)
        n = rng.randint(1, 64)
        context = "".join(rng.choice("ab cd") for _ in range(m))
        doc_text = "".join(rng.choice("ab cd") for _ in range(n))
        ctx_norm = normalize(context).normalized
        doc_norm = normalize(doc_text).normalized
        if not ctx_norm or not doc_norm:
            continue
        checked += 1
        oracle = oracle_align(ctx_norm, doc_norm)
        result = align(context, Document("d", doc_text), cfg)
        if oracle is None:
            assert result.total_columns == 0
            assert result.score == 0.0
        else:
            assert (result.matched_columns, result.total_columns) == (
                oracle.matches, oracle.columns)
            assert result.score == oracle.ratio
    report("aligner equals brute-force oracle on best score and M/L "
           "(1000 random cases)")


def test_substring_soundness_and_threshold_gate():
    rng = random.Random(31337)
    substring_cases = 0
    while substring_cases < 300:
        doc_text = "".join(rng.choice("abcdef gh") for _ in range(rng.randint(8, 80)))
        if len(normalize(doc_text).normalized) < 3:
            continue
        start = rng.randrange(len(doc_text))
        end = min(len(doc_text), start + rng.randint(3, 24))
        context = doc_text[start:end]
        if len(normalize(context).normalized) < CFG.min_context_chars:
            continue
        result = align(context, Document("d", doc_text), CFG)
        assert result.score == 1.0, (context, doc_text)
        assert result.accepted
        substring_cases += 1

    fabricated_cases = 0
    while fabricated_cases < 300:
        doc_text = "".join(rng.choice("abcdef gh") for _ in range(rng.randint(8, 60)))
        doc_norm = normalize(doc_text).normalized
        if len(doc_norm) < 3:
            continue
        # mixed alphabet: some fabrications brush against the threshold
        context = "".join(rng.choice("abqx z") for _ in range(rng.randint(3, 20)))
        ctx_norm = normalize(context).normalized
        if len(ctx_norm) < CFG.min_context_chars:
            continue
        oracle = oracle_align(ctx_norm, doc_norm)
        ratio = oracle.ratio if oracle is not None else 0.0
        if ratio >= 0.6:
            continue
        result = align(context, Document("d", doc_text), CFG)
        assert not result.accepted, (context, doc_text, ratio)
        fabricated_cases += 1
    report("substring soundness (300 cases at score 1.0) and threshold gate "
           "(300 sub-0.6 fabrications rejected)")


TABLE_ROWS = [
    (0.800, 0.235, 0.364),
    (0.319, 0.210, 0.253),
    (0.937, 0.705, 0.804),
    (0.950, 0.724, 0.822),
    (0.928, 0.857, 0.891),
    (0.878, 0.782, 0.827),
]


def test_metric_arithmetic_reproduces_reference_rows():
    for precision, recall, expected in TABLE_ROWS:
        computed = f1_score(precision, recall)
        assert abs(computed - expected) <= 0.002, (precision, recall, computed)
    report("F1 equals harmonic mean of all six reference precision/recall "
           "pairs within 0.002")


def test_pipeline_gating_with_recorded_fixtures(schema):
    corpus = [json.loads(line)
              for line in (FIXTURES / "corpus.jsonl").read_text().splitlines()]
    docs = [Document(obj["doc_id"], obj["text"]) for obj in corpus]
    transport = FixtureTransport.from_file(FIXTURES / "mock_gating.json")

    from passageguard.extraction import default_prompt_template
    from passageguard.pipeline import Extractor

    extractor = Extractor(transport, "gating-model", default_prompt_template(), 1)
    scorer = RecordingScorer()
    total = 0
    for doc in docs:
        doc_norm = normalize(doc.text).normalized
        result = run_document(doc, schema, CFG, extractor, scorer)
        for verdict in result.verdicts:
            total += 1
            ctx_norm = normalize(verdict.entity.context).normalized
            oracle = oracle_align(ctx_norm, doc_norm) if ctx_norm else None
            assert oracle is None or oracle.ratio < 0.6
            assert verdict.status is VerdictStatus.REJECTED_ALIGNMENT
    assert total == 7
    assert scorer.seen == [], "scorer was invoked for alignment-rejected entities"
    report("pipeline gating: 7/7 absent-context entities rejected at "
           "alignment, scorer never invoked")


def test_pipeline_gating_through_cli(tmp_path):
    # The fixture has no grader rules: any scorer call would surface as an
    # ERROR verdict instead of REJECTED_ALIGNMENT.
    code = cli_main([
        "run",
        "--config", str(FIXTURES / "config.txt"),
        "--mock-llm", str(FIXTURES / "mock_gating.json"),
        "--in", str(FIXTURES / "corpus.jsonl"),
        "--schema", str(FIXTURES / "schema.jsonl"),
        "--out", str(tmp_path / "verdicts.jsonl"),
        "--summary", str(tmp_path / "summary.jsonl"),
    ])
    assert code == 0
    verdicts = [json.loads(line)
                for line in (tmp_path / "verdicts.jsonl").read_text().splitlines()]
    assert len(verdicts) == 7
    assert all(v["status"] == "REJECTED_ALIGNMENT" for v in verdicts)
    report("pipeline gating holds end to end through the CLI")


def test_verdict_invariants_hold_for_1000_randomized_trials(schema):
    rng = random.Random(271828)
    for _ in range(1000):
        run_randomized_trial(rng, schema)
    report("verdict status invariants hold under 1000 randomized stub trials")


def test_grader_contract_on_worked_examples():
    examples = [
        (ScoredPair("he said they would show up on jun 14, 25",
                    "Date: 2025-06-14", "g1"), 1.0),
        (ScoredPair("the claimant joe burrow", "Judge: Joe Burrow", "g2"), 0.0),
        (ScoredPair("", "Hearing Type: In Person", "g3"), 0.0),
    ]
    transport = FixtureTransport([
        {"match": "\n<extracted_entity>Date: 2025-06-14</extracted_entity>",
         "response": "This would not be a hallucination.\nverdict: false"},
        {"match": "\n<extracted_entity>Judge: Joe Burrow</extracted_entity>",
         "response": "The context informs us that the extracted entity is a "
                     "claimant and not a judge.\nverdict: true"},
        {"match": "\n<extracted_entity>Hearing Type: In Person</extracted_entity>",
         "response": "There is no context provided.\nverdict: true"},
    ])
    scores = [score_llm(pair, transport).score for pair, _ in examples]
    assert scores == [expected for _, expected in examples] == [1.0, 0.0, 0.0]

    malformed = FixtureTransport([{"match": "", "response": "shrug, who knows"}])
    with pytest.raises(UnparseableGraderReply):
        score_llm(examples[0][0], malformed, max_retries=1)
    report("grader contract: worked examples score {1, 0, 0}; malformed "
           "replies raise UnparseableGraderReply")


def test_run_is_byte_deterministic(tmp_path):
    def run_once(tag: str) -> tuple[bytes, bytes]:
        verdicts = tmp_path / f"verdicts-{tag}.jsonl"
        summary = tmp_path / f"summary-{tag}.jsonl"
        code = cli_main([
            "run",
            "--config", str(FIXTURES / "config.txt"),
            "--mock-llm", str(FIXTURES / "mock_llm.json"),
            "--in", str(FIXTURES / "corpus.jsonl"),
            "--schema", str(FIXTURES / "schema.jsonl"),
            "--out", str(verdicts),
            "--summary", str(summary),
        ])
        assert code == 0
        return verdicts.read_bytes(), summary.read_bytes()

    first = run_once("a")
    second = run_once("b")
    assert first[0] == second[0], "verdict files differ between identical runs"
    assert first[1] == second[1], "summary files differ between identical runs"
    report("two identical runs produce byte-identical verdict and summary files")
