from __future__ import annotations

import json
from pathlib import Path

import pytest

from passageguard.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


def read_jsonl(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line]


def run_cli(*args):
    return main([str(a) for a in args])


@pytest.fixture
def out(tmp_path):
    return tmp_path


def run_pipeline(out, corpus="corpus.jsonl"):
    code = run_cli(
        "run",
        "--config", FIXTURES / "config.txt",
        "--mock-llm", FIXTURES / "mock_llm.json",
        "--in", FIXTURES / corpus,
        "--schema", FIXTURES / "schema.jsonl",
        "--out", out / "verdicts.jsonl",
        "--summary", out / "summary.jsonl",
    )
    return code


class TestRun:
    def test_happy_path(self, out):
        assert run_pipeline(out) == 0
        verdicts = read_jsonl(out / "verdicts.jsonl")
        assert len(verdicts) == 9
        statuses = [v["status"] for v in verdicts]
        assert statuses.count("SAFE") == 7
        assert statuses.count("REJECTED_ALIGNMENT") == 1
        assert statuses.count("REJECTED_SCORE") == 1
        summary = read_jsonl(out / "summary.jsonl")
        assert len(summary) == 1
        assert summary[0]["model_id"] == "fixture-model"
        assert summary[0]["n_entities"] == 9
        assert summary[0]["safepassage_score"] == pytest.approx(7 / 9)

    def test_rejected_entity_has_no_score(self, out):
        run_pipeline(out)
        verdicts = read_jsonl(out / "verdicts.jsonl")
        rejected = next(v for v in verdicts if v["status"] == "REJECTED_ALIGNMENT")
        assert rejected["score"] is None
        assert rejected["entity"]["context"] == "zzqqzzqq"

    def test_mistranscribed_date_still_aligns(self, out):
        run_pipeline(out)
        verdicts = read_jsonl(out / "verdicts.jsonl")
        noisy = next(v for v in verdicts
                     if v["entity"]["context"] == "signed October 12, 2007")
        assert noisy["status"] == "SAFE"
        assert "o ctober 12, 2007" in noisy["alignment"]["aligned_text"]
        assert noisy["alignment"]["score"] < 1.0

    def test_partial_failure_still_writes_other_docs(self, out, capsys):
        assert run_pipeline(out, corpus="corpus_partial.jsonl") == 1
        verdicts = read_jsonl(out / "verdicts.jsonl")
        assert {v["entity"]["doc_id"] for v in verdicts} == {"doc-alpha"}
        assert len(verdicts) == 6
        assert "doc-beta" in capsys.readouterr().err

    def test_missing_config_is_fatal(self, out):
        code = run_cli(
            "run",
            "--config", out / "nope.txt",
            "--in", FIXTURES / "corpus.jsonl",
            "--schema", FIXTURES / "schema.jsonl",
            "--out", out / "v.jsonl",
            "--summary", out / "s.jsonl",
        )
        assert code == 2
        assert not (out / "v.jsonl").exists()

    def test_unknown_override_key_is_fatal(self, out):
        code = run_cli(
            "run",
            "--config", FIXTURES / "config.txt",
            "--set", "no_such_key=1",
            "--mock-llm", FIXTURES / "mock_llm.json",
            "--in", FIXTURES / "corpus.jsonl",
            "--schema", FIXTURES / "schema.jsonl",
            "--out", out / "v.jsonl",
            "--summary", out / "s.jsonl",
        )
        assert code == 2

    def test_byte_identical_reruns(self, out):
        run_pipeline(out)
        first_verdicts = (out / "verdicts.jsonl").read_bytes()
        first_summary = (out / "summary.jsonl").read_bytes()
        run_pipeline(out)
        assert (out / "verdicts.jsonl").read_bytes() == first_verdicts
        assert (out / "summary.jsonl").read_bytes() == first_summary

    def test_no_temp_files_left_behind(self, out):
        run_pipeline(out)
        assert list(out.glob("*.tmp")) == []

    def test_stricter_tau_override_rejects_noisy_alignment(self, out):
        code = run_cli(
            "run",
            "--config", FIXTURES / "config.txt",
            "--set", "tau=0.99",
            "--mock-llm", FIXTURES / "mock_llm.json",
            "--in", FIXTURES / "corpus.jsonl",
            "--schema", FIXTURES / "schema.jsonl",
            "--out", out / "verdicts.jsonl",
            "--summary", out / "summary.jsonl",
        )
        assert code == 0
        verdicts = read_jsonl(out / "verdicts.jsonl")
        noisy = next(v for v in verdicts
                     if v["entity"]["context"] == "signed October 12, 2007")
        assert noisy["status"] == "REJECTED_ALIGNMENT"


class TestStageCommands:
    def test_extract_then_align(self, out):
        code = run_cli(
            "extract",
            "--config", FIXTURES / "config.txt",
            "--mock-llm", FIXTURES / "mock_llm.json",
            "--in", FIXTURES / "corpus.jsonl",
            "--schema", FIXTURES / "schema.jsonl",
            "--out", out / "entities.jsonl",
        )
        assert code == 0
        entities = read_jsonl(out / "entities.jsonl")
        assert len(entities) == 9

        code = run_cli(
            "align",
            "--config", FIXTURES / "config.txt",
            "--in", out / "entities.jsonl",
            "--corpus", FIXTURES / "corpus.jsonl",
            "--out", out / "aligned.jsonl",
        )
        assert code == 0
        aligned = read_jsonl(out / "aligned.jsonl")
        assert len(aligned) == 9
        record = next(r for r in aligned
                      if r["entity"]["context"] == "heard in person on June 19, 2013")
        a = record["alignment"]
        assert a["accepted"] is True
        assert a["score"] == 1.0
        assert a["matches"] == a["columns"]
        assert a["diagnosis"] == "EXACT"
        assert set(a["column_counts"]) == {"matches", "mismatches", "insertions",
                                           "deletions"}

    def test_score_stage(self, out):
        self.test_extract_then_align(out)
        code = run_cli(
            "score",
            "--config", FIXTURES / "config.txt",
            "--mock-llm", FIXTURES / "mock_llm.json",
            "--in", out / "aligned.jsonl",
            "--out", out / "scored.jsonl",
        )
        assert code == 0
        scored = read_jsonl(out / "scored.jsonl")
        # only accepted alignments reach the scorer
        assert len(scored) == 8
        org = next(r for r in scored if r["hypothesis"].startswith("Organization"))
        assert org["score"]["pass"] is False


class TestEvalCommands:
    def make_labels(self, out, verdicts_path):
        verdicts = read_jsonl(verdicts_path)
        labels = []
        for v in verdicts:
            # humans agree with the pipeline except on one SAFE verdict
            flagged = v["status"] != "SAFE"
            labels.append({"entity_id": v["entity"]["entity_id"],
                           "is_hallucination": flagged,
                           "annotator_id": "ann-1"})
        labels[0]["is_hallucination"] = True  # one disagreement
        path = out / "labels.jsonl"
        path.write_text("\n".join(json.dumps(l) for l in labels) + "\n")
        return path

    def test_metrics_compare_silver_report(self, out):
        run_pipeline(out)
        labels = self.make_labels(out, out / "verdicts.jsonl")

        code = run_cli(
            "eval-metrics",
            "--config", FIXTURES / "config.txt",
            "--in", out / "verdicts.jsonl",
            "--labels", labels,
            "--out", out / "metrics.json",
            "--table", out / "metrics.txt",
        )
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["tp"] + metrics["fp"] + metrics["fn"] + metrics["tn"] == 9
        assert metrics["fn"] == 1
        assert "precision" in (out / "metrics.txt").read_text()

        code = run_cli(
            "export-silver",
            "--config", FIXTURES / "config.txt",
            "--in", out / "verdicts.jsonl",
            "--out", out / "silver.jsonl",
        )
        assert code == 0
        silver = read_jsonl(out / "silver.jsonl")
        assert len(silver) == 8
        assert sum(r["label"] for r in silver) == 7

        code = run_cli(
            "eval-compare",
            "--config", FIXTURES / "config.txt",
            "--in", out / "summary.jsonl",
            "--labels", labels,
            "--verdicts", out / "verdicts.jsonl",
            "--out", out / "compare.json",
            "--csv", out / "compare.csv",
        )
        assert code == 0
        rows = json.loads((out / "compare.json").read_text())
        assert rows[0]["model_id"] == "fixture-model"
        assert "human_score" in rows[0]
        assert (out / "compare.csv").read_text().startswith("model_id,")

        code = run_cli(
            "report",
            "--config", FIXTURES / "config.txt",
            "--in", out / "verdicts.jsonl",
            "--summaries", out / "summary.jsonl",
            "--labels", labels,
            "--out", out / "report.json",
            "--table", out / "report.txt",
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert "models" in report and "detection_metrics" in report
