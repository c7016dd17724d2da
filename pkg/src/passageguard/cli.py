"""Command-line entry point: every stage plus the evaluation harness.

Exit status: 0 on success, 1 when the run completed but some items failed
(ERROR verdicts, failed documents), 2 on fatal configuration or I/O errors.
Diagnostics go to stderr; data only ever goes to files.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any

from . import evaluation, jsonl
from .align import align, diagnose
from .config import (
    ConfigError,
    GRADER_API_KEY_ENV,
    PipelineConfig,
    load_config,
    parse_override_args,
)
from .extraction import (
    FixtureTransport,
    HttpChatTransport,
    LLMTransport,
    default_prompt_template,
)
from .pipeline import Extractor, PassageVerdict, RunSummary, run_corpus
from .normalize import normalize
from .scoring import (
    NLI_REMOTE,
    LlmGraderScorer,
    NliRemoteScorer,
    NliScorerClient,
    ScoredPair,
    format_hypothesis,
)
from .types import (
    Document,
    Entity,
    EntityKind,
    EntityType,
    PassageGuardError,
    document_from_json,
)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2


def _err(message: str) -> None:
    print(f"passageguard: {message}", file=sys.stderr)


def _load_corpus(path: str) -> list[Document]:
    docs = [document_from_json(obj) for obj in jsonl.read_jsonl(path)]
    seen: set[str] = set()
    for doc in docs:
        if not doc.text:
            raise PassageGuardError(f"document {doc.doc_id!r} has empty text")
        if doc.doc_id in seen:
            raise PassageGuardError(f"duplicate doc_id in corpus: {doc.doc_id!r}")
        seen.add(doc.doc_id)
    return docs


def _load_entities(path: str) -> list[Entity]:
    return [Entity.from_json(obj) for obj in jsonl.read_jsonl(path)]


def _load_verdicts(path: str) -> list[PassageVerdict]:
    return [PassageVerdict.from_json(obj) for obj in jsonl.read_jsonl(path)]


def _load_labels(path: str) -> list[evaluation.HumanLabel]:
    return [evaluation.HumanLabel.from_json(obj) for obj in jsonl.read_jsonl(path)]


def _load_schema(path: str) -> list[EntityType]:
    schema = []
    for obj in jsonl.read_jsonl(path):
        try:
            kind = EntityKind(obj["kind"])
        except (KeyError, ValueError):
            raise PassageGuardError(
                f"{path}: bad entity kind {obj.get('kind')!r} for {obj.get('name')!r}"
            ) from None
        schema.append(EntityType(
            name=str(obj["name"]),
            kind=kind,
            allowed_values=tuple(obj["allowed_values"]) if obj.get("allowed_values") else None,
        ))
    if not schema:
        raise PassageGuardError(f"schema file {path} is empty")
    return schema


def _extractor_transport(args: argparse.Namespace, cfg: PipelineConfig) -> LLMTransport:
    if args.mock_llm:
        return FixtureTransport.from_file(args.mock_llm)
    return HttpChatTransport(
        cfg.extractor_endpoint,
        cfg.extractor_model,
        max_parallel=cfg.extractor_parallelism,
    )


def _grader_transport(args: argparse.Namespace, cfg: PipelineConfig) -> LLMTransport:
    if args.mock_llm:
        return FixtureTransport.from_file(args.mock_llm)
    endpoint = cfg.grader_endpoint or cfg.extractor_endpoint
    model = cfg.grader_model or cfg.extractor_model
    return HttpChatTransport(
        endpoint, model,
        api_key_env=GRADER_API_KEY_ENV,
        max_parallel=cfg.extractor_parallelism,
    )


def _scorer(args: argparse.Namespace, cfg: PipelineConfig):
    if cfg.scorer_backend == NLI_REMOTE:
        return NliRemoteScorer(NliScorerClient(cfg.nli_endpoint), cfg)
    return LlmGraderScorer(_grader_transport(args, cfg), max_retries=cfg.grader_max_retries)


def cmd_extract(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    docs = _load_corpus(args.in_path)
    schema = _load_schema(args.schema)
    extractor = Extractor(
        _extractor_transport(args, cfg),
        cfg.extractor_model or "mock",
        default_prompt_template(),
        cfg.extractor_max_retries,
    )
    records: list[dict[str, Any]] = []
    failures = 0
    for doc in docs:
        try:
            response = extractor.extract_document(doc, schema)
        except PassageGuardError as exc:
            _err(f"{doc.doc_id}: extraction failed: {exc}")
            failures += 1
            continue
        for warning in response.parse_warnings:
            _err(f"{doc.doc_id}: {warning}")
        records.extend(e.to_json() for e in response.entities)
    jsonl.write_jsonl(args.out, records)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_align(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    docs = {doc.doc_id: doc for doc in _load_corpus(args.corpus)}
    norms = {doc_id: normalize(doc.text, fold_case=cfg.fold_case)
             for doc_id, doc in docs.items()}
    records: list[dict[str, Any]] = []
    failures = 0
    for entity in _load_entities(args.in_path):
        doc = docs.get(entity.doc_id)
        record: dict[str, Any] = {"entity": entity.to_json(), "alignment": None}
        if doc is None:
            _err(f"{entity.entity_id}: doc_id {entity.doc_id!r} not in corpus")
            failures += 1
        else:
            ctx_len = len(normalize(entity.context, fold_case=cfg.fold_case).normalized)
            if ctx_len >= cfg.min_context_chars:
                try:
                    result = align(entity.context, doc, cfg, doc_norm=norms[entity.doc_id])
                except PassageGuardError as exc:
                    _err(f"{entity.entity_id}: {exc}")
                    failures += 1
                else:
                    alignment = result.to_json()
                    alignment["diagnosis"] = diagnose(
                        result, entity.context, fold_case=cfg.fold_case).value
                    record["alignment"] = alignment
        records.append(record)
    jsonl.write_jsonl(args.out, records)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_score(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    scorer = _scorer(args, cfg)
    records: list[dict[str, Any]] = []
    failures = 0
    for obj in jsonl.read_jsonl(args.in_path):
        alignment = obj.get("alignment")
        if not alignment or not alignment.get("accepted"):
            continue
        entity = Entity.from_json(obj["entity"])
        pair = ScoredPair(
            premise=str(alignment["aligned_text"]),
            hypothesis=format_hypothesis(entity),
            entity_id=entity.entity_id,
        )
        try:
            result = scorer.score_pair(pair)
        except PassageGuardError as exc:
            _err(f"{entity.entity_id}: {exc}")
            failures += 1
            continue
        records.append({
            "entity_id": entity.entity_id,
            "premise": pair.premise,
            "hypothesis": pair.hypothesis,
            "score": result.to_json(),
        })
    jsonl.write_jsonl(args.out, records)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_run(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    docs = _load_corpus(args.in_path)
    schema = _load_schema(args.schema)
    extractor = Extractor(
        _extractor_transport(args, cfg),
        cfg.extractor_model or "mock",
        default_prompt_template(),
        cfg.extractor_max_retries,
    )
    result = run_corpus(docs, schema, cfg, extractor, _scorer(args, cfg))
    for warning in result.parse_warnings:
        _err(warning)
    for doc_error in result.doc_errors:
        _err(doc_error["error"])
    jsonl.write_jsonl(args.out, (v.to_json() for v in result.verdicts))
    jsonl.write_jsonl(args.summary, (s.to_json() for s in result.summaries))
    had_errors = bool(result.doc_errors) or any(
        v.status.value == "ERROR" for v in result.verdicts)
    return EXIT_PARTIAL if had_errors else EXIT_OK


def cmd_eval_metrics(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    verdicts = _load_verdicts(args.in_path)
    labels = _load_labels(args.labels)
    report = evaluation.detection_metrics(verdicts, labels)
    jsonl.write_json(args.out, report.to_json())
    if args.table:
        jsonl.write_text(args.table, evaluation.render_table(
            [report.to_json()], ["precision", "recall", "f1", "tp", "fp", "fn", "tn"]))
    return EXIT_OK


def _comparison_rows(args: argparse.Namespace) -> list[dict[str, Any]]:
    summaries = [RunSummary.from_json(obj) for obj in jsonl.read_jsonl(args.in_path)]
    labels = _load_labels(args.labels) if args.labels else None
    verdicts = _load_verdicts(args.verdicts) if args.verdicts else None
    return evaluation.compare_models(summaries, labels, verdicts)


def cmd_eval_compare(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    rows = _comparison_rows(args)
    jsonl.write_json(args.out, rows)
    if args.table:
        jsonl.write_text(args.table, evaluation.render_table(
            rows, ["model_id", "safepassage_score", "human_score", "n_entities", "n_labeled"]))
    if args.csv:
        jsonl.write_text(args.csv, evaluation.comparison_csv(rows))
    return EXIT_OK


def cmd_export_silver(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    verdicts = _load_verdicts(args.in_path)
    records = evaluation.export_silver(verdicts)
    jsonl.write_jsonl(args.out, records)
    return EXIT_OK


def cmd_report(args: argparse.Namespace, cfg: PipelineConfig) -> int:
    verdicts = _load_verdicts(args.in_path)
    summaries = [RunSummary.from_json(obj) for obj in jsonl.read_jsonl(args.summaries)]
    labels = _load_labels(args.labels) if args.labels else None
    rows = evaluation.compare_models(summaries, labels, verdicts if labels else None)
    report: dict[str, Any] = {"models": rows}
    if labels:
        report["detection_metrics"] = evaluation.detection_metrics(verdicts, labels).to_json()
    jsonl.write_json(args.out, report)
    if args.table:
        jsonl.write_text(args.table, evaluation.render_table(
            rows, ["model_id", "safepassage_score", "human_score", "n_entities", "n_labeled"]))
    if args.csv:
        jsonl.write_text(args.csv, evaluation.comparison_csv(rows))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="passageguard",
        description="Evidence-passage guardrails for LLM information extraction",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser, *, out: bool = True) -> None:
        p.add_argument("--config", required=True, help="key=value config file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (repeatable)")
        p.add_argument("--mock-llm", default=None, metavar="FIXTURE",
                       help="replay recorded LLM responses from a fixture file")
        p.add_argument("--in", dest="in_path", required=True, help="input file")
        if out:
            p.add_argument("--out", required=True, help="output file")

    p = sub.add_parser("extract", help="run the extractor LLM over a corpus")
    common(p)
    p.add_argument("--schema", required=True, help="entity type schema file")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("align", help="align entity contexts into their documents")
    common(p)
    p.add_argument("--corpus", required=True, help="corpus file with the documents")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("score", help="score aligned spans against predictions")
    common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("run", help="full pipeline: extract, align, score")
    common(p)
    p.add_argument("--schema", required=True, help="entity type schema file")
    p.add_argument("--summary", required=True, help="per-model summary output file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval-metrics", help="hallucination detection metrics vs labels")
    common(p)
    p.add_argument("--labels", required=True, help="human label file")
    p.add_argument("--table", default=None, help="also write an aligned text table")
    p.set_defaults(func=cmd_eval_metrics)

    p = sub.add_parser("eval-compare", help="compare per-model summaries")
    common(p)
    p.add_argument("--labels", default=None, help="human label file")
    p.add_argument("--verdicts", default=None, help="verdicts file (to join labels)")
    p.add_argument("--table", default=None, help="also write an aligned text table")
    p.add_argument("--csv", default=None, help="also write a plot-ready CSV")
    p.set_defaults(func=cmd_eval_compare)

    p = sub.add_parser("export-silver", help="export grader-scored pairs for training")
    common(p)
    p.set_defaults(func=cmd_export_silver)

    p = sub.add_parser("report", help="combined comparison and metrics report")
    common(p)
    p.add_argument("--summaries", required=True, help="per-model summary file")
    p.add_argument("--labels", default=None, help="human label file")
    p.add_argument("--table", default=None, help="also write an aligned text table")
    p.add_argument("--csv", default=None, help="also write a plot-ready CSV")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = parse_override_args(args.overrides)
        cfg = load_config(args.config, overrides)
        for attr in ("in_path", "corpus", "labels", "verdicts", "summaries", "schema"):
            path = getattr(args, attr, None)
            if path and not Path(path).is_file():
                raise ConfigError(f"input file not found: {path}")
        if args.mock_llm and not Path(args.mock_llm).is_file():
            raise ConfigError(f"fixture file not found: {args.mock_llm}")
        return args.func(args, cfg)
    except (ConfigError, jsonl.FileFormatError) as exc:
        _err(str(exc))
        return EXIT_FATAL
    except PassageGuardError as exc:
        _err(str(exc))
        return EXIT_FATAL
    except OSError as exc:
        _err(str(exc))
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
