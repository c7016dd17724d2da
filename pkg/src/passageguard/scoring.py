"""Stage 3: does the aligned span actually support the extracted value?

The structured prediction is rendered as a hypothesis string
("{type name}: {value}"), paired with the aligned span as premise, and
scored by one of two pluggable backends: a remote entailment-probability
service, or a grader LLM that answers with reasoning plus a final
machine-readable verdict line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Any, Protocol

from .config import PipelineConfig
from .extraction import LLMTransport, MissingPlaceholder, TransportError
from .types import Entity, PassageGuardError

ENTITY_PLACEHOLDER = "{entity}"
CONTEXT_PLACEHOLDER = "{context}"

NLI_REMOTE = "NLI_REMOTE"
LLM_GRADER = "LLM_GRADER"


class ScorerUnavailable(PassageGuardError):
    pass


class MalformedScorerReply(PassageGuardError):
    pass


class UnparseableGraderReply(PassageGuardError):
    pass


@dataclass(frozen=True)
class ScoredPair:
    premise: str      # aligned document span
    hypothesis: str   # formatted prediction
    entity_id: str


@dataclass(frozen=True)
class ScoreResult:
    score: float
    backend: str
    passed: bool
    reasoning: str | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "score": self.score,
            "backend": self.backend,
            "pass": self.passed,
            "reasoning": self.reasoning,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ScoreResult":
        return cls(
            score=float(obj["score"]),
            backend=str(obj["backend"]),
            passed=bool(obj["pass"]),
            reasoning=obj.get("reasoning"),
        )


def format_hypothesis(entity: Entity) -> str:
    """Render a validated entity as "{type name}: {value string}"."""
    return f"{entity.entity_type}: {entity.payload.value_str()}"


class NliScorerClient:
    """HTTP client for the entailment-probability sidecar.

    Wire protocol: POST /score {"premise","hypothesis"} -> {"p_entail": p};
    POST /score_batch {"pairs": [...]} -> {"p_entail": [...]} in input order.
    """

    def __init__(self, base_url: str, *, session: Any = None, timeout: float = 60.0) -> None:
        if session is None:
            import requests

            session = requests.Session()
        self._base_url = base_url.rstrip("/")
        self._session = session
        self._timeout = timeout

    def _post(self, path: str, body: dict[str, Any]) -> dict[str, Any]:
        url = f"{self._base_url}{path}"
        try:
            resp = self._session.post(url, json=body, timeout=self._timeout)
        except Exception as exc:
            raise ScorerUnavailable(f"scorer at {url} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerUnavailable(f"scorer at {url} returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except Exception as exc:
            raise MalformedScorerReply(f"scorer reply is not JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise MalformedScorerReply("scorer reply must be a JSON object")
        return payload

    @staticmethod
    def _check_probability(value: Any) -> float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise MalformedScorerReply(f"p_entail must be a number, got {value!r}")
        p = float(value)
        if not 0.0 <= p <= 1.0:
            raise MalformedScorerReply(f"p_entail outside [0,1]: {p}")
        return p

    def entailment_probability(self, premise: str, hypothesis: str) -> float:
        payload = self._post("/score", {"premise": premise, "hypothesis": hypothesis})
        if "p_entail" not in payload:
            raise MalformedScorerReply("scorer reply is missing p_entail")
        return self._check_probability(payload["p_entail"])

    def entailment_probabilities(self, pairs: list[tuple[str, str]]) -> list[float]:
        body = {"pairs": [{"premise": p, "hypothesis": h} for p, h in pairs]}
        payload = self._post("/score_batch", body)
        values = payload.get("p_entail")
        if not isinstance(values, list) or len(values) != len(pairs):
            raise MalformedScorerReply(
                f"batch reply must carry {len(pairs)} probabilities, got {values!r}"
            )
        return [self._check_probability(v) for v in values]


def score_nli(pair: ScoredPair, client: NliScorerClient, cfg: PipelineConfig) -> ScoreResult:
    p = client.entailment_probability(pair.premise, pair.hypothesis)
    return ScoreResult(score=p, backend=NLI_REMOTE, passed=p >= cfg.nli_threshold)


def score_nli_batch(
    pairs: list[ScoredPair], client: NliScorerClient, cfg: PipelineConfig
) -> list[ScoreResult]:
    probs = client.entailment_probabilities([(p.premise, p.hypothesis) for p in pairs])
    return [
        ScoreResult(score=p, backend=NLI_REMOTE, passed=p >= cfg.nli_threshold)
        for p in probs
    ]


def default_grader_template() -> str:
    return resources.files("passageguard.templates").joinpath(
        "grader_prompt.txt").read_text(encoding="utf-8")


def build_grader_prompt(pair: ScoredPair, template: str) -> str:
    for placeholder in (ENTITY_PLACEHOLDER, CONTEXT_PLACEHOLDER):
        if placeholder not in template:
            raise MissingPlaceholder(f"grader template is missing {placeholder}")
    return template.replace(ENTITY_PLACEHOLDER, pair.hypothesis).replace(
        CONTEXT_PLACEHOLDER, pair.premise)


_VERDICT_RE = re.compile(r"verdict\s*:\s*(true|false)", re.IGNORECASE)
_SUPPORTS_RE = re.compile(r"\b(supports|insufficient)\b", re.IGNORECASE)


def parse_grader_reply(reply: str) -> bool:
    """Return the grader's hallucination flag (True = hallucination).

    The grader is instructed to finish with a `verdict: true|false` line
    (true = hallucination); the last such line wins. Replies using the
    support-label vocabulary are mapped onto the same flag: SUPPORTS means
    no hallucination, INSUFFICIENT means hallucination.
    """
    verdicts = _VERDICT_RE.findall(reply)
    if verdicts:
        return verdicts[-1].lower() == "true"
    labels = _SUPPORTS_RE.findall(reply)
    if labels:
        return labels[-1].lower() == "insufficient"
    raise UnparseableGraderReply(f"no verdict line or support label in reply: {reply[:200]!r}")


def score_llm(
    pair: ScoredPair,
    transport: LLMTransport,
    *,
    template: str | None = None,
    max_retries: int = 2,
) -> ScoreResult:
    """Ask the grader LLM whether the premise supports the hypothesis."""
    prompt = build_grader_prompt(pair, template or default_grader_template())
    attempts = 0
    last_error: PassageGuardError | None = None
    while attempts <= max_retries:
        attempts += 1
        try:
            reply = transport.send(prompt)
            hallucination = parse_grader_reply(reply)
        except (TransportError, UnparseableGraderReply) as exc:
            last_error = exc
            continue
        score = 0.0 if hallucination else 1.0
        return ScoreResult(score=score, backend=LLM_GRADER, passed=score == 1.0,
                           reasoning=reply)
    assert last_error is not None
    if isinstance(last_error, TransportError):
        raise TransportError(f"grader transport failed after {attempts} attempts: {last_error}")
    raise UnparseableGraderReply(
        f"no recognizable grader label after {attempts} attempts: {last_error}")


class EvidenceScorer(Protocol):
    """Pipeline-facing scorer: one ScoreResult per pair, same order."""

    def score_pair(self, pair: ScoredPair) -> ScoreResult: ...


class NliRemoteScorer:
    def __init__(self, client: NliScorerClient, cfg: PipelineConfig) -> None:
        self._client = client
        self._cfg = cfg

    def score_pair(self, pair: ScoredPair) -> ScoreResult:
        return score_nli(pair, self._client, self._cfg)

    def score_pairs(self, pairs: list[ScoredPair]) -> list[ScoreResult]:
        return score_nli_batch(pairs, self._client, self._cfg)


class LlmGraderScorer:
    def __init__(
        self, transport: LLMTransport, *, template: str | None = None, max_retries: int = 2
    ) -> None:
        self._transport = transport
        self._template = template or default_grader_template()
        self._max_retries = max_retries

    def score_pair(self, pair: ScoredPair) -> ScoreResult:
        return score_llm(pair, self._transport, template=self._template,
                         max_retries=self._max_retries)
