"""Evidence-passage guardrails and evaluation harness for LLM extraction.

Every extracted field must carry evidence copied from the document that
both aligns into the document and supports the extracted value; extractions
failing either check are flagged instead of trusted.
"""

from .align import AlignmentResult, ColumnCounts, MismatchLabel, align, diagnose
from .config import PipelineConfig, load_config
from .evaluation import (
    HumanLabel,
    MetricReport,
    compare_models,
    detection_metrics,
    export_silver,
)
from .extraction import (
    ExtractionRequest,
    ExtractionResponse,
    FixtureTransport,
    HttpChatTransport,
    build_prompt,
    extract,
)
from .normalize import NormalizedText, normalize
from .pipeline import (
    Extractor,
    PassageVerdict,
    RunSummary,
    VerdictStatus,
    run_corpus,
    run_document,
    summarize,
)
from .scoring import (
    NliScorerClient,
    ScoredPair,
    ScoreResult,
    format_hypothesis,
    score_llm,
    score_nli,
)
from .types import (
    DatePayload,
    Document,
    Entity,
    EntityKind,
    EntityType,
    PassageGuardError,
    Payload,
    validate_entity,
)

__version__ = "0.1.0"
