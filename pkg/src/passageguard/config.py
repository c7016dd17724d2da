"""Pipeline configuration and the plain-text key/value config file format.

A config file is one `key = value` pair per line; blank lines and lines
starting with '#' are ignored. Every PipelineConfig field can be set from
the file and overridden with repeated `--set key=value` flags.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .types import PassageGuardError

SCORER_BACKENDS = ("NLI_REMOTE", "LLM_GRADER")

# API keys are only ever read from the environment, never from config files.
EXTRACTOR_API_KEY_ENV = "PASSAGEGUARD_EXTRACTOR_API_KEY"
GRADER_API_KEY_ENV = "PASSAGEGUARD_GRADER_API_KEY"


class ConfigError(PassageGuardError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # Alignment gate
    tau: float = 0.6
    min_context_chars: int = 3
    match_score: int = 1
    mismatch_penalty: int = -1
    gap_penalty: int = -1
    fold_case: bool = True

    # Evidence scoring
    scorer_backend: str = "NLI_REMOTE"
    nli_threshold: float = 0.5
    nli_endpoint: str = "http://127.0.0.1:8400"

    # Extractor LLM
    extractor_model: str = ""
    extractor_endpoint: str = ""
    extractor_max_retries: int = 2
    extractor_parallelism: int = 4

    # Grader LLM (defaults to the extractor endpoint when unset)
    grader_model: str = ""
    grader_endpoint: str = ""
    grader_max_retries: int = 2

    # Orchestration
    doc_parallelism: int = 2

    def validate(self) -> "PipelineConfig":
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"tau must be in [0,1], got {self.tau}")
        if not 0.0 <= self.nli_threshold <= 1.0:
            raise ConfigError(f"nli_threshold must be in [0,1], got {self.nli_threshold}")
        if self.min_context_chars < 1:
            raise ConfigError(f"min_context_chars must be >= 1, got {self.min_context_chars}")
        if self.match_score <= 0:
            raise ConfigError(f"match_score must be > 0, got {self.match_score}")
        if self.mismatch_penalty > 0:
            raise ConfigError(f"mismatch_penalty must be <= 0, got {self.mismatch_penalty}")
        if self.gap_penalty > 0:
            raise ConfigError(f"gap_penalty must be <= 0, got {self.gap_penalty}")
        if self.scorer_backend not in SCORER_BACKENDS:
            raise ConfigError(
                f"scorer_backend must be one of {SCORER_BACKENDS}, got {self.scorer_backend!r}"
            )
        if self.extractor_max_retries < 0 or self.grader_max_retries < 0:
            raise ConfigError("retry counts must be >= 0")
        if self.extractor_parallelism < 1 or self.doc_parallelism < 1:
            raise ConfigError("parallelism settings must be >= 1")
        return self


_BOOL_VALUES = {"true": True, "yes": True, "1": True, "on": True,
                "false": False, "no": False, "0": False, "off": False}


def _coerce(name: str, raw: str, target_type: type) -> object:
    raw = raw.strip()
    try:
        if target_type is bool:
            if raw.lower() not in _BOOL_VALUES:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_VALUES[raw.lower()]
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def _field_types() -> dict[str, type]:
    out: dict[str, type] = {}
    for f in fields(PipelineConfig):
        out[f.name] = f.type if isinstance(f.type, type) else {"float": float, "int": int,
                                                               "bool": bool, "str": str}[f.type]
    return out


def apply_settings(cfg: PipelineConfig, settings: dict[str, str]) -> PipelineConfig:
    """Apply string key/value settings on top of a config; unknown keys are errors."""
    types = _field_types()
    updates: dict[str, object] = {}
    for key, raw in settings.items():
        if key not in types:
            raise ConfigError(f"unknown config key: {key!r}")
        updates[key] = _coerce(key, raw, types[key])
    return replace(cfg, **updates).validate()


def parse_config_text(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    settings: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        settings[key.strip()] = value.strip()
    return apply_settings(base or PipelineConfig(), settings)


def load_config(path: str | Path, overrides: dict[str, str] | None = None) -> PipelineConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cfg = parse_config_text(p.read_text(encoding="utf-8"))
    if overrides:
        cfg = apply_settings(cfg, overrides)
    return cfg


def parse_override_args(pairs: list[str]) -> dict[str, str]:
    """Parse repeated `--set key=value` arguments."""
    out: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, _, value = pair.partition("=")
        out[key.strip()] = value.strip()
    return out
