"""Vision provider boundary: remote HTTP client plus a deterministic oracle."""

from __future__ import annotations

from typing import Optional

from .base import (
    DEFAULT_SEEDS,
    PROMPT_TEMPLATE,
    Detection,
    LabelList,
    OracleConfig,
    Provider,
    SceneContext,
    SegmentMask,
    SynonymMap,
    SynthesisRequest,
)
from .oracle import OracleProvider, oracle_detect
from .remote import RemoteProvider
from .tables import BUILTIN_LABELS, builtin_suggest, fallback_synonyms

__all__ = [
    "BUILTIN_LABELS",
    "DEFAULT_SEEDS",
    "Detection",
    "LabelList",
    "OracleConfig",
    "OracleProvider",
    "PROMPT_TEMPLATE",
    "Provider",
    "RemoteProvider",
    "SceneContext",
    "SegmentMask",
    "SynonymMap",
    "SynthesisRequest",
    "builtin_suggest",
    "fallback_synonyms",
    "make_provider",
    "oracle_detect",
]


def make_provider(kind: str, url: Optional[str] = None, llm_url: Optional[str] = None,
                  timeout_s: float = 120.0,
                  oracle: Optional[OracleConfig] = None) -> Provider:
    if kind == "oracle":
        return OracleProvider(oracle)
    if kind == "remote":
        if not url:
            raise ValueError("remote provider requires a base URL")
        return RemoteProvider(url, llm_url=llm_url, timeout_s=timeout_s)
    raise ValueError(f"unknown provider kind '{kind}' (expected 'remote' or 'oracle')")
