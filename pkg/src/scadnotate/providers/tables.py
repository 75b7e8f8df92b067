"""Built-in part-name suggestions and the conservative synonym fallback.

Used when no language-model endpoint is configured.  The fallback synonym
rule is deliberately narrow (lowercase + plural-s stemming) so offline metric
runs never invent semantic equivalences.
"""

from __future__ import annotations

from typing import Optional

from ..errors import UnknownCategoryError
from .base import LabelList, SynonymMap

BUILTIN_LABELS: dict[str, tuple[str, ...]] = {
    "airplane": ("body", "wings", "tail", "engine"),
    "chair": ("back", "seat", "leg", "arm"),
    "table": ("top", "leg"),
    "animal": ("head", "body", "leg", "tail"),
}


def builtin_suggest(category: str) -> LabelList:
    key = category.strip().lower()
    if key not in BUILTIN_LABELS:
        raise UnknownCategoryError(category)
    return LabelList(category=key, labels=BUILTIN_LABELS[key])


def _stem(label: str) -> str:
    label = label.strip().lower()
    return label[:-1] if label.endswith("s") and len(label) > 1 else label


def fallback_synonyms(predicted: list[str], ground_truth: list[str]) -> SynonymMap:
    gt_by_stem = {_stem(g): g for g in ground_truth}
    mapping: dict[str, Optional[str]] = {p: gt_by_stem.get(_stem(p)) for p in predicted}
    return SynonymMap(mapping=mapping)
