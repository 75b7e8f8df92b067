"""Exception types shared across the package.

Every error raised by the library derives from ScadnotateError so CLI entry
points can map failures to exit codes in one place.
"""

from __future__ import annotations


class ScadnotateError(Exception):
    """Base class for all library errors."""


class LexError(ScadnotateError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"lex error at line {line}, col {col}: {message}")
        self.line = line
        self.col = col


class ParseError(ScadnotateError):
    """Syntax error with the set of token kinds that would have been accepted."""

    def __init__(self, line: int, col: int, expected: set[str], message: str = ""):
        detail = message or "expected one of: " + ", ".join(sorted(expected))
        super().__init__(f"syntax error at line {line}, col {col}: {detail}")
        self.line = line
        self.col = col
        self.expected = frozenset(expected)


class UnknownIdentifierError(ScadnotateError):
    def __init__(self, line: int, name: str):
        super().__init__(f"line {line}: call to undefined module '{name}'")
        self.line = line
        self.name = name


class EvalError(ScadnotateError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class NotExpandedError(ScadnotateError):
    """Raised when an operation requires an expanded tree but loops/calls remain."""


class MalformedCommentError(ScadnotateError):
    def __init__(self, line: int):
        super().__init__(f"line {line}: comment above block contains no label text")
        self.line = line


class EmptyShapeError(ScadnotateError):
    """Shape (or subtree) provably produces no geometry."""


class DegenerateBoundsError(ScadnotateError):
    """Bounding box has zero extent in every axis; no view ring can be fit."""


class DimensionMismatchError(ScadnotateError):
    """Masks or matrices that must share dimensions do not."""


class ShapeMismatchError(ScadnotateError):
    """Confidence matrices with different block/label orderings were combined."""


class ProviderUnreachable(ScadnotateError):
    """Remote vision provider could not be contacted."""


class ProviderError(ScadnotateError):
    def __init__(self, status: int, body: str):
        super().__init__(f"provider returned HTTP {status}: {body[:200]}")
        self.status = status
        self.body = body


class BadImage(ScadnotateError):
    """Provider response contained an undecodable image."""


class UnknownCategoryError(ScadnotateError):
    def __init__(self, category: str):
        super().__init__(
            f"no label suggestions for category '{category}' "
            "(no LLM endpoint configured and no built-in table entry)"
        )
        self.category = category


class PipelineFailed(ScadnotateError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"pipeline failed at stage '{stage}': {message}")
        self.stage = stage


class InvalidPrimitiveError(ScadnotateError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"primitive record {index}: {reason}")
        self.index = index
        self.reason = reason


class EmptyCloudError(ScadnotateError):
    """Labeled point cloud contains no points."""


class NoGroundTruthError(ScadnotateError):
    """Metrics requested but no block carries a ground-truth label."""


class DuplicateIdError(ScadnotateError):
    def __init__(self, entry_id: str):
        super().__init__(f"duplicate dataset entry id '{entry_id}'")
        self.entry_id = entry_id
