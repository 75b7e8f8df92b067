"""Semantic part comments for CSG CAD programs.

Parses an OpenSCAD-subset program into commentable code blocks, executes it
as an implicit solid, renders depth maps and per-block masks from a view
ring, queries a vision provider for open-vocabulary part segments, and votes
per-block labels from the accumulated evidence.
"""

from .blocks import (
    BlockAssignment,
    BlockSet,
    CodeBlock,
    collect_commentable_blocks,
    extract_blocks,
    find_irreducible_blocks,
    insert_comments,
    read_ground_truth,
)
from .evaluate import expand
from .nodes import SourceFile, SyntaxTree, structurally_equal
from .parser import parse, parse_file, parse_text
from .printer import pretty_print

__version__ = "0.1.0"

__all__ = [
    "BlockAssignment",
    "BlockSet",
    "CodeBlock",
    "SourceFile",
    "SyntaxTree",
    "collect_commentable_blocks",
    "expand",
    "extract_blocks",
    "find_irreducible_blocks",
    "insert_comments",
    "parse",
    "parse_file",
    "parse_text",
    "pretty_print",
    "read_ground_truth",
    "structurally_equal",
]
