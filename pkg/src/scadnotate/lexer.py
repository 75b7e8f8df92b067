"""Tokenizer for the OpenSCAD subset.

Comments are not tokens; they are collected on the side with the index of the
token that follows them, so the parser can attach each comment to the next
statement.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import LexError
from .nodes import SourceFile

PUNCT = "()[]{},;=:+-*/"

KEYWORDS = frozenset({"module", "for", "true", "false"})


@dataclass(frozen=True)
class Token:
    kind: str  # NUMBER | IDENT | KEYWORD | one of PUNCT | EOF
    text: str
    line: int
    col: int

    @property
    def value(self) -> float:
        return float(self.text)


@dataclass(frozen=True)
class Comment:
    text: str  # without // or /* */ markers
    line: int  # line the comment starts on
    next_token: int  # index into the token list of the first token after it
    block: bool = False


def tokenize(source: SourceFile) -> tuple[list[Token], list[Comment]]:
    text = source.text
    tokens: list[Token] = []
    comments: list[Comment] = []
    i = 0
    n = len(text)
    line = 1
    line_start = 0

    def col(pos: int) -> int:
        return pos - line_start + 1

    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
            line_start = i
            continue
        if ch in " \t\r":
            i += 1
            continue
        if text.startswith("//", i):
            end = text.find("\n", i)
            end = n if end == -1 else end
            comments.append(Comment(text[i + 2 : end].strip(), line, len(tokens)))
            i = end
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end == -1:
                raise LexError(line, col(i), "unterminated block comment")
            comments.append(Comment(text[i + 2 : end].strip(), line, len(tokens), block=True))
            for j in range(i, end + 2):
                if text[j] == "\n":
                    line += 1
                    line_start = j + 1
            i = end + 2
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            start = i
            while i < n and text[i].isdigit():
                i += 1
            if i < n and text[i] == ".":
                i += 1
                while i < n and text[i].isdigit():
                    i += 1
            if i < n and text[i] in "eE":
                j = i + 1
                if j < n and text[j] in "+-":
                    j += 1
                if j < n and text[j].isdigit():
                    i = j
                    while i < n and text[i].isdigit():
                        i += 1
                else:
                    raise LexError(line, col(i), "malformed exponent")
            tokens.append(Token("NUMBER", text[start:i], line, col(start)))
            continue
        if ch.isalpha() or ch == "_" or ch == "$":
            start = i
            i += 1
            while i < n and (text[i].isalnum() or text[i] == "_"):
                i += 1
            word = text[start:i]
            kind = "KEYWORD" if word in KEYWORDS else "IDENT"
            tokens.append(Token(kind, word, line, col(start)))
            continue
        if ch in PUNCT:
            tokens.append(Token(ch, ch, line, col(i)))
            i += 1
            continue
        raise LexError(line, col(i), f"unexpected character {ch!r}")

    tokens.append(Token("EOF", "", line, col(i)))
    return tokens, comments
