"""Lexer for ConGo source text.

Comments run from ``#`` to end of line.  The layer-marker sequences
``@(``, ``)+`` and ``|+@(`` are emitted as ordinary token runs (``@(`` is
one token, the plus signs separate tokens) and disambiguated by the
parser from their position.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

from .errors import LexError
from .nodes import SourceSpan


class TokenKind(Enum):
    IDENT = "ident"
    INT = "int"
    FLOAT = "float"
    STRING = "string"
    KEYWORD = "keyword"
    PUNCT = "punct"
    EOF = "eof"


KEYWORDS = frozenset({
    "module", "function", "let", "return", "if", "else", "while",
    "true", "false", "null", "not",
})

# 'contexts' and 'proceed' stay ordinary identifiers; the parser treats
# them positionally so they remain usable as method and property names.

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}

_SINGLE_PUNCT = set("=<>+-*/%()[]{},|:.")


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    value: object  # decoded literal for INT/FLOAT/STRING, else None
    span: SourceSpan

    def __repr__(self) -> str:  # compact form keeps test failures readable
        return f"Token({self.kind.value}, {self.text!r}, {self.span.line}:{self.span.column})"


def _is_ident_start(c: str) -> bool:
    return c.isascii() and (c.isalpha() or c == "_")


def _is_ident_char(c: str) -> bool:
    return c.isascii() and (c.isalnum() or c == "_")


def tokenize(source: str, file: str = "<string>") -> List[Token]:
    """Tokenize ``source``, ending the stream with a single EOF token."""
    tokens: List[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def span() -> SourceSpan:
        return SourceSpan(file, line, col)

    def emit(kind: TokenKind, text: str, value: object, sp: SourceSpan) -> None:
        tokens.append(Token(kind, text, value, sp))

    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and source[i] != "\n":
                i += 1
            continue
        if c == '"':
            sp = span()
            i += 1
            col += 1
            buf: List[str] = []
            while True:
                if i >= n or source[i] == "\n":
                    raise LexError("unterminated string literal", sp)
                ch = source[i]
                if ch == '"':
                    i += 1
                    col += 1
                    break
                if ch == "\\":
                    if i + 1 >= n:
                        raise LexError("unterminated string literal", sp)
                    esc = source[i + 1]
                    if esc not in _ESCAPES:
                        raise LexError(
                            f"unsupported escape '\\{esc}' in string literal",
                            SourceSpan(file, line, col),
                        )
                    buf.append(_ESCAPES[esc])
                    i += 2
                    col += 2
                    continue
                buf.append(ch)
                i += 1
                col += 1
            emit(TokenKind.STRING, "".join(buf), "".join(buf), sp)
            continue
        if c.isdigit():
            sp = span()
            start = i
            while i < n and source[i].isdigit():
                i += 1
            is_float = False
            if i + 1 < n and source[i] == "." and source[i + 1].isdigit():
                is_float = True
                i += 1
                while i < n and source[i].isdigit():
                    i += 1
            text = source[start:i]
            col += len(text)
            if is_float:
                emit(TokenKind.FLOAT, text, float(text), sp)
            else:
                emit(TokenKind.INT, text, int(text), sp)
            continue
        if _is_ident_start(c):
            sp = span()
            start = i
            while i < n and _is_ident_char(source[i]):
                i += 1
            text = source[start:i]
            col += len(text)
            kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENT
            emit(kind, text, None, sp)
            continue
        if c == "@":
            sp = span()
            if i + 1 < n and source[i + 1] == "(":
                emit(TokenKind.PUNCT, "@(", None, sp)
                i += 2
                col += 2
                continue
            raise LexError("illegal character '@'", sp)
        if c == "&":
            sp = span()
            if i + 1 < n and source[i + 1] == "&":
                emit(TokenKind.PUNCT, "&&", None, sp)
                i += 2
                col += 2
                continue
            raise LexError("illegal character '&'", sp)
        if c == "!":
            sp = span()
            if i + 1 < n and source[i + 1] == "=":
                emit(TokenKind.PUNCT, "!=", None, sp)
                i += 2
                col += 2
                continue
            raise LexError("illegal character '!'", sp)
        two = source[i:i + 2]
        if two in ("->", "==", "<=", ">=", "||"):
            emit(TokenKind.PUNCT, two, None, span())
            i += 2
            col += 2
            continue
        if c in _SINGLE_PUNCT:
            emit(TokenKind.PUNCT, c, None, span())
            i += 1
            col += 1
            continue
        raise LexError(f"illegal character {c!r}", span())

    emit(TokenKind.EOF, "", None, span())
    return tokens
