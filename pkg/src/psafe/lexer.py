"""Tokenizer for `.psafe` sources.

Unit-suffixed numbers (`1m`, `1000px`) lex as one composite token; a space
between the digits and the suffix produces an identifier instead, which the
parser then rejects. `#` starts a line comment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .diagnostics import CompileError, SourceSpan, error
from .units import SUFFIX_UNITS

KEYWORDS = frozenset(
    {
        "exists",
        "in",
        "hist",
        "histogram",
        "lasers",
        "sound",
        "stop",
        "cap_speed",
        "true",
        "false",
    }
)


class TokenKind(Enum):
    KEYWORD = "keyword"
    IDENT = "identifier"
    NUMBER = "number"
    PUNCT = "punctuation"
    COMPARE = "comparison-op"
    ARITH = "arith-op"
    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    span: SourceSpan
    value: Fraction | None = None  # numbers only
    unit: str | None = None  # composite unit suffix ("m" / "px")

    def __repr__(self) -> str:
        return f"Token({self.kind.value}, {self.text!r})"


_PUNCT = frozenset("(){}:;,.")
_ARITH = frozenset("+-*/")


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_part(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


class _Scanner:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0
        self.line = 1
        self.col = 1

    def at_end(self) -> bool:
        return self.pos >= len(self.src)

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.src[i] if i < len(self.src) else ""

    def advance(self) -> str:
        ch = self.src[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def span_from(self, line: int, col: int, text: str) -> SourceSpan:
        return SourceSpan(line, col, len(text))


def tokenize(source: str) -> list[Token]:
    """Lex `source` into tokens, ending with a zero-length EOF token.

    Raises CompileError (code E-LEX) on the first unrecognized character,
    malformed number, or unknown unit suffix.
    """
    sc = _Scanner(source)
    tokens: list[Token] = []

    while not sc.at_end():
        ch = sc.peek()
        if ch.isspace():
            sc.advance()
            continue
        if ch == "#":
            while not sc.at_end() and sc.peek() != "\n":
                sc.advance()
            continue

        line, col = sc.line, sc.col

        if _is_ident_start(ch):
            text = sc.advance()
            while not sc.at_end() and _is_ident_part(sc.peek()):
                text += sc.advance()
            kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, text, sc.span_from(line, col, text)))
            continue

        if ch.isdigit():
            tokens.append(_lex_number(sc, line, col))
            continue

        if ch in _PUNCT:
            text = sc.advance()
            tokens.append(Token(TokenKind.PUNCT, text, sc.span_from(line, col, text)))
            continue

        if ch in _ARITH:
            text = sc.advance()
            tokens.append(Token(TokenKind.ARITH, text, sc.span_from(line, col, text)))
            continue

        if ch in "<>=!":
            text = sc.advance()
            if ch == "!":
                if sc.peek() == "=":
                    text += sc.advance()
                else:
                    raise CompileError(
                        [error("E-LEX", "expected '=' after '!'", SourceSpan(line, col, 1))]
                    )
            elif ch in "<>" and sc.peek() == "=":
                text += sc.advance()
            tokens.append(Token(TokenKind.COMPARE, text, sc.span_from(line, col, text)))
            continue

        raise CompileError(
            [error("E-LEX", f"unrecognized character {ch!r}", SourceSpan(line, col, 1))]
        )

    tokens.append(Token(TokenKind.EOF, "", SourceSpan(sc.line, sc.col, 0)))
    return tokens


def _lex_number(sc: _Scanner, line: int, col: int) -> Token:
    text = ""
    while not sc.at_end() and sc.peek().isdigit():
        text += sc.advance()
    if sc.peek() == "." and sc.peek(1).isdigit():
        text += sc.advance()
        while not sc.at_end() and sc.peek().isdigit():
            text += sc.advance()
    elif sc.peek() == ".":
        # A bare trailing dot is a field-access dot, never part of a number;
        # but `1.` with no digit after in expression position is malformed.
        raise CompileError(
            [
                error(
                    "E-LEX",
                    f"malformed number {text + '.'!r}",
                    SourceSpan(line, col, len(text) + 1),
                )
            ]
        )
    value = Fraction(text)

    unit = None
    if not sc.at_end() and _is_ident_start(sc.peek()):
        suffix = ""
        while not sc.at_end() and _is_ident_part(sc.peek()):
            suffix += sc.advance()
        if suffix not in SUFFIX_UNITS:
            raise CompileError(
                [
                    error(
                        "E-LEX",
                        f"unknown unit suffix {suffix!r} on number {text!r}",
                        SourceSpan(line, col, len(text) + len(suffix)),
                    )
                ]
            )
        unit = suffix
        text += suffix

    return Token(TokenKind.NUMBER, text, sc.span_from(line, col, text), value, unit)
