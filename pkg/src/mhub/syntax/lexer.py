"""Modelica 3.6 lexer.

Produces a token stream that fully covers the input: every byte of source
text belongs either to a token or to the leading trivia (whitespace and
comments) of the token that follows it. The final EOF token absorbs any
trailing trivia, so concatenating ``leading + text`` over the stream
reconstructs the input exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class TokenKind(Enum):
    IDENT = "ident"
    NUMBER = "number"
    STRING = "string"
    KEYWORD = "keyword"
    OP = "op"
    BAD = "bad"
    EOF = "eof"


KEYWORDS = frozenset(
    """
    algorithm and annotation block break class connect connector constant
    constrainedby der discrete each else elseif elsewhen encapsulated end
    enumeration equation expandable extends external false final flow for
    function if import impure in initial inner input loop model not operator
    or outer output package parameter partial protected public pure record
    redeclare replaceable return stream then true type when while within
    """.split()
)

# Longest first so the scanner can try them in order.
OPERATORS = (
    ":=", "==", "<>", "<=", ">=",
    ".+", ".-", ".*", "./", ".^",
    "(", ")", "[", "]", "{", "}",
    ";", ":", ",", ".", "+", "-", "*", "/", "^", "=", "<", ">",
)

_IDENT_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | frozenset("0123456789")
_DIGITS = frozenset("0123456789")


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    start: int
    end: int
    leading: str = field(default="", compare=False)

    @property
    def full_start(self) -> int:
        return self.start - len(self.leading)

    def __repr__(self) -> str:  # compact, for test failure readability
        return f"Token({self.kind.value}, {self.text!r}, {self.start}..{self.end})"


def tokenize(text: str) -> list[Token]:
    """Lex ``text`` into tokens ending with a single EOF token.

    Never raises: unrecognizable characters become BAD tokens and
    unterminated strings/comments extend to end of input.
    """
    tokens: list[Token] = []
    i = 0
    n = len(text)
    trivia_start = 0

    def emit(kind: TokenKind, start: int, end: int) -> None:
        nonlocal trivia_start
        tokens.append(Token(kind, text[start:end], start, end, leading=text[trivia_start:start]))
        trivia_start = end

    while i < n:
        c = text[i]
        # whitespace
        if c in " \t\r\n\f\v":
            i += 1
            continue
        # comments
        if c == "/" and i + 1 < n:
            if text[i + 1] == "/":
                j = text.find("\n", i)
                i = n if j < 0 else j
                continue
            if text[i + 1] == "*":
                j = text.find("*/", i + 2)
                i = n if j < 0 else j + 2
                continue
        if c in _IDENT_START:
            j = i + 1
            while j < n and text[j] in _IDENT_CONT:
                j += 1
            word = text[i:j]
            emit(TokenKind.KEYWORD if word in KEYWORDS else TokenKind.IDENT, i, j)
            i = j
            continue
        if c in _DIGITS or (c == "." and i + 1 < n and text[i + 1] in _DIGITS):
            i = _scan_number(text, i, emit)
            continue
        if c == '"':
            i = _scan_string(text, i, '"', emit, TokenKind.STRING)
            continue
        if c == "'":
            # quoted identifier
            i = _scan_string(text, i, "'", emit, TokenKind.IDENT)
            continue
        for op in OPERATORS:
            if text.startswith(op, i):
                emit(TokenKind.OP, i, i + len(op))
                i += len(op)
                break
        else:
            emit(TokenKind.BAD, i, i + 1)
            i += 1

    tokens.append(Token(TokenKind.EOF, "", n, n, leading=text[trivia_start:n]))
    return tokens


def _scan_number(text: str, i: int, emit) -> int:
    n = len(text)
    j = i
    while j < n and text[j] in _DIGITS:
        j += 1
    if j < n and text[j] == ".":
        # "1:2" must not lex "1." when followed by another '.'? Modelica has no
        # '..' token, but avoid swallowing the dot of "1.e" without exponent digits.
        j += 1
        while j < n and text[j] in _DIGITS:
            j += 1
    if j < n and text[j] in "eE":
        k = j + 1
        if k < n and text[k] in "+-":
            k += 1
        if k < n and text[k] in _DIGITS:
            j = k
            while j < n and text[j] in _DIGITS:
                j += 1
    emit(TokenKind.NUMBER, i, j)
    return j


def _scan_string(text: str, i: int, quote: str, emit, kind: TokenKind) -> int:
    n = len(text)
    j = i + 1
    while j < n:
        if text[j] == "\\" and j + 1 < n:
            j += 2
            continue
        if text[j] == quote:
            j += 1
            break
        j += 1
    else:
        j = n
    emit(kind, i, j)
    return j


def unescape_string(raw: str) -> str:
    """Decode a lexed Modelica string or quoted-identifier token body."""
    if len(raw) >= 2 and raw[0] in "\"'" and raw[-1] == raw[0]:
        raw = raw[1:-1]
    out: list[str] = []
    i = 0
    escapes = {"n": "\n", "t": "\t", "r": "\r", "a": "\a", "b": "\b", "f": "\f", "v": "\v"}
    while i < len(raw):
        c = raw[i]
        if c == "\\" and i + 1 < len(raw):
            nxt = raw[i + 1]
            out.append(escapes.get(nxt, nxt))
            i += 2
        else:
            out.append(c)
            i += 1
    return "".join(out)


def escape_string(value: str) -> str:
    """Encode a string value as a double-quoted Modelica string literal."""
    out = value.replace("\\", "\\\\").replace('"', '\\"')
    out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{out}"'
