"""Concrete syntax tree: full-coverage, loss-free view of the source text."""
from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import Token


@dataclass
class CstNode:
    """Interior node named after the grammar rule that produced it.

    Children are CstNodes and Tokens in source order. ``is_error`` marks
    regions the parser gave up on; their tokens are still in the tree so
    text coverage holds even for malformed input.
    """

    kind: str
    children: list["CstNode | Token"] = field(default_factory=list)
    is_error: bool = False

    @property
    def span(self) -> tuple[int, int]:
        first = _first_token(self)
        last = _last_token(self)
        if first is None or last is None:
            return (0, 0)
        return (first.start, last.end)

    def tokens(self):
        for child in self.children:
            if isinstance(child, Token):
                yield child
            else:
                yield from child.tokens()

    def find_all(self, kind: str):
        for child in self.children:
            if isinstance(child, CstNode):
                if child.kind == kind:
                    yield child
                yield from child.find_all(kind)

    def error_nodes(self):
        for child in self.children:
            if isinstance(child, CstNode):
                if child.is_error:
                    yield child
                yield from child.error_nodes()

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "span": list(self.span),
            "isError": self.is_error,
            "children": [
                child.to_json()
                if isinstance(child, CstNode)
                else {"token": child.kind.value, "text": child.text, "span": [child.start, child.end]}
                for child in self.children
            ],
        }


def _first_token(node: CstNode):
    for child in node.children:
        if isinstance(child, Token):
            return child
        tok = _first_token(child)
        if tok is not None:
            return tok
    return None


def _last_token(node: CstNode):
    for child in reversed(node.children):
        if isinstance(child, Token):
            return child
        tok = _last_token(child)
        if tok is not None:
            return tok
    return None


@dataclass
class SyntaxTree:
    """Parse result for one source unit: root CST plus the raw token stream."""

    root: CstNode
    text: str
    uri: str = "<memory>"
    lower_diags: list = field(default_factory=list)

    def reconstructed_text(self) -> str:
        return "".join(tok.leading + tok.text for tok in self.root.tokens())
