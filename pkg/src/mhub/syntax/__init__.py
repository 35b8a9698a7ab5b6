"""Error-tolerant Modelica parsing, AST lowering, and printing."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .cst import CstNode, SyntaxTree
from .lexer import Token, TokenKind, tokenize
from .parser import apply_edit, lower, parse
from .printer import format_real, print_expr, print_stored_definition
from . import tree


class SourceKind(Enum):
    MODELICA = "modelica"
    VIRTUAL_MODELICA = "virtual-modelica"


@dataclass
class SourceUnit:
    uri: str
    text: str
    kind: SourceKind = SourceKind.MODELICA
    version: int = 0


def parse_unit(unit: SourceUnit):
    return parse(unit.text, unit.uri)


__all__ = [
    "CstNode", "SyntaxTree", "Token", "TokenKind", "tokenize",
    "parse", "parse_unit", "apply_edit", "lower",
    "print_stored_definition", "print_expr", "format_real",
    "SourceUnit", "SourceKind", "tree",
]
