"""Abstract syntax for Modelica stored definitions.

All nodes carry the span of the CST region they were lowered from; spans are
excluded from equality so structural comparison (round-trip tests, fragment
checks) ignores layout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

Span = tuple[int, int]


def _span_field():
    return field(default=(0, 0), compare=False, repr=False)


class Restriction(Enum):
    PACKAGE = "package"
    MODEL = "model"
    RECORD = "record"
    CONNECTOR = "connector"
    BLOCK = "block"
    TYPE = "type"
    FUNCTION = "function"


class Variability(Enum):
    CONSTANT = "constant"
    PARAMETER = "parameter"
    DISCRETE = "discrete"
    CONTINUOUS = "continuous"


class Causality(Enum):
    NONE = "none"
    INPUT = "input"
    OUTPUT = "output"


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class IntLit:
    value: int
    span: Span = _span_field()


@dataclass(frozen=True)
class RealLit:
    value: float
    span: Span = _span_field()


@dataclass(frozen=True)
class StringLit:
    value: str
    span: Span = _span_field()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Span = _span_field()


@dataclass(frozen=True)
class RefPart:
    """One dotted segment of a component reference, with its subscripts."""

    name: str
    subscripts: tuple["Expr | Colon", ...] = ()


@dataclass(frozen=True)
class Colon:
    """A ':' subscript or unspecified array dimension."""

    span: Span = _span_field()


@dataclass(frozen=True)
class Ref:
    parts: tuple[RefPart, ...]
    global_: bool = False  # leading '.'
    span: Span = _span_field()

    def dotted(self) -> str:
        return ".".join(p.name for p in self.parts)


@dataclass(frozen=True)
class Iterator:
    name: str
    domain: Optional["Expr"]


@dataclass(frozen=True)
class Call:
    callee: Ref
    args: tuple["Expr", ...] = ()
    named_args: tuple[tuple[str, "Expr"], ...] = ()
    iterators: tuple[Iterator, ...] = ()  # reduction/comprehension form
    span: Span = _span_field()


@dataclass(frozen=True)
class Unary:
    op: str  # '-', '+', 'not'
    operand: "Expr"
    span: Span = _span_field()


@dataclass(frozen=True)
class Binary:
    op: str  # arithmetic, relational, logical, elementwise dotted forms
    lhs: "Expr"
    rhs: "Expr"
    span: Span = _span_field()


@dataclass(frozen=True)
class IfExpr:
    branches: tuple[tuple["Expr", "Expr"], ...]  # (condition, value)
    orelse: "Expr"
    span: Span = _span_field()


@dataclass(frozen=True)
class RangeExpr:
    start: "Expr"
    stop: "Expr"
    step: Optional["Expr"] = None
    span: Span = _span_field()


@dataclass(frozen=True)
class ArrayExpr:
    elements: tuple["Expr", ...]
    iterators: tuple[Iterator, ...] = ()  # array comprehension {e for i in ...}
    span: Span = _span_field()


@dataclass(frozen=True)
class MatrixExpr:
    rows: tuple[tuple["Expr", ...], ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class TupleExpr:
    """Parenthesized output list, e.g. (a, b) := f(...)."""

    elements: tuple[Optional["Expr"], ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class EndExpr:
    span: Span = _span_field()


Expr = Union[
    IntLit, RealLit, StringLit, BoolLit, Ref, Call, Unary, Binary,
    IfExpr, RangeExpr, ArrayExpr, MatrixExpr, TupleExpr, EndExpr,
]


# ---------------------------------------------------------------------------
# Modifications


@dataclass(frozen=True)
class Modification:
    """Merged view of a class/component modification.

    ``submods`` maps a single element name to the nested modification; paths
    like ``x.start = 1`` lower to nested entries. ``binding`` is the ``=``
    (or ``:=``) expression, if any.
    """

    submods: tuple[tuple[str, "Modification"], ...] = ()
    redeclarations: tuple["Redeclaration", ...] = ()
    binding: Optional[Expr] = None
    each: bool = False
    final: bool = False
    span: Span = _span_field()

    def submod(self, name: str) -> Optional["Modification"]:
        for key, mod in self.submods:
            if key == name:
                return mod
        return None

    def is_empty(self) -> bool:
        return not self.submods and not self.redeclarations and self.binding is None


@dataclass(frozen=True)
class Redeclaration:
    """redeclare of a component or a short class inside a modification."""

    name: str
    component: Optional["Component"] = None
    short_class: Optional["AstClass"] = None
    each: bool = False
    final: bool = False
    replaceable: bool = False


# ---------------------------------------------------------------------------
# Class contents


@dataclass(frozen=True)
class Import:
    name: str  # fully qualified imported name
    alias: Optional[str] = None  # import D = A.B
    wildcard: bool = False  # import A.B.*
    selection: tuple[str, ...] = ()  # import A.B.{C,D}
    span: Span = _span_field()


@dataclass(frozen=True)
class ExtendsClause:
    base_name: str
    modification: Modification = Modification()
    annotation: Optional[Modification] = None
    span: Span = _span_field()


@dataclass(frozen=True)
class Component:
    type_name: str
    name: str
    array_subscripts: tuple[Expr | Colon, ...] = ()
    variability: Optional[Variability] = None  # None: inherited/continuous default
    causality: Causality = Causality.NONE
    flow_prefix: Optional[str] = None  # 'flow' | 'stream'
    modification: Modification = Modification()
    replaceable: bool = False
    redeclare: bool = False
    final: bool = False
    condition: Optional[Expr] = None
    comment: Optional[str] = None
    annotation: Optional[Modification] = None
    span: Span = _span_field()


# --- equations


@dataclass(frozen=True)
class EqEquality:
    lhs: Expr
    rhs: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class EqConnect:
    a: Ref
    b: Ref
    span: Span = _span_field()


@dataclass(frozen=True)
class EqFor:
    iterators: tuple[Iterator, ...]
    body: tuple["Equation", ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class EqIf:
    branches: tuple[tuple[Expr, tuple["Equation", ...]], ...]
    orelse: tuple["Equation", ...] = ()
    span: Span = _span_field()


@dataclass(frozen=True)
class EqWhen:
    branches: tuple[tuple[Expr, tuple["Equation", ...]], ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class EqCall:
    call: Call
    span: Span = _span_field()


Equation = Union[EqEquality, EqConnect, EqFor, EqIf, EqWhen, EqCall]


# --- statements


@dataclass(frozen=True)
class StAssign:
    target: Ref | TupleExpr
    value: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class StCall:
    call: Call
    span: Span = _span_field()


@dataclass(frozen=True)
class StIf:
    branches: tuple[tuple[Expr, tuple["Statement", ...]], ...]
    orelse: tuple["Statement", ...] = ()
    span: Span = _span_field()


@dataclass(frozen=True)
class StFor:
    iterators: tuple[Iterator, ...]
    body: tuple["Statement", ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class StWhile:
    condition: Expr
    body: tuple["Statement", ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class StWhen:
    branches: tuple[tuple[Expr, tuple["Statement", ...]], ...]
    span: Span = _span_field()


@dataclass(frozen=True)
class StReturn:
    span: Span = _span_field()


@dataclass(frozen=True)
class StBreak:
    span: Span = _span_field()


Statement = Union[StAssign, StCall, StIf, StFor, StWhile, StWhen, StReturn, StBreak]


@dataclass(frozen=True)
class EnumLiteral:
    name: str
    comment: Optional[str] = None


@dataclass(frozen=True)
class AstClass:
    name: str
    restriction: Restriction
    partial: bool = False
    encapsulated: bool = False
    final: bool = False
    replaceable: bool = False
    redeclare: bool = False
    extends_clauses: tuple[ExtendsClause, ...] = ()
    imports: tuple[Import, ...] = ()
    components: tuple[Component, ...] = ()
    nested_classes: tuple["AstClass", ...] = ()
    equations: tuple[Equation, ...] = ()
    initial_equations: tuple[Equation, ...] = ()
    algorithms: tuple[tuple[Statement, ...], ...] = ()
    initial_algorithms: tuple[tuple[Statement, ...], ...] = ()
    enum_literals: tuple[EnumLiteral, ...] = ()
    # short class definition:  type T = Base[n](m=...)
    alias_target: Optional[str] = None
    alias_subscripts: tuple[Expr | Colon, ...] = ()
    alias_modification: Modification = Modification()
    annotation: Optional[Modification] = None
    comment: Optional[str] = None
    span: Span = _span_field()

    def is_short_class(self) -> bool:
        return self.alias_target is not None


@dataclass(frozen=True)
class StoredDefinition:
    within: Optional[str] = None  # None: no clause; '': 'within;'
    classes: tuple[AstClass, ...] = ()
    span: Span = _span_field()
