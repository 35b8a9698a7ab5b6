"""Pretty-printer from AST back to Modelica text.

Comments and layout from the original source are not preserved; the contract
is that the printed text re-lowers to a structurally equal AST.
"""
from __future__ import annotations

import re

from .lexer import KEYWORDS, escape_string
from . import tree as ast

INDENT = "  "

_PLAIN_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_CALLABLE_KEYWORDS = frozenset(["der", "initial"])  # usable as reference heads


def ident(name: str) -> str:
    """Quote identifiers that are not plain Modelica names."""
    if _PLAIN_IDENT.match(name) and (name not in KEYWORDS or name in _CALLABLE_KEYWORDS):
        return name
    body = name.replace("\\", "\\\\").replace("'", "\\'")
    return f"'{body}'"


def qname(dotted: str) -> str:
    return ".".join(ident(p) for p in dotted.split("."))

# precedence levels (higher binds tighter), mirrors the expression grammar:
# if-expr < range < or < and < not < relation < add < mul < power < atom
_PREC = {
    "or": 20, "and": 30,
    "<": 50, "<=": 50, ">": 50, ">=": 50, "==": 50, "<>": 50,
    "+": 60, "-": 60, ".+": 60, ".-": 60,
    "*": 70, "/": 70, ".*": 70, "./": 70,
    "^": 90, ".^": 90,
}
# relations and power are non-associative; ^ operands are primaries
_NONASSOC = frozenset(["<", "<=", ">", ">=", "==", "<>"])
_POWER = frozenset(["^", ".^"])
_RANGE_PREC = 10
_NEG_PREC = 55  # a negated term: legal only as the head of an additive chain


def print_stored_definition(sd: ast.StoredDefinition) -> str:
    out: list[str] = []
    if sd.within is not None:
        out.append(f"within {sd.within};" if sd.within else "within;")
        out.append("")
    for cls in sd.classes:
        out.append(print_class(cls, 0) + ";")
    return "\n".join(out) + "\n"


def print_class(cls: ast.AstClass, depth: int) -> str:
    pad = INDENT * depth
    prefix = pad
    if cls.final and depth == 0:
        prefix += "final "
    if cls.encapsulated:
        prefix += "encapsulated "
    if cls.partial:
        prefix += "partial "
    kw = cls.restriction.value

    if cls.enum_literals:
        lits = ", ".join(
            ident(lit.name) + (f' "{_esc_inline(lit.comment)}"' if lit.comment else "")
            for lit in cls.enum_literals
        )
        return f"{prefix}type {ident(cls.name)} = enumeration({lits}){_comment(cls.comment)}"

    if cls.is_short_class():
        subs = _subscripts(cls.alias_subscripts)
        mod = _class_modification(cls.alias_modification)
        return (f"{prefix}{kw} {ident(cls.name)} = {qname(cls.alias_target)}{subs}{mod}"
                f"{_comment(cls.comment)}{_annotation_suffix(cls.annotation)}")

    lines = [f"{prefix}{kw} {ident(cls.name)}{_comment(cls.comment)}"]
    body_pad = INDENT * (depth + 1)
    for imp in cls.imports:
        lines.append(body_pad + print_import(imp) + ";")
    for ext in cls.extends_clauses:
        lines.append(body_pad + print_extends(ext) + ";")
    for nested in cls.nested_classes:
        lines.append(print_class(nested, depth + 1) + ";")
    for comp in cls.components:
        lines.append(body_pad + print_component(comp) + ";")
    if cls.initial_equations:
        lines.append(pad + "initial equation")
        lines.extend(print_equation(eq, depth + 1) for eq in cls.initial_equations)
    if cls.equations:
        lines.append(pad + "equation")
        lines.extend(print_equation(eq, depth + 1) for eq in cls.equations)
    for block in cls.initial_algorithms:
        lines.append(pad + "initial algorithm")
        lines.extend(print_statement(st, depth + 1) for st in block)
    for block in cls.algorithms:
        lines.append(pad + "algorithm")
        lines.extend(print_statement(st, depth + 1) for st in block)
    if cls.annotation is not None:
        lines.append(body_pad + "annotation " + _class_modification(cls.annotation) + ";")
    lines.append(f"{pad}end {ident(cls.name)}")
    return "\n".join(lines)


def print_import(imp: ast.Import) -> str:
    if imp.alias:
        return f"import {ident(imp.alias)} = {qname(imp.name)}"
    if imp.wildcard:
        return f"import {qname(imp.name)}.*"
    if imp.selection:
        return f"import {qname(imp.name)}.{{{', '.join(ident(s) for s in imp.selection)}}}"
    return f"import {qname(imp.name)}"


def print_extends(ext: ast.ExtendsClause) -> str:
    return f"extends {qname(ext.base_name)}{_class_modification(ext.modification)}"


def print_component(comp: ast.Component) -> str:
    words: list[str] = []
    if comp.redeclare:
        words.append("redeclare")
    if comp.final:
        words.append("final")
    if comp.replaceable:
        words.append("replaceable")
    if comp.flow_prefix:
        words.append(comp.flow_prefix)
    if comp.variability is not None and comp.variability is not ast.Variability.CONTINUOUS:
        words.append(comp.variability.value)
    if comp.causality is not ast.Causality.NONE:
        words.append(comp.causality.value)
    words.append(qname(comp.type_name))
    decl = ident(comp.name) + _subscripts(comp.array_subscripts) + _modification(comp.modification)
    if comp.condition is not None:
        decl += " if " + print_expr(comp.condition)
    words.append(decl)
    return " ".join(words) + _comment(comp.comment) + _annotation_suffix(comp.annotation)


def print_equation(eq: ast.Equation, depth: int) -> str:
    pad = INDENT * depth
    if isinstance(eq, ast.EqEquality):
        return f"{pad}{print_expr(eq.lhs)} = {print_expr(eq.rhs)};"
    if isinstance(eq, ast.EqConnect):
        return f"{pad}connect({print_expr(eq.a)}, {print_expr(eq.b)});"
    if isinstance(eq, ast.EqFor):
        head = ", ".join(_iterator(it) for it in eq.iterators)
        body = "\n".join(print_equation(sub, depth + 1) for sub in eq.body)
        return f"{pad}for {head} loop\n{body}\n{pad}end for;"
    if isinstance(eq, ast.EqIf):
        parts = []
        for i, (cond, body) in enumerate(eq.branches):
            kw = "if" if i == 0 else "elseif"
            parts.append(f"{pad}{kw} {print_expr(cond)} then")
            parts.extend(print_equation(sub, depth + 1) for sub in body)
        if eq.orelse:
            parts.append(f"{pad}else")
            parts.extend(print_equation(sub, depth + 1) for sub in eq.orelse)
        parts.append(f"{pad}end if;")
        return "\n".join(parts)
    if isinstance(eq, ast.EqWhen):
        parts = []
        for i, (cond, body) in enumerate(eq.branches):
            kw = "when" if i == 0 else "elsewhen"
            parts.append(f"{pad}{kw} {print_expr(cond)} then")
            parts.extend(print_equation(sub, depth + 1) for sub in body)
        parts.append(f"{pad}end when;")
        return "\n".join(parts)
    if isinstance(eq, ast.EqCall):
        return f"{pad}{print_expr(eq.call)};"
    raise TypeError(f"unknown equation node {type(eq).__name__}")


def print_statement(st: ast.Statement, depth: int) -> str:
    pad = INDENT * depth
    if isinstance(st, ast.StAssign):
        return f"{pad}{print_expr(st.target)} := {print_expr(st.value)};"
    if isinstance(st, ast.StCall):
        return f"{pad}{print_expr(st.call)};"
    if isinstance(st, ast.StIf):
        parts = []
        for i, (cond, body) in enumerate(st.branches):
            kw = "if" if i == 0 else "elseif"
            parts.append(f"{pad}{kw} {print_expr(cond)} then")
            parts.extend(print_statement(sub, depth + 1) for sub in body)
        if st.orelse:
            parts.append(f"{pad}else")
            parts.extend(print_statement(sub, depth + 1) for sub in st.orelse)
        parts.append(f"{pad}end if;")
        return "\n".join(parts)
    if isinstance(st, ast.StFor):
        head = ", ".join(_iterator(it) for it in st.iterators)
        body = "\n".join(print_statement(sub, depth + 1) for sub in st.body)
        return f"{pad}for {head} loop\n{body}\n{pad}end for;"
    if isinstance(st, ast.StWhile):
        body = "\n".join(print_statement(sub, depth + 1) for sub in st.body)
        return f"{pad}while {print_expr(st.condition)} loop\n{body}\n{pad}end while;"
    if isinstance(st, ast.StWhen):
        parts = []
        for i, (cond, body) in enumerate(st.branches):
            kw = "when" if i == 0 else "elsewhen"
            parts.append(f"{pad}{kw} {print_expr(cond)} then")
            parts.extend(print_statement(sub, depth + 1) for sub in body)
        parts.append(f"{pad}end when;")
        return "\n".join(parts)
    if isinstance(st, ast.StReturn):
        return f"{pad}return;"
    if isinstance(st, ast.StBreak):
        return f"{pad}break;"
    raise TypeError(f"unknown statement node {type(st).__name__}")


def print_expr(e: ast.Expr, parent_prec: int = 0) -> str:
    text, prec = _expr(e)
    if prec < parent_prec:
        return f"({text})"
    return text


def _expr(e: ast.Expr) -> tuple[str, int]:
    if isinstance(e, ast.IntLit):
        return str(e.value), 200
    if isinstance(e, ast.RealLit):
        return format_real(e.value), 200
    if isinstance(e, ast.StringLit):
        return escape_string(e.value), 200
    if isinstance(e, ast.BoolLit):
        return "true" if e.value else "false", 200
    if isinstance(e, ast.Ref):
        prefix = "." if e.global_ else ""
        return prefix + ".".join(ident(p.name) + _subscripts(p.subscripts) for p in e.parts), 200
    if isinstance(e, ast.Call):
        if e.callee.dotted() == "__index__" and e.args:
            base = print_expr(e.args[0], 200)
            subs = ", ".join(print_expr(a) for a in e.args[1:])
            return f"{base}[{subs}]", 200
        inner: list[str] = [print_expr(a) for a in e.args]
        inner.extend(f"{ident(k)} = {print_expr(v)}" for k, v in e.named_args)
        text = ", ".join(inner)
        if e.iterators:
            text += " for " + ", ".join(_iterator(it) for it in e.iterators)
        callee, _ = _expr(e.callee)
        return f"{callee}({text})", 200
    if isinstance(e, ast.Unary):
        if e.op == "not":
            return f"not {print_expr(e.operand, 50)}", 35
        return f"-{print_expr(e.operand, 70)}", _NEG_PREC
    if isinstance(e, ast.Binary):
        prec = _PREC[e.op]
        if e.op in _POWER:
            lhs = print_expr(e.lhs, 100)
            rhs = print_expr(e.rhs, 100)
        elif e.op in _NONASSOC:
            lhs = print_expr(e.lhs, prec + 1)
            rhs = print_expr(e.rhs, prec + 1)
        else:
            lhs = print_expr(e.lhs, prec)
            rhs = print_expr(e.rhs, prec + 1)  # left-associative
        return f"{lhs} {e.op} {rhs}", prec
    if isinstance(e, ast.IfExpr):
        parts = []
        for i, (cond, val) in enumerate(e.branches):
            kw = "if" if i == 0 else "elseif"
            parts.append(f"{kw} {print_expr(cond)} then {print_expr(val)}")
        parts.append(f"else {print_expr(e.orelse)}")
        return " ".join(parts), 0
    if isinstance(e, ast.RangeExpr):
        if e.step is not None:
            text = (f"{print_expr(e.start, 20)}:{print_expr(e.step, 20)}"
                    f":{print_expr(e.stop, 20)}")
        else:
            text = f"{print_expr(e.start, 20)}:{print_expr(e.stop, 20)}"
        return text, _RANGE_PREC
    if isinstance(e, ast.ArrayExpr):
        text = ", ".join(print_expr(el) for el in e.elements)
        if e.iterators:
            text += " for " + ", ".join(_iterator(it) for it in e.iterators)
        return "{" + text + "}", 200
    if isinstance(e, ast.MatrixExpr):
        rows = "; ".join(", ".join(print_expr(el) for el in row) for row in e.rows)
        return f"[{rows}]", 200
    if isinstance(e, ast.TupleExpr):
        return "(" + ", ".join("" if el is None else print_expr(el) for el in e.elements) + ")", 200
    if isinstance(e, ast.EndExpr):
        return "end", 200
    raise TypeError(f"unknown expression node {type(e).__name__}")


def format_real(value: float) -> str:
    """Shortest decimal form that round-trips, always with a Real marker."""
    if value != value or value in (float("inf"), float("-inf")):
        return repr(value)  # not expressible in Modelica source; printed for debugging
    text = repr(value)
    if "." not in text and "e" not in text and "E" not in text:
        text += ".0"
    return text


def _subscripts(subs) -> str:
    if not subs:
        return ""
    inner = ",".join(":" if isinstance(s, ast.Colon) else print_expr(s) for s in subs)
    return f"[{inner}]"


def _modification(mod: ast.Modification) -> str:
    if mod.is_empty():
        return ""
    text = ""
    if mod.submods or mod.redeclarations:
        text += _class_modification(mod)
    if mod.binding is not None:
        text += " = " + print_expr(mod.binding)
    return text


def _class_modification(mod: ast.Modification) -> str:
    if not mod.submods and not mod.redeclarations:
        return ""
    args: list[str] = []
    for redecl in mod.redeclarations:
        import dataclasses

        words = ["redeclare"]
        if redecl.each:
            words.append("each")
        if redecl.final:
            words.append("final")
        if redecl.replaceable:
            words.append("replaceable")
        if redecl.component is not None:
            bare = dataclasses.replace(redecl.component, redeclare=False, final=False,
                                       replaceable=False)
            words.append(print_component(bare))
        elif redecl.short_class is not None:
            bare = dataclasses.replace(redecl.short_class, redeclare=False, replaceable=False)
            words.append(print_class(bare, 0))
        args.append(" ".join(words))
    for name, sub in mod.submods:
        args.append(_submod(name, sub))
    return "(" + ", ".join(args) + ")"


def _submod(name: str, mod: ast.Modification) -> str:
    prefix = ""
    if mod.each:
        prefix += "each "
    if mod.final:
        prefix += "final "
    return prefix + ident(name) + _modification(mod)


def _iterator(it: ast.Iterator) -> str:
    if it.domain is None:
        return ident(it.name)
    return f"{ident(it.name)} in {print_expr(it.domain)}"


def _comment(comment) -> str:
    if not comment:
        return ""
    return f' "{_esc_inline(comment)}"'


def _esc_inline(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def _annotation_suffix(annotation) -> str:
    if annotation is None:
        return ""
    return " annotation " + _class_modification(annotation)
