"""Flattening: instance tree -> flat variable/equation set.

Rewrites equations over dotted flat names, unrolls for-equations over
constant ranges, resolves constant if-equations, and expands connect sets
into pairwise-equal potentials plus one zero-sum flow equation per set.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..diagnostics import (
    SEM_CONNECT_MISMATCH,
    SEM_EVAL_ERROR,
    SEM_NONCONSTANT_FOR_RANGE,
    Diagnostic,
    Severity,
)
from ..syntax import tree as ast
from ..syntax.printer import print_expr
from .evaluate import EvalError, Evaluator, Scope
from .instantiate import InstanceNode, InstanceTree
from .values import Value

_VAR_ORDER = {"constant": 3, "parameter": 2, "discrete": 1, "continuous": 0}


@dataclass(frozen=True)
class FlatVariable:
    name: str
    base_type: str  # Real, Integer, Boolean, String, or an enum qname
    variability: ast.Variability
    causality: ast.Causality
    is_flow: bool = False
    start: Optional[Value] = None
    binding: Optional[str] = None
    unit: Optional[str] = None
    value: Optional[Value] = None  # evaluated, for parameters and constants

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "baseType": self.base_type,
            "variability": self.variability.value,
            "causality": self.causality.value,
        }
        if self.is_flow:
            out["flow"] = True
        if self.start is not None:
            out["start"] = self.start
        if self.binding is not None:
            out["binding"] = self.binding
        if self.unit:
            out["unit"] = self.unit
        if self.value is not None:
            out["value"] = self.value
        return out


@dataclass(frozen=True)
class FlatEquation:
    lhs: ast.Expr
    rhs: ast.Expr
    kind: str = "equality"  # 'equality' | 'when' (unsupported downstream)

    def text(self) -> str:
        return f"{print_expr(self.lhs)} = {print_expr(self.rhs)}"


@dataclass
class FlatModel:
    name: str
    variables: list[FlatVariable] = field(default_factory=list)
    equations: list[FlatEquation] = field(default_factory=list)
    when_texts: list[str] = field(default_factory=list)

    def variable(self, name: str) -> Optional[FlatVariable]:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def continuous_unknowns(self) -> list[FlatVariable]:
        return [v for v in self.variables
                if v.variability is ast.Variability.CONTINUOUS
                and not (v.causality is ast.Causality.INPUT and "." not in v.name)]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "variables": [v.to_json() for v in self.variables],
            "equations": [eq.text() for eq in self.equations],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FlatModel":
        """Rebuild a flat model from its JSON document (the causalizer's
        accepted input format); equation strings reparse via the grammar."""
        variables = [
            FlatVariable(
                name=v["name"],
                base_type=v.get("baseType", "Real"),
                variability=ast.Variability(v.get("variability", "continuous")),
                causality=ast.Causality(v.get("causality", "none")),
                is_flow=bool(v.get("flow", False)),
                start=v.get("start"),
                binding=v.get("binding"),
                unit=v.get("unit"),
                value=v.get("value"),
            )
            for v in doc.get("variables", [])
        ]
        equations = [_parse_equation_text(text) for text in doc.get("equations", [])]
        return cls(name=doc.get("name", "<flat>"), variables=variables,
                   equations=equations)


def flatten(itree: InstanceTree) -> tuple[FlatModel, list[Diagnostic]]:
    f = _Flattener(itree)
    return f.run()


class _Flattener:
    def __init__(self, itree: InstanceTree):
        self.itree = itree
        self.evaluator: Evaluator = _shared_evaluator(itree)
        self.diags: list[Diagnostic] = []
        self.model = FlatModel(name=itree.root_class)
        self.connects: list[tuple[InstanceNode, InstanceNode, bool, bool]] = []

    def run(self) -> tuple[FlatModel, list[Diagnostic]]:
        self._collect_variables(self.itree.root)
        self._collect_equations(self.itree.root)
        self._expand_connect_sets()
        return self.model, self.diags

    # -- variables -------------------------------------------------------------

    def _collect_variables(self, node: InstanceNode) -> None:
        for sub in node.walk():
            if not sub.is_leaf():
                continue
            unit = sub.attributes.get("unit")
            start = sub.attributes.get("start")
            rank = _VAR_ORDER[sub.variability.value]
            value = sub.evaluated if rank >= 2 else None
            binding = None
            if sub.binding is not None:
                try:
                    binding = print_expr(self._rewrite(sub.binding, sub.parent or sub))
                except _RewriteError:
                    binding = print_expr(sub.binding)
            self.model.variables.append(FlatVariable(
                name=sub.path or sub.name,
                base_type=sub.builtin or "Real",
                variability=sub.variability,
                causality=sub.causality,
                is_flow=sub.flow_prefix == "flow",
                start=start,
                binding=binding,
                unit=unit if isinstance(unit, str) and unit else None,
                value=value,
            ))

    # -- equations -------------------------------------------------------------

    def _collect_equations(self, node: InstanceNode) -> None:
        for sub in node.walk():
            for eq in sub.equations:
                self._lower_equation(eq, sub, {})
            # bindings of continuous leaves become equations
            if (sub.is_leaf() and sub.binding is not None
                    and _VAR_ORDER[sub.variability.value] < 2):
                try:
                    rhs = self._rewrite(sub.binding, sub.parent or sub)
                except _RewriteError as exc:
                    self._err(exc.code, f"in binding of '{sub.path}': {exc}", sub)
                    continue
                lhs = _flat_ref(sub.path)
                self.model.equations.append(FlatEquation(lhs=lhs, rhs=rhs))

    def _lower_equation(self, eq: ast.Equation, node: InstanceNode,
                        iters: dict[str, Value]) -> None:
        if isinstance(eq, ast.EqEquality):
            try:
                lhs = self._rewrite(eq.lhs, node, iters)
                rhs = self._rewrite(eq.rhs, node, iters)
            except _RewriteError as exc:
                self._err(exc.code, str(exc), node, eq.span)
                return
            self._emit_scalarized(lhs, rhs, node)
            return
        if isinstance(eq, ast.EqConnect):
            self._register_connect(eq, node)
            return
        if isinstance(eq, ast.EqFor):
            self._unroll_for(eq, node, iters)
            return
        if isinstance(eq, ast.EqIf):
            scope = Scope(node=node, iterators=dict(iters))
            for cond, body in eq.branches:
                try:
                    value = self.evaluator.eval(cond, scope)
                except EvalError as exc:
                    self._err(SEM_EVAL_ERROR,
                              f"if-equation condition is not constant: {exc}", node, eq.span)
                    return
                if value is True:
                    for sub_eq in body:
                        self._lower_equation(sub_eq, node, iters)
                    return
                if value is not False:
                    self._err(SEM_EVAL_ERROR, "if-equation condition is not Boolean",
                              node, eq.span)
                    return
            for sub_eq in eq.orelse:
                self._lower_equation(sub_eq, node, iters)
            return
        if isinstance(eq, ast.EqWhen):
            # carried through for diagnostics; the twin lowering rejects these
            self.model.when_texts.append(f"when in {node.path or '<root>'}")
            self.model.equations.append(FlatEquation(
                lhs=_flat_ref("<when>"), rhs=_flat_ref("<when>"), kind="when"))
            return
        if isinstance(eq, ast.EqCall):
            try:
                rewritten = self._rewrite(eq.call, node, iters)
            except _RewriteError as exc:
                self._err(exc.code, str(exc), node, eq.span)
                return
            self.model.equations.append(FlatEquation(lhs=rewritten, rhs=ast.BoolLit(True),
                                                     kind="call"))
            return
        raise TypeError(f"unhandled equation {type(eq).__name__}")

    def _emit_scalarized(self, lhs: ast.Expr, rhs: ast.Expr, node: InstanceNode) -> None:
        """Split array-valued equalities between flat refs into per-element ones."""
        lhs_node = self._array_node_of(lhs)
        if lhs_node is not None:
            elems = [c.name for c in lhs_node.children]
            for i, elem_name in enumerate(elems, start=1):
                self.model.equations.append(FlatEquation(
                    lhs=_flat_ref(_element_path(lhs_node, elem_name)),
                    rhs=_indexed_expr(rhs, i)))
            return
        # der(x) = expr over a whole array state
        if isinstance(lhs, ast.Call) and lhs.callee.dotted() == "der" and len(lhs.args) == 1:
            arg_node = self._array_node_of(lhs.args[0])
            if arg_node is not None:
                for i, child in enumerate(arg_node.children, start=1):
                    der = ast.Call(callee=lhs.callee, args=(_flat_ref(child.path),))
                    self.model.equations.append(FlatEquation(
                        lhs=der, rhs=_indexed_expr(rhs, i)))
                return
        self.model.equations.append(FlatEquation(lhs=lhs, rhs=rhs))

    def _array_node_of(self, expr: ast.Expr) -> Optional[InstanceNode]:
        if not isinstance(expr, ast.Ref) or any(p.subscripts for p in expr.parts):
            return None
        node = self.itree.find(expr.dotted())
        if node is not None and node.is_array and len(node.dimensions) == 1:
            return node
        return None

    def _unroll_for(self, eq: ast.EqFor, node: InstanceNode, iters: dict[str, Value]) -> None:
        def recurse(idx: int, bound: dict[str, Value]) -> None:
            if idx == len(eq.iterators):
                for sub_eq in eq.body:
                    self._lower_equation(sub_eq, node, bound)
                return
            it = eq.iterators[idx]
            if it.domain is None:
                self._err(SEM_NONCONSTANT_FOR_RANGE,
                          f"for-iterator '{it.name}' needs an explicit range", node, eq.span)
                return
            try:
                domain = self.evaluator.eval(it.domain, Scope(node=node, iterators=dict(bound)))
            except EvalError as exc:
                self._err(SEM_NONCONSTANT_FOR_RANGE,
                          f"for-range of '{it.name}' is not constant: {exc}", node, eq.span)
                return
            if not isinstance(domain, list):
                self._err(SEM_NONCONSTANT_FOR_RANGE,
                          f"for-range of '{it.name}' is not an array", node, eq.span)
                return
            for v in domain:
                recurse(idx + 1, {**bound, it.name: v})

        recurse(0, dict(iters))

    # -- reference rewriting ------------------------------------------------------

    def _rewrite(self, expr: ast.Expr, node: InstanceNode,
                 iters: Optional[dict[str, Value]] = None) -> ast.Expr:
        iters = iters or {}

        def walk(e: ast.Expr) -> ast.Expr:
            if isinstance(e, ast.Ref):
                return self._rewrite_ref(e, node, iters)
            if isinstance(e, ast.Call):
                callee = e.callee  # function names stay symbolic
                return dataclasses.replace(
                    e,
                    args=tuple(walk(a) for a in e.args),
                    named_args=tuple((k, walk(v)) for k, v in e.named_args))
            if isinstance(e, ast.Unary):
                return dataclasses.replace(e, operand=walk(e.operand))
            if isinstance(e, ast.Binary):
                return dataclasses.replace(e, lhs=walk(e.lhs), rhs=walk(e.rhs))
            if isinstance(e, ast.IfExpr):
                return dataclasses.replace(
                    e,
                    branches=tuple((walk(c), walk(v)) for c, v in e.branches),
                    orelse=walk(e.orelse))
            if isinstance(e, ast.RangeExpr):
                return dataclasses.replace(
                    e, start=walk(e.start), stop=walk(e.stop),
                    step=walk(e.step) if e.step is not None else None)
            if isinstance(e, ast.ArrayExpr):
                return dataclasses.replace(e, elements=tuple(walk(el) for el in e.elements))
            if isinstance(e, ast.MatrixExpr):
                return dataclasses.replace(
                    e, rows=tuple(tuple(walk(el) for el in row) for row in e.rows))
            if isinstance(e, ast.TupleExpr):
                return dataclasses.replace(
                    e, elements=tuple(walk(el) if el is not None else None
                                      for el in e.elements))
            return e

        return walk(expr)

    def _rewrite_ref(self, ref: ast.Ref, node: InstanceNode, iters: dict[str, Value]) -> ast.Expr:
        first = ref.parts[0].name
        if first in iters and len(ref.parts) == 1 and not ref.parts[0].subscripts:
            return _value_literal(iters[first])
        if first == "time" and len(ref.parts) == 1:
            return ref
        if first == "der":
            pass  # not a reference; appears only as Call callee

        # locate the referenced instance node, walking up enclosing scopes
        base = node
        while base is not None and base.child(first) is None:
            base = base.parent
        if base is None:
            # try constant evaluation (class constants, enum literals)
            try:
                value = self.evaluator.eval(ref, Scope(node=node, iterators=dict(iters)))
                return _value_literal(value)
            except EvalError as exc:
                raise _RewriteError(SEM_EVAL_ERROR,
                                    f"cannot resolve '{ref.dotted()}' in '{node.path or '<root>'}': {exc}")

        cur = base
        flat_parts: list[str] = []
        for i, part in enumerate(ref.parts):
            child = cur.child(part.name)
            if child is None:
                raise _RewriteError(SEM_EVAL_ERROR,
                                    f"'{cur.path or '<root>'}' has no member '{part.name}'")
            segment = part.name
            cur = child
            if part.subscripts:
                idx: list[int] = []
                for k, s in enumerate(part.subscripts):
                    try:
                        dim = cur.dimensions[k] if k < len(cur.dimensions) else None
                        value = self.evaluator._eval_with_end(
                            _substitute_iters(s, iters), dim,
                            Scope(node=node, iterators=dict(iters)))
                    except EvalError as exc:
                        raise _RewriteError(SEM_EVAL_ERROR,
                                            f"subscript of '{part.name}' is not constant: {exc}")
                    if isinstance(value, bool) or not isinstance(value, int):
                        raise _RewriteError(SEM_EVAL_ERROR,
                                            f"subscript of '{part.name}' must be an Integer")
                    idx.append(value)
                segment = part.name + "[" + ",".join(str(v) for v in idx) + "]"
                elem = cur.child(segment)
                if elem is None:
                    raise _RewriteError(SEM_EVAL_ERROR,
                                        f"index {idx} out of range for '{cur.path}'")
                cur = elem
            flat_parts.append(segment)

        if _VAR_ORDER[cur.variability.value] >= 2 and cur.evaluated is not None \
                and not isinstance(cur.evaluated, list):
            # constants and evaluated scalar parameters keep their symbolic name;
            # the causalizer reads values from the variable table
            pass
        return _flat_ref(cur.path)

    # -- connect sets ---------------------------------------------------------------

    def _register_connect(self, eq: ast.EqConnect, node: InstanceNode) -> None:
        a = self._connector_endpoint(eq.a, node, eq)
        b = self._connector_endpoint(eq.b, node, eq)
        if a is None or b is None:
            return
        a_node, a_outside = a
        b_node, b_outside = b
        self.connects.append((a_node, b_node, a_outside, b_outside))

    def _connector_endpoint(self, ref: ast.Ref, node: InstanceNode, eq: ast.EqConnect):
        base = node
        while base is not None and base.child(ref.parts[0].name) is None:
            base = base.parent
        if base is None:
            self._err(SEM_CONNECT_MISMATCH,
                      f"connect endpoint '{ref.dotted()}' not found", node, eq.span)
            return None
        cur = base
        for part in ref.parts:
            child = cur.child(part.name)
            if child is None:
                self._err(SEM_CONNECT_MISMATCH,
                          f"connect endpoint '{ref.dotted()}' not found", node, eq.span)
                return None
            cur = child
            if part.subscripts:
                idx = []
                for k, s in enumerate(part.subscripts):
                    try:
                        dim = cur.dimensions[k] if k < len(cur.dimensions) else None
                        value = self.evaluator._eval_with_end(s, dim, Scope(node=node))
                    except EvalError as exc:
                        self._err(SEM_CONNECT_MISMATCH,
                                  f"connect subscript is not constant: {exc}", node, eq.span)
                        return None
                    idx.append(value)
                elem = cur.child(part.name + "[" + ",".join(str(v) for v in idx) + "]")
                if elem is None:
                    self._err(SEM_CONNECT_MISMATCH,
                              f"connect index out of range for '{cur.path}'", node, eq.span)
                    return None
                cur = elem
        # an endpoint with a single part is the node's own boundary connector
        outside = len(ref.parts) == 1
        return cur, outside

    def _expand_connect_sets(self) -> None:
        parent: dict[str, str] = {}
        nodes_by_path: dict[str, InstanceNode] = {}
        roles: dict[str, set[bool]] = {}  # path -> {False: inside, True: outside}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(x: str, y: str) -> None:
            rx, ry = find(x), find(y)
            if rx != ry:
                parent[max(rx, ry)] = min(rx, ry)

        for a_node, b_node, a_out, b_out in self.connects:
            for n, out in ((a_node, a_out), (b_node, b_out)):
                key = n.path
                if key not in parent:
                    parent[key] = key
                    nodes_by_path[key] = n
                    roles[key] = set()
                roles[key].add(out)
            union(a_node.path, b_node.path)

        groups: dict[str, list[str]] = {}
        for key in parent:
            groups.setdefault(find(key), []).append(key)

        flow_connected: set[str] = set()
        for root_key in sorted(groups):
            members = sorted(groups[root_key])
            shapes = [_connector_shape(nodes_by_path[k]) for k in members]
            if len({tuple(s) for s in shapes}) > 1:
                self._err(SEM_CONNECT_MISMATCH,
                          f"connected connectors have different structure: {members}",
                          self.itree.root)
                continue
            shape = shapes[0]
            for rel_path, is_flow in shape:
                if is_flow:
                    # a connector that is both inside (from the enclosing scope)
                    # and outside (from its own class) passes flow through: net 0
                    signed: list[tuple[int, ast.Expr]] = []
                    for key in members:
                        leaf = _descend(nodes_by_path[key], rel_path)
                        if leaf is None:
                            continue
                        flow_connected.add(leaf.path)
                        coefficient = (1 if False in roles[key] else 0) \
                            - (1 if True in roles[key] else 0)
                        if coefficient == 0:
                            continue
                        signed.append((coefficient, _flat_ref(leaf.path)))
                    if not signed:
                        continue
                    coeff0, term0 = signed[0]
                    total: ast.Expr = term0 if coeff0 > 0 else ast.Unary(op="-", operand=term0)
                    for coeff, term in signed[1:]:
                        total = ast.Binary(op="+" if coeff > 0 else "-", lhs=total, rhs=term)
                    self.model.equations.append(FlatEquation(lhs=total, rhs=ast.RealLit(0.0)))
                else:
                    leaves = [_descend(nodes_by_path[k], rel_path) for k in members]
                    leaves = [l for l in leaves if l is not None]
                    for la, lb in zip(leaves, leaves[1:]):
                        self.model.equations.append(FlatEquation(
                            lhs=_flat_ref(la.path), rhs=_flat_ref(lb.path)))

        # unconnected flow variables are forced to zero
        for v in self.model.variables:
            if v.is_flow and v.name not in flow_connected \
                    and v.variability is ast.Variability.CONTINUOUS:
                self.model.equations.append(FlatEquation(
                    lhs=_flat_ref(v.name), rhs=ast.RealLit(0.0)))

    def _err(self, code: str, message: str, node: InstanceNode,
             span: tuple[int, int] = (0, 0)) -> None:
        self.diags.append(Diagnostic("<flatten>", span[0], span[1], Severity.ERROR,
                                     code, message))


class _RewriteError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def _parse_equation_text(text: str) -> FlatEquation:
    from ..syntax import parse

    wrapper = f"model __flat__ equation {text}; end __flat__;"
    tree, diags = parse(wrapper, "<flat-json>")
    stored = tree.root.ast
    equations = stored.classes[0].equations if stored.classes else ()
    if diags or len(equations) != 1 or not isinstance(equations[0], ast.EqEquality):
        raise ValueError(f"cannot parse flat equation {text!r}")
    eq = equations[0]
    return FlatEquation(lhs=eq.lhs, rhs=eq.rhs)


def _shared_evaluator(itree: InstanceTree) -> Evaluator:
    if getattr(itree, "evaluator", None) is not None:
        return itree.evaluator
    from .instantiate import Instantiator

    return Instantiator(itree.class_tree).evaluator


def _flat_ref(name: str) -> ast.Ref:
    """Parse an instance path like a.m[1,2].v into a proper multi-part Ref."""
    parts = []
    for segment in name.split("."):
        if "[" in segment:
            base, inner = segment.split("[", 1)
            indices = tuple(ast.IntLit(int(p)) for p in inner.rstrip("]").split(",") if p)
            parts.append(ast.RefPart(base, indices))
        else:
            parts.append(ast.RefPart(segment, ()))
    return ast.Ref(parts=tuple(parts))


def _element_path(array_node: InstanceNode, elem_name: str) -> str:
    if array_node.parent is not None and array_node.parent.path:
        return f"{array_node.parent.path}.{elem_name}"
    return elem_name


def _indexed_expr(expr: ast.Expr, i: int) -> ast.Expr:
    if isinstance(expr, ast.ArrayExpr) and len(expr.elements) >= i and not expr.iterators:
        return expr.elements[i - 1]
    if isinstance(expr, ast.Ref):
        last = expr.parts[-1]
        if "[" not in last.name:
            return ast.Ref(parts=expr.parts[:-1] + (
                ast.RefPart(f"{last.name}[{i}]", ()),), global_=expr.global_)
    return ast.Call(callee=ast.Ref(parts=(ast.RefPart("__index__", ()),)),
                    args=(expr, ast.IntLit(i)))


def _substitute_iters(expr: ast.Expr, iters: dict[str, Value]) -> ast.Expr:
    if not iters:
        return expr

    def walk(e: ast.Expr) -> ast.Expr:
        if isinstance(e, ast.Ref) and len(e.parts) == 1 and not e.parts[0].subscripts \
                and e.parts[0].name in iters:
            return _value_literal(iters[e.parts[0].name])
        if isinstance(e, ast.Binary):
            return dataclasses.replace(e, lhs=walk(e.lhs), rhs=walk(e.rhs))
        if isinstance(e, ast.Unary):
            return dataclasses.replace(e, operand=walk(e.operand))
        if isinstance(e, ast.Call):
            return dataclasses.replace(e, args=tuple(walk(a) for a in e.args))
        return e

    return walk(expr)


def _value_literal(value: Value) -> ast.Expr:
    if isinstance(value, bool):
        return ast.BoolLit(value)
    if isinstance(value, int):
        return ast.IntLit(value)
    if isinstance(value, float):
        return ast.RealLit(value)
    if isinstance(value, str):
        return ast.StringLit(value)
    if isinstance(value, list):
        return ast.ArrayExpr(elements=tuple(_value_literal(v) for v in value))
    raise _RewriteError(SEM_EVAL_ERROR, f"cannot inline value {value!r}")


def _connector_shape(node: InstanceNode) -> list[tuple[tuple[str, ...], bool]]:
    """Leaf layout of a connector node: (relative path, is_flow) pairs."""
    out: list[tuple[tuple[str, ...], bool]] = []

    def walk(n: InstanceNode, rel: tuple[str, ...]) -> None:
        if n.is_leaf():
            out.append((rel, n.flow_prefix == "flow"))
            return
        for c in n.children:
            walk(c, rel + (c.name,))

    walk(node, ())
    return out


def _descend(node: InstanceNode, rel_path: tuple[str, ...]) -> Optional[InstanceNode]:
    cur = node
    for name in rel_path:
        nxt = cur.child(name)
        if nxt is None:
            return None
        cur = nxt
    return cur
