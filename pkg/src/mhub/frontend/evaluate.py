"""Constant expression evaluation over instance scopes.

Supports the builtin operator/function set (size, ndims, fill, zeros, ones,
sum, min, max, abs, sqrt, exp, log, sin, cos, tan), string concatenation,
relational/logical operators, if-expressions, ranges, 1-based indexing,
record constructors, and user-defined functions whose body is a single
algorithm section. Evaluation is pure; failures raise EvalError.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from ..syntax import tree as ast
from .classtree import BUILTIN_TYPES, ClassTree
from .resolve import ResolveError, resolve
from .values import (
    EnumValue,
    RecordValue,
    Value,
    check_rectangular,
    dimensions_of,
    is_numeric,
)

MAX_CALL_DEPTH = 256

_MATH_FUNCS: dict[str, Callable[[float], float]] = {
    "abs": abs, "sqrt": math.sqrt, "exp": math.exp, "log": math.log,
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
}

_VARIABILITY_RANK = {"constant": 3, "parameter": 2, "discrete": 1, "continuous": 0}


class EvalError(Exception):
    pass


@dataclass
class Scope:
    node: Optional[object] = None  # InstanceNode (duck-typed)
    class_ctx: Optional[str] = None
    iterators: dict[str, Value] = field(default_factory=dict)

    def with_iter(self, name: str, value: Value) -> "Scope":
        iters = dict(self.iterators)
        iters[name] = value
        return Scope(node=self.node, class_ctx=self.class_ctx, iterators=iters)


class Evaluator:
    def __init__(self, class_tree: ClassTree,
                 instantiate_package: Optional[Callable[[str], object]] = None):
        self.tree = class_tree
        self.instantiate_package = instantiate_package
        self._in_progress: set[int] = set()
        self._depth = 0
        # the 256-deep user-function cap needs far more interpreter frames
        import sys

        if sys.getrecursionlimit() < 20000:
            sys.setrecursionlimit(20000)

    # -- entry points ------------------------------------------------------------

    def eval(self, expr: ast.Expr, scope: Scope) -> Value:
        if isinstance(expr, ast.IntLit):
            return expr.value
        if isinstance(expr, ast.RealLit):
            return expr.value
        if isinstance(expr, ast.StringLit):
            return expr.value
        if isinstance(expr, ast.BoolLit):
            return expr.value
        if isinstance(expr, ast.Ref):
            return self._eval_ref(expr, scope)
        if isinstance(expr, ast.Call):
            return self._eval_call(expr, scope)
        if isinstance(expr, ast.Unary):
            return self._eval_unary(expr, scope)
        if isinstance(expr, ast.Binary):
            return self._eval_binary(expr, scope)
        if isinstance(expr, ast.IfExpr):
            for cond, val in expr.branches:
                c = self.eval(cond, scope)
                if not isinstance(c, bool):
                    raise EvalError("if condition is not Boolean")
                if c:
                    return self.eval(val, scope)
            return self.eval(expr.orelse, scope)
        if isinstance(expr, ast.RangeExpr):
            return self._eval_range(expr, scope)
        if isinstance(expr, ast.ArrayExpr):
            return self._eval_array(expr, scope)
        if isinstance(expr, ast.MatrixExpr):
            return [[self.eval(el, scope) for el in row] for row in expr.rows]
        if isinstance(expr, ast.TupleExpr):
            return [self.eval(el, scope) for el in expr.elements if el is not None]
        if isinstance(expr, ast.EndExpr):
            raise EvalError("'end' used outside a subscript")
        raise EvalError(f"cannot evaluate {type(expr).__name__}")

    def ensure_value(self, node) -> Value:
        """Evaluated value of an instance node, computing it on demand."""
        if node.evaluated is not None:
            return node.evaluated
        key = id(node)
        if key in self._in_progress:
            raise EvalError(f"cyclic binding involving '{node.path}'")
        if _VARIABILITY_RANK[node.variability.value] < 2:
            raise EvalError(f"'{node.path or node.name}' is not a constant or parameter")
        self._in_progress.add(key)
        try:
            if node.binding is not None:
                scope_node = node.parent if node.parent is not None else node
                value = self.eval(node.binding, Scope(node=scope_node))
            elif node.is_array:
                value = [self.ensure_value(c) for c in node.children]
            elif node.children:
                value = RecordValue(type_name=node.class_ref,
                                    fields={c.name: self.ensure_value(c) for c in node.children})
            elif "start" in node.attributes:
                value = node.attributes["start"]
            else:
                raise EvalError(f"'{node.path or node.name}' has no value")
        finally:
            self._in_progress.discard(key)
        node.evaluated = value
        return value

    # -- references ----------------------------------------------------------------

    def _eval_ref(self, ref: ast.Ref, scope: Scope) -> Value:
        first = ref.parts[0]
        if not ref.global_ and first.name in scope.iterators and len(ref.parts) == 1:
            value = scope.iterators[first.name]
            return self._apply_subscripts(value, first.subscripts, scope)
        if first.name == "time":
            raise EvalError("'time' is not constant")

        if not ref.global_:
            start_node = self._find_instance(scope.node, first.name)
            if start_node is not None:
                return self._navigate_node(start_node, ref.parts, scope)

        return self._eval_class_path(ref, scope)

    def _find_instance(self, node, name: str):
        cur = node
        while cur is not None:
            found = cur.child(name)
            if found is not None:
                return found
            cur = cur.parent
        return None

    def _navigate_node(self, node, parts, scope: Scope) -> Value:
        value: Optional[Value] = None
        for i, part in enumerate(parts):
            if value is None:
                if i > 0:
                    nxt = node.child(part.name)
                    if nxt is None:
                        value = self.ensure_value(node)
                        value = self._navigate_value(value, parts[i:], scope)
                        return value
                    node = nxt
                if part.subscripts:
                    # prefer element nodes for integral subscripts
                    subs = []
                    for k, s in enumerate(part.subscripts):
                        dim = node.dimensions[k] if k < len(node.dimensions) else None
                        subs.append(self._eval_subscript(s, dim, scope))
                    if all(isinstance(s, int) and not isinstance(s, bool) for s in subs):
                        elem = node.child(part.name + "".join(f"[{s}]" for s in subs))
                        if elem is not None:
                            node = elem
                            continue
                    value = self.ensure_value(node)
                    value = self._index_value(value, list(part.subscripts), scope)
            else:
                value = self._navigate_value(value, parts[i:], scope)
                return value
        if value is None:
            value = self.ensure_value(node)
        return value

    def _navigate_value(self, value: Value, parts, scope: Scope) -> Value:
        for part in parts:
            if isinstance(value, RecordValue):
                if part.name not in value.fields:
                    raise EvalError(f"record '{value.type_name}' has no field '{part.name}'")
                value = value.fields[part.name]
            elif isinstance(value, list) and all(isinstance(el, RecordValue) for el in value):
                # field slicing over an array of records: root.budgetMass
                value = [el.fields[part.name] for el in value
                         if isinstance(el, RecordValue) and part.name in el.fields]
            else:
                raise EvalError(f"cannot select '{part.name}' from a {type(value).__name__}")
            if part.subscripts:
                value = self._index_value(value, list(part.subscripts), scope)
        return value

    def _eval_class_path(self, ref: ast.Ref, scope: Scope) -> Value:
        """Resolve a reference through class scopes: enum literals and
        package constants."""
        names = [p.name for p in ref.parts]
        ctx = scope.class_ctx or self._nearest_class_ctx(scope.node)
        # longest class prefix wins
        for split in range(len(names), 0, -1):
            prefix = ".".join(names[:split])
            try:
                qname = resolve(self.tree, prefix, ctx if not ref.global_ else "")
            except ResolveError:
                continue
            entry = self.tree.get(qname)
            if entry is None:
                continue
            rest = ref.parts[split:]
            if not rest:
                if entry.ast is not None and entry.ast.enum_literals:
                    raise EvalError(f"'{qname}' is an enumeration type, not a value")
                raise EvalError(f"'{qname}' is a class, not a value")
            # enumeration literal
            if entry.ast is not None and entry.ast.enum_literals and len(rest) == 1:
                for i, lit in enumerate(entry.ast.enum_literals, start=1):
                    if lit.name == rest[0].name:
                        return EnumValue(type_name=qname, literal=lit.name, index=i)
                raise EvalError(f"enumeration '{qname}' has no literal '{rest[0].name}'")
            if self.instantiate_package is not None:
                pkg = self.instantiate_package(qname)
                if pkg is not None:
                    start = pkg.child(rest[0].name)
                    if start is not None:
                        return self._navigate_node(start, rest, scope)
            break
        raise EvalError(f"cannot resolve '{'.'.join(names)}'")

    def _nearest_class_ctx(self, node) -> str:
        cur = node
        while cur is not None:
            if cur.class_ref not in BUILTIN_TYPES and self.tree.has(cur.class_ref):
                return cur.class_ref
            cur = cur.parent
        return ""

    # -- subscripts -------------------------------------------------------------------

    def _eval_subscript(self, sub, dim_size: Optional[int], scope: Scope):
        if isinstance(sub, ast.Colon):
            return sub
        return self._eval_with_end(sub, dim_size, scope)

    def _eval_with_end(self, expr: ast.Expr, dim_size: Optional[int], scope: Scope) -> Value:
        if isinstance(expr, ast.EndExpr):
            if dim_size is None:
                raise EvalError("'end' used outside a subscript")
            return dim_size
        if isinstance(expr, ast.Binary):
            lhs = self._eval_with_end(expr.lhs, dim_size, scope)
            rhs = self._eval_with_end(expr.rhs, dim_size, scope)
            return _binary_op(expr.op, lhs, rhs)
        if isinstance(expr, ast.Unary) and expr.op == "-":
            return _negate(self._eval_with_end(expr.operand, dim_size, scope))
        if isinstance(expr, ast.RangeExpr):
            start = self._eval_with_end(expr.start, dim_size, scope)
            stop = self._eval_with_end(expr.stop, dim_size, scope)
            step = self._eval_with_end(expr.step, dim_size, scope) if expr.step is not None else 1
            return _range_values(start, step, stop)
        return self.eval(expr, scope)

    def _index_value(self, value: Value, subscripts: list, scope: Scope) -> Value:
        if not subscripts:
            return value
        sub = subscripts[0]
        rest = subscripts[1:]
        if not isinstance(value, list):
            raise EvalError("indexing a non-array value")
        dim = len(value)
        s = self._eval_subscript(sub, dim, scope)
        if isinstance(s, ast.Colon):
            return [self._index_value(el, rest, scope) for el in value]
        if isinstance(s, list):
            out = []
            for i in s:
                out.append(self._index_value(value[_checked_index(i, dim)], rest, scope))
            return out
        return self._index_value(value[_checked_index(s, dim)], rest, scope)

    def _apply_subscripts(self, value: Value, subscripts, scope: Scope) -> Value:
        if not subscripts:
            return value
        return self._index_value(value, list(subscripts), scope)

    # -- operators ---------------------------------------------------------------------

    def _eval_unary(self, expr: ast.Unary, scope: Scope) -> Value:
        operand = self.eval(expr.operand, scope)
        if expr.op == "not":
            if not isinstance(operand, bool):
                raise EvalError("'not' needs a Boolean")
            return not operand
        return _negate(operand)

    def _eval_binary(self, expr: ast.Binary, scope: Scope) -> Value:
        if expr.op == "and":
            lhs = self.eval(expr.lhs, scope)
            if not isinstance(lhs, bool):
                raise EvalError("'and' needs Booleans")
            if not lhs:
                return False
            rhs = self.eval(expr.rhs, scope)
            if not isinstance(rhs, bool):
                raise EvalError("'and' needs Booleans")
            return rhs
        if expr.op == "or":
            lhs = self.eval(expr.lhs, scope)
            if not isinstance(lhs, bool):
                raise EvalError("'or' needs Booleans")
            if lhs:
                return True
            rhs = self.eval(expr.rhs, scope)
            if not isinstance(rhs, bool):
                raise EvalError("'or' needs Booleans")
            return rhs
        lhs = self.eval(expr.lhs, scope)
        rhs = self.eval(expr.rhs, scope)
        return _binary_op(expr.op, lhs, rhs)

    def _eval_range(self, expr: ast.RangeExpr, scope: Scope) -> Value:
        start = self.eval(expr.start, scope)
        stop = self.eval(expr.stop, scope)
        step = self.eval(expr.step, scope) if expr.step is not None else 1
        return _range_values(start, step, stop)

    def _eval_array(self, expr: ast.ArrayExpr, scope: Scope) -> Value:
        if expr.iterators:
            if len(expr.elements) != 1:
                raise EvalError("array comprehension needs exactly one element expression")
            values = self._iterate(expr.iterators, expr.elements[0], scope)
            return values
        out = [self.eval(el, scope) for el in expr.elements]
        if not check_rectangular(out):
            raise EvalError("array literal is not rectangular")
        return out

    def _iterate(self, iterators, body: ast.Expr, scope: Scope) -> list:
        it = iterators[0]
        if it.domain is None:
            raise EvalError(f"iterator '{it.name}' needs an explicit range")
        domain = self.eval(it.domain, scope)
        if not isinstance(domain, list):
            raise EvalError("iteration domain is not an array")
        out = []
        for v in domain:
            inner = scope.with_iter(it.name, v)
            if len(iterators) > 1:
                out.append(self._iterate(iterators[1:], body, inner))
            else:
                out.append(self.eval(body, inner))
        return out

    # -- calls --------------------------------------------------------------------------

    def _eval_call(self, call: ast.Call, scope: Scope) -> Value:
        name = call.callee.dotted()
        if name == "__index__":
            value = self.eval(call.args[0], scope)
            return self._index_value(value, list(call.args[1:]), scope)
        if call.iterators:
            if name not in ("sum", "min", "max") or len(call.args) != 1:
                raise EvalError(f"reduction form is not supported for '{name}'")
            values = self._iterate(call.iterators, call.args[0], scope)
            flat = _flatten(values)
            return _reduce(name, flat)
        if name in _MATH_FUNCS:
            return self._math_call(name, call, scope)
        if name in ("sum", "min", "max"):
            args = [self.eval(a, scope) for a in call.args]
            if name in ("min", "max") and len(args) == 2:
                a, b = args
                if not (is_numeric(a) and is_numeric(b)):
                    raise EvalError(f"'{name}' needs numeric arguments")
                return min(a, b) if name == "min" else max(a, b)
            if len(args) != 1 or not isinstance(args[0], list):
                raise EvalError(f"'{name}' needs one array argument")
            flat = _flatten(args[0])
            return _reduce(name, flat)
        if name == "size":
            args = [self.eval(a, scope) for a in call.args]
            if not args:
                raise EvalError("size() needs an argument")
            dims = list(dimensions_of(args[0]))
            if len(call.args) == 1:
                return dims
            axis = args[1]
            if not isinstance(axis, int) or isinstance(axis, bool):
                raise EvalError("size(): dimension must be an Integer")
            if not 1 <= axis <= len(dims):
                raise EvalError(f"size(): dimension {axis} out of range")
            return dims[axis - 1]
        if name == "ndims":
            value = self.eval(call.args[0], scope)
            return len(dimensions_of(value))
        if name == "fill":
            args = [self.eval(a, scope) for a in call.args]
            if len(args) < 2:
                raise EvalError("fill() needs a value and at least one dimension")
            return _fill(args[0], args[1:])
        if name in ("zeros", "ones"):
            args = [self.eval(a, scope) for a in call.args]
            if not args:
                raise EvalError(f"{name}() needs at least one dimension")
            return _fill(0 if name == "zeros" else 1, args)
        if name == "der":
            raise EvalError("der() is not constant")

        return self._user_call(name, call, scope)

    def _math_call(self, name: str, call: ast.Call, scope: Scope) -> Value:
        if len(call.args) != 1:
            raise EvalError(f"'{name}' takes one argument")
        arg = self.eval(call.args[0], scope)

        def apply(v):
            if isinstance(v, list):
                return [apply(el) for el in v]
            if not is_numeric(v):
                raise EvalError(f"'{name}' needs a numeric argument")
            try:
                result = _MATH_FUNCS[name](v)
            except ValueError as exc:
                raise EvalError(f"'{name}': {exc}") from exc
            if name == "abs" and isinstance(v, int):
                return abs(v)
            return float(result)

        return apply(arg)

    def _user_call(self, name: str, call: ast.Call, scope: Scope) -> Value:
        ctx = scope.class_ctx or self._nearest_class_ctx(scope.node)
        try:
            qname = resolve(self.tree, name, ctx)
        except ResolveError as exc:
            raise EvalError(f"unknown function '{name}'") from exc
        entry = self.tree.get(qname)
        if entry is None or entry.ast is None:
            raise EvalError(f"unknown function '{name}'")

        if entry.restriction is ast.Restriction.RECORD:
            return self._record_constructor(qname, call, scope)
        if entry.restriction is not ast.Restriction.FUNCTION:
            raise EvalError(f"'{qname}' is not callable")

        if self._depth >= MAX_CALL_DEPTH:
            raise EvalError(f"call depth exceeds {MAX_CALL_DEPTH}")

        comps = self._record_fields(qname)
        inputs = [c for c in comps if c.causality is ast.Causality.INPUT]
        outputs = [c for c in comps if c.causality is ast.Causality.OUTPUT]
        locals_ = [c for c in comps if c.causality is ast.Causality.NONE]
        if not outputs:
            raise EvalError(f"function '{qname}' has no output")
        if len(entry.ast.algorithms) != 1 or entry.ast.equations:
            raise EvalError(f"function '{qname}' must have exactly one algorithm section")

        env: dict[str, Value] = {}
        fn_scope = Scope(node=None, class_ctx=qname)
        positional = list(call.args)
        if len(positional) > len(inputs):
            raise EvalError(f"too many arguments for '{qname}'")
        for comp, arg in zip(inputs, positional):
            env[comp.name] = self.eval(arg, scope)
        named = dict(call.named_args)
        for comp in inputs[len(positional):]:
            if comp.name in named:
                env[comp.name] = self.eval(named.pop(comp.name), scope)
            elif comp.modification.binding is not None:
                env[comp.name] = self.eval(comp.modification.binding, fn_scope)
            else:
                raise EvalError(f"missing argument '{comp.name}' for '{qname}'")
        if named:
            raise EvalError(f"unknown named arguments {sorted(named)} for '{qname}'")
        for comp in outputs + locals_:
            if comp.modification.binding is not None:
                env[comp.name] = self.eval(comp.modification.binding,
                                           _EnvScope(env, fn_scope))
        self._depth += 1
        try:
            self._exec_block(entry.ast.algorithms[0], env, fn_scope)
        finally:
            self._depth -= 1
        results = []
        for comp in outputs:
            if comp.name not in env:
                raise EvalError(f"function '{qname}' did not assign output '{comp.name}'")
            results.append(env[comp.name])
        return results[0] if len(results) == 1 else results

    def _record_constructor(self, qname: str, call: ast.Call, scope: Scope) -> Value:
        comps = self._record_fields(qname)
        fields: dict[str, Value] = {}
        positional = list(call.args)
        if len(positional) > len(comps):
            raise EvalError(f"too many arguments for record '{qname}'")
        for comp, arg in zip(comps, positional):
            fields[comp.name] = self.eval(arg, scope)
        named = dict(call.named_args)
        for comp in comps:
            if comp.name in fields:
                continue
            if comp.name in named:
                fields[comp.name] = self.eval(named.pop(comp.name), scope)
            elif comp.modification.binding is not None:
                fields[comp.name] = self.eval(comp.modification.binding,
                                              Scope(node=None, class_ctx=qname))
            else:
                raise EvalError(f"missing field '{comp.name}' for record '{qname}'")
        if named:
            raise EvalError(f"record '{qname}' has no fields {sorted(named)}")
        ordered = {c.name: fields[c.name] for c in comps}
        return RecordValue(type_name=qname, fields=ordered)

    def _record_fields(self, qname: str, seen: Optional[set] = None) -> list[ast.Component]:
        if seen is None:
            seen = set()
        if qname in seen:
            return []
        seen.add(qname)
        entry = self.tree.get(qname)
        if entry is None or entry.ast is None:
            return []
        comps: list[ast.Component] = []
        for ext in entry.ast.extends_clauses:
            try:
                base = resolve(self.tree, ext.base_name, entry.qname)
            except ResolveError:
                continue
            if base not in BUILTIN_TYPES:
                comps.extend(self._record_fields(base, seen))
        comps.extend(entry.ast.components)
        return comps

    # -- algorithm execution ----------------------------------------------------------

    def _exec_block(self, statements, env: dict, scope: Scope) -> bool:
        """Returns True when a return statement was executed."""
        for st in statements:
            if self._exec_statement(st, env, scope):
                return True
        return False

    def _exec_statement(self, st, env: dict, scope: Scope) -> bool:
        eval_scope = _EnvScope(env, scope)
        if isinstance(st, ast.StReturn):
            return True
        if isinstance(st, ast.StBreak):
            raise _BreakLoop()
        if isinstance(st, ast.StAssign):
            value = self.eval(st.value, eval_scope)
            self._assign(st.target, value, env, scope)
            return False
        if isinstance(st, ast.StCall):
            self.eval(st.call, eval_scope)
            return False
        if isinstance(st, ast.StIf):
            for cond, body in st.branches:
                c = self.eval(cond, eval_scope)
                if not isinstance(c, bool):
                    raise EvalError("if condition is not Boolean")
                if c:
                    return self._exec_block(body, env, scope)
            return self._exec_block(st.orelse, env, scope)
        if isinstance(st, ast.StFor):
            it = st.iterators[0]
            if it.domain is None:
                raise EvalError(f"iterator '{it.name}' needs an explicit range")
            domain = self.eval(it.domain, eval_scope)
            if not isinstance(domain, list):
                raise EvalError("for domain is not an array")
            try:
                for v in domain:
                    env[it.name] = v
                    if self._exec_block(st.body, env, scope):
                        return True
            except _BreakLoop:
                pass
            finally:
                env.pop(it.name, None)
            return False
        if isinstance(st, ast.StWhile):
            guard = 0
            try:
                while True:
                    c = self.eval(st.condition, eval_scope)
                    if not isinstance(c, bool):
                        raise EvalError("while condition is not Boolean")
                    if not c:
                        return False
                    if self._exec_block(st.body, env, scope):
                        return True
                    guard += 1
                    if guard > 10_000_000:
                        raise EvalError("while loop exceeded the iteration limit")
            except _BreakLoop:
                return False
        if isinstance(st, ast.StWhen):
            raise EvalError("when statements are not evaluable")
        raise EvalError(f"cannot execute {type(st).__name__}")

    def _assign(self, target, value: Value, env: dict, scope: Scope) -> None:
        if isinstance(target, ast.TupleExpr):
            if not isinstance(value, list) or len(value) != len(
                    [e for e in target.elements if e is not None]):
                raise EvalError("tuple assignment arity mismatch")
            i = 0
            for el in target.elements:
                if el is None:
                    continue
                self._assign(el, value[i], env, scope)
                i += 1
            return
        if not isinstance(target, ast.Ref) or len(target.parts) != 1:
            raise EvalError("assignment target must be a simple variable")
        part = target.parts[0]
        if not part.subscripts:
            env[part.name] = value
            return
        if part.name not in env:
            raise EvalError(f"assignment to unset array '{part.name}'")
        container = env[part.name]
        eval_scope = _EnvScope(env, scope)
        subs = [self._eval_subscript(s, len(container) if isinstance(container, list) else None,
                                     eval_scope) for s in part.subscripts]
        cur = container
        for s in subs[:-1]:
            if not isinstance(s, int) or isinstance(s, bool) or not isinstance(cur, list):
                raise EvalError("unsupported assignment subscript")
            cur = cur[_checked_index(s, len(cur))]
        last = subs[-1]
        if not isinstance(last, int) or isinstance(last, bool) or not isinstance(cur, list):
            raise EvalError("unsupported assignment subscript")
        cur[_checked_index(last, len(cur))] = value


class _BreakLoop(Exception):
    pass


class _EnvScope(Scope):
    """Scope view that resolves simple names from a mutable env first."""

    def __init__(self, env: dict, base: Scope):
        super().__init__(node=base.node, class_ctx=base.class_ctx,
                         iterators={**base.iterators, **env})
        self._env = env


# -- pure helpers ----------------------------------------------------------------------


def _negate(v: Value) -> Value:
    if isinstance(v, bool) or not isinstance(v, (int, float, list)):
        raise EvalError("unary '-' needs a numeric operand")
    if isinstance(v, list):
        return [_negate(el) for el in v]
    return -v


def _binary_op(op: str, a: Value, b: Value) -> Value:
    if op in ("==", "<>", "<", "<=", ">", ">="):
        return _compare(op, a, b)
    if op == "+" and isinstance(a, str) and isinstance(b, str):
        return a + b
    base = op.lstrip(".")
    elementwise = op.startswith(".")
    if isinstance(a, list) or isinstance(b, list):
        return _array_arith(op, base, elementwise, a, b)
    if not (is_numeric(a) and is_numeric(b)):
        raise EvalError(f"operator '{op}' needs numeric operands, got {a!r} and {b!r}")
    return _scalar_arith(base, a, b)


def _scalar_arith(op: str, a, b):
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise EvalError("division by zero")
        return a / b
    if op == "^":
        try:
            return float(a) ** float(b)
        except (OverflowError, ZeroDivisionError) as exc:
            raise EvalError(f"power failed: {exc}") from exc
    raise EvalError(f"unknown operator '{op}'")


def _array_arith(op: str, base: str, elementwise: bool, a, b):
    a_list = isinstance(a, list)
    b_list = isinstance(b, list)
    if a_list and b_list:
        if base == "*" and not elementwise:
            return _matrix_product(a, b)
        if len(a) != len(b):
            raise EvalError(f"array size mismatch for '{op}': {len(a)} vs {len(b)}")
        return [_binary_op(op, x, y) for x, y in zip(a, b)]
    if elementwise or base in ("*", "/"):
        if a_list:
            return [_binary_op(op, x, b) for x in a]
        return [_binary_op(op, a, y) for y in b]
    raise EvalError(f"operator '{op}' cannot mix arrays and scalars (use '.{base}')")


def _matrix_product(a: list, b: list):
    a_dims = dimensions_of(a)
    b_dims = dimensions_of(b)
    if len(a_dims) == 1 and len(b_dims) == 1:
        if a_dims[0] != b_dims[0]:
            raise EvalError("vector sizes differ in scalar product")
        return sum(_scalar_arith("*", x, y) for x, y in zip(a, b))
    if len(a_dims) == 2 and len(b_dims) == 1:
        if a_dims[1] != b_dims[0]:
            raise EvalError("matrix/vector size mismatch")
        return [sum(_scalar_arith("*", x, y) for x, y in zip(row, b)) for row in a]
    if len(a_dims) == 2 and len(b_dims) == 2:
        if a_dims[1] != b_dims[0]:
            raise EvalError("matrix size mismatch")
        cols = list(zip(*b))
        return [[sum(_scalar_arith("*", x, y) for x, y in zip(row, col)) for col in cols]
                for row in a]
    raise EvalError("unsupported operand ranks for '*'")


def _compare(op: str, a, b) -> bool:
    if isinstance(a, EnumValue) and isinstance(b, EnumValue):
        if a.type_name != b.type_name:
            raise EvalError("comparing different enumeration types")
        a, b = a.index, b.index
    elif isinstance(a, bool) and isinstance(b, bool):
        a, b = int(a), int(b)
    elif isinstance(a, str) and isinstance(b, str):
        pass
    elif is_numeric(a) and is_numeric(b):
        pass
    else:
        raise EvalError(f"cannot compare {a!r} and {b!r}")
    if op == "==":
        return a == b
    if op == "<>":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise EvalError(f"unknown comparison '{op}'")


def _range_values(start, step, stop) -> list:
    for v in (start, step, stop):
        if not is_numeric(v):
            raise EvalError("range bounds must be numeric")
    if step == 0:
        raise EvalError("range step must be nonzero")
    if isinstance(start, int) and isinstance(step, int) and isinstance(stop, int):
        n = (stop - start) // step
        return [start + i * step for i in range(n + 1)] if n >= 0 else []
    n = math.floor((stop - start) / step + 1e-10)
    return [start + i * step for i in range(n + 1)] if n >= 0 else []


def _fill(value: Value, dims: list) -> Value:
    for d in dims:
        if not isinstance(d, int) or isinstance(d, bool) or d < 0:
            raise EvalError("fill dimensions must be non-negative Integers")
    if not dims:
        return value
    import copy

    return [copy.deepcopy(_fill(value, dims[1:])) for _ in range(dims[0])]


def _flatten(values) -> list:
    out = []
    stack = [values]
    while stack:
        v = stack.pop()
        if isinstance(v, list):
            stack.extend(reversed(v))
        else:
            out.append(v)
    return out


def _reduce(name: str, flat: list) -> Value:
    if name == "sum":
        total = 0
        for v in flat:
            if not is_numeric(v):
                raise EvalError("sum over non-numeric elements")
            total = total + v
        return total
    if not flat:
        raise EvalError(f"'{name}' of an empty array")
    for v in flat:
        if not is_numeric(v):
            raise EvalError(f"'{name}' over non-numeric elements")
    return min(flat) if name == "min" else max(flat)


def _checked_index(i, dim: int) -> int:
    if isinstance(i, bool) or not isinstance(i, int):
        raise EvalError(f"array index must be an Integer, got {i!r}")
    if not 1 <= i <= dim:
        raise EvalError(f"index {i} out of bounds 1..{dim}")
    return i - 1
