"""Causalization: orient a flat model's equations into an executable schedule.

Supported dynamics are the explicit-ODE subset: equations of the form
``der(x) = expr`` define state derivatives; every remaining equation must be
orientable as an explicit assignment ``v = expr`` via bipartite matching and
a dependency topological sort. Events, when-clauses, and algebraic loops are
rejected with precise errors at deploy time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..frontend import FlatModel
from ..syntax import tree as ast

Env = dict


class CausalizeError(Exception):
    def __init__(self, message: str, cycle: Optional[list[str]] = None):
        super().__init__(message)
        self.cycle = cycle or []


@dataclass
class Schedule:
    states: list[str]
    initial_state: np.ndarray
    parameters: dict[str, object]
    # topologically ordered explicit assignments for algebraic variables
    assignments: list[tuple[str, Callable[[Env], float], str]]
    derivatives: list[tuple[str, Callable[[Env], float], str]]
    outputs: list[str]  # deterministic publish order
    state_index: dict[str, int] = field(default_factory=dict)
    variable_kinds: dict[str, str] = field(default_factory=dict)  # state|algebraic|parameter

    def __post_init__(self):
        if not self.state_index:
            self.state_index = {name: i for i, name in enumerate(self.states)}


def causalize(flat: FlatModel) -> Schedule:
    for eq in flat.equations:
        if eq.kind == "when":
            raise CausalizeError("when-equations are not supported by the runtime")
        if eq.kind == "call":
            raise CausalizeError("call equations are not supported by the runtime")

    parameters: dict[str, object] = {}
    unknowns: list[str] = []
    for v in flat.variables:
        if v.variability.value in ("parameter", "constant"):
            parameters[v.name] = _numeric(v.value if v.value is not None else v.start, v.name)
        elif v.causality.value == "input" and "." not in v.name:
            # root-level inputs have no defining equation; they are steerable
            # quasi-parameters initialized from their start value
            parameters[v.name] = _numeric(v.start, v.name, default=0.0)
        elif v.base_type in ("Real", "Integer"):
            unknowns.append(v.name)
        else:
            raise CausalizeError(
                f"variable '{v.name}' of type {v.base_type} is not supported by the runtime")

    # split equations into derivative definitions and algebraic candidates
    der_exprs: dict[str, ast.Expr] = {}
    algebraic_eqs: list[tuple[ast.Expr, ast.Expr]] = []
    for eq in flat.equations:
        state = _der_target(eq.lhs)
        if state is not None:
            if _der_target(eq.rhs) is not None:
                raise CausalizeError(f"equation '{eq.text()}' has der() on both sides")
            if state in der_exprs:
                raise CausalizeError(f"state '{state}' has two derivative equations")
            der_exprs[state] = eq.rhs
            continue
        state = _der_target(eq.rhs)
        if state is not None:
            if state in der_exprs:
                raise CausalizeError(f"state '{state}' has two derivative equations")
            der_exprs[state] = eq.lhs
            continue
        algebraic_eqs.append((eq.lhs, eq.rhs))

    states = sorted(der_exprs)
    missing_states = [s for s in states if s not in unknowns and s not in parameters]
    if missing_states:
        raise CausalizeError(f"der() of unknown variable(s): {missing_states}")
    algebraic = [u for u in unknowns if u not in der_exprs]

    if len(algebraic_eqs) != len(algebraic):
        kind = "over" if len(algebraic_eqs) > len(algebraic) else "under"
        raise CausalizeError(
            f"{kind}-determined system: {len(algebraic_eqs)} algebraic equations "
            f"for {len(algebraic)} algebraic unknowns "
            f"({len(states)} states, {len(parameters)} parameters)")

    known = set(parameters) | set(states)
    assignment_pairs = _orient(algebraic_eqs, set(algebraic), known)

    ordered = _topological_order(assignment_pairs, set(algebraic))

    def compile_for(name: str, expr: ast.Expr) -> tuple[str, Callable[[Env], float], str]:
        from ..syntax.printer import print_expr

        return name, compile_expr(expr), print_expr(expr)

    assignments = [compile_for(name, assignment_pairs[name]) for name in ordered]
    derivatives = [compile_for(state, der_exprs[state]) for state in states]

    initial = np.array([_initial_value(flat, s) for s in states], dtype=float)
    outputs = sorted(set(states) | set(algebraic) | set(parameters))
    kinds = {}
    for name in states:
        kinds[name] = "state"
    for name in algebraic:
        kinds[name] = "algebraic"
    for name in parameters:
        kinds[name] = "parameter"
    return Schedule(states=states, initial_state=initial, parameters=parameters,
                    assignments=assignments, derivatives=derivatives, outputs=outputs,
                    variable_kinds=kinds)


def _numeric(value, name: str, default: Optional[float] = None):
    if value is None:
        if default is not None:
            return default
        return 0.0
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        return value
    raise CausalizeError(f"parameter '{name}' has a non-scalar value {value!r}")


def _initial_value(flat: FlatModel, state: str) -> float:
    v = flat.variable(state)
    if v is None:
        return 0.0
    if v.start is not None and isinstance(v.start, (int, float)) and not isinstance(v.start, bool):
        return float(v.start)
    return 0.0


def _der_target(expr: ast.Expr) -> Optional[str]:
    if isinstance(expr, ast.Call) and expr.callee.dotted() == "der" and len(expr.args) == 1:
        arg = expr.args[0]
        if isinstance(arg, ast.Ref) and len(arg.parts) == 1 and not arg.parts[0].subscripts:
            return arg.parts[0].name
    return None


def _bare_name(expr: ast.Expr) -> Optional[str]:
    if isinstance(expr, ast.Ref) and len(expr.parts) == 1 and not expr.parts[0].subscripts:
        return expr.parts[0].name
    return None


def _orient(equations: list[tuple[ast.Expr, ast.Expr]], algebraic: set[str],
            known: set[str]) -> dict[str, ast.Expr]:
    """Match each equation to one bare unknown side (augmenting-path matching)."""
    from ..syntax.printer import print_expr

    candidates: list[list[tuple[str, ast.Expr]]] = []
    for lhs, rhs in equations:
        options: list[tuple[str, ast.Expr]] = []
        ln = _bare_name(lhs)
        rn = _bare_name(rhs)
        if ln in algebraic:
            options.append((ln, rhs))
        if rn in algebraic and rn != ln:
            options.append((rn, lhs))
        if not options:
            text = f"{print_expr(lhs)} = {print_expr(rhs)}"
            raise CausalizeError(
                f"equation '{text}' is not orientable as an explicit assignment "
                f"(no bare unknown on either side)")
        candidates.append(options)

    matched_var_of_eq: dict[int, str] = {}
    eq_of_var: dict[str, int] = {}

    def try_assign(eq_idx: int, visited: set[str]) -> bool:
        for var, _expr in candidates[eq_idx]:
            if var in visited:
                continue
            visited.add(var)
            if var not in eq_of_var or try_assign(eq_of_var[var], visited):
                eq_of_var[var] = eq_idx
                matched_var_of_eq[eq_idx] = var
                return True
        return False

    for i in range(len(candidates)):
        if not try_assign(i, set()):
            lhs, rhs = equations[i]
            text = f"{print_expr(lhs)} = {print_expr(rhs)}"
            raise CausalizeError(
                f"equation '{text}' cannot be matched to an unassigned unknown "
                f"(system is not explicitly orientable)")

    out: dict[str, ast.Expr] = {}
    for eq_idx, var in matched_var_of_eq.items():
        for cand_var, expr in candidates[eq_idx]:
            if cand_var == var:
                out[var] = expr
                break
    return out


def _topological_order(assignments: dict[str, ast.Expr], algebraic: set[str]) -> list[str]:
    deps: dict[str, set[str]] = {}
    for name, expr in assignments.items():
        deps[name] = {r for r in _referenced(expr) if r in algebraic and r != name}
        if name in _referenced(expr):
            raise CausalizeError(f"algebraic loop: [{name!r}] (variable defined by itself)",
                                 cycle=[name])

    order: list[str] = []
    remaining = dict(deps)
    satisfied: set[str] = set()
    while remaining:
        ready = sorted(n for n, d in remaining.items() if d <= satisfied)
        if not ready:
            cycle = _find_cycle(remaining)
            raise CausalizeError(f"algebraic loop involving {sorted(cycle)}", cycle=sorted(cycle))
        for n in ready:
            order.append(n)
            satisfied.add(n)
            del remaining[n]
    return order


def _find_cycle(deps: dict[str, set[str]]) -> set[str]:
    # every remaining node depends (transitively) on a cycle; report the SCC-ish core
    remaining = {n: {d for d in ds if d in deps} for n, ds in deps.items()}
    changed = True
    while changed:
        changed = False
        for n in list(remaining):
            if not remaining[n]:
                del remaining[n]
                for ds in remaining.values():
                    if n in ds:
                        ds.discard(n)
                changed = True
    return set(remaining)


def _referenced(expr: ast.Expr) -> set[str]:
    out: set[str] = set()

    def walk(e) -> None:
        if isinstance(e, ast.Ref):
            if len(e.parts) == 1:
                out.add(e.parts[0].name)
            return
        if isinstance(e, ast.Call):
            for a in e.args:
                walk(a)
            for _, v in e.named_args:
                walk(v)
            return
        if isinstance(e, ast.Unary):
            walk(e.operand)
        elif isinstance(e, ast.Binary):
            walk(e.lhs)
            walk(e.rhs)
        elif isinstance(e, ast.IfExpr):
            for c, v in e.branches:
                walk(c)
                walk(v)
            walk(e.orelse)
        elif isinstance(e, ast.RangeExpr):
            walk(e.start)
            walk(e.stop)
            if e.step is not None:
                walk(e.step)
        elif isinstance(e, ast.ArrayExpr):
            for el in e.elements:
                walk(el)

    walk(expr)
    return out


# ---------------------------------------------------------------------------
# expression compilation

_MATH = {"abs": "abs", "sqrt": "math.sqrt", "exp": "math.exp", "log": "math.log",
         "sin": "math.sin", "cos": "math.cos", "tan": "math.tan"}
_COMPARISONS = {"==": "==", "<>": "!=", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


def compile_expr(expr: ast.Expr) -> Callable[[Env], float]:
    src = _pysrc(expr)
    code = compile(f"lambda env: ({src})", "<schedule>", "eval")
    return eval(code, {"math": math})  # noqa: S307 - source is generated, not user text


def _pysrc(e: ast.Expr) -> str:
    if isinstance(e, ast.IntLit):
        return repr(e.value)
    if isinstance(e, ast.RealLit):
        return repr(e.value)
    if isinstance(e, ast.BoolLit):
        return "True" if e.value else "False"
    if isinstance(e, ast.StringLit):
        return repr(e.value)
    if isinstance(e, ast.Ref):
        if len(e.parts) == 1 and not e.parts[0].subscripts:
            name = e.parts[0].name
            if name == "time":
                return "env['time']"
            return f"env[{name!r}]"
        raise CausalizeError(f"reference '{e.dotted()}' is not a flat scalar")
    if isinstance(e, ast.Unary):
        if e.op == "not":
            return f"(not {_pysrc(e.operand)})"
        return f"(-{_pysrc(e.operand)})"
    if isinstance(e, ast.Binary):
        op = e.op
        if op in ("+", "-", "*"):
            return f"({_pysrc(e.lhs)} {op} {_pysrc(e.rhs)})"
        if op == "/":
            return f"({_pysrc(e.lhs)} / {_pysrc(e.rhs)})"
        if op == "^":
            return f"(float({_pysrc(e.lhs)}) ** float({_pysrc(e.rhs)}))"
        if op in _COMPARISONS:
            return f"({_pysrc(e.lhs)} {_COMPARISONS[op]} {_pysrc(e.rhs)})"
        if op == "and":
            return f"({_pysrc(e.lhs)} and {_pysrc(e.rhs)})"
        if op == "or":
            return f"({_pysrc(e.lhs)} or {_pysrc(e.rhs)})"
        raise CausalizeError(f"operator '{op}' is not supported in runtime equations")
    if isinstance(e, ast.IfExpr):
        src = _pysrc(e.orelse)
        for cond, val in reversed(e.branches):
            src = f"({_pysrc(val)} if {_pysrc(cond)} else {src})"
        return src
    if isinstance(e, ast.Call):
        name = e.callee.dotted()
        if name in _MATH and len(e.args) == 1 and not e.named_args:
            return f"{_MATH[name]}({_pysrc(e.args[0])})"
        if name in ("min", "max") and len(e.args) == 2 and not e.named_args:
            return f"{name}({_pysrc(e.args[0])}, {_pysrc(e.args[1])})"
        if name == "der":
            raise CausalizeError("nested der() is not supported")
        raise CausalizeError(f"function '{name}' is not supported in runtime equations")
    raise CausalizeError(
        f"{type(e).__name__} expressions are not supported in runtime equations")
