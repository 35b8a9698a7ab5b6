from __future__ import annotations

import math

import pytest

from mhub.twin import CausalizeError, causalize, compile_expr
from mhub.syntax import parse, lower
from mhub.syntax import tree as ast

from conftest import flatten_class


def test_single_state_no_algebraics():
    flat = flatten_class("model M Real x(start = 1); equation der(x) = -x; end M;", "M")
    sched = causalize(flat)
    assert sched.states == ["x"]
    assert sched.assignments == []
    assert list(sched.initial_state) == [1.0]
    assert sched.outputs == ["x"]


def test_assignment_ordered_before_derivative():
    flat = flatten_class(
        "model P parameter Real k = 2; Real x(start = 1); Real v; "
        "equation v = -k * x; der(x) = v; end P;", "P")
    sched = causalize(flat)
    assert [name for name, _, _ in sched.assignments] == ["v"]
    assert sched.parameters == {"k": 2}
    assert sched.variable_kinds == {"x": "state", "v": "algebraic", "k": "parameter"}


def test_dependency_chain_topologically_sorted():
    flat = flatten_class(
        "model C Real a; Real b; Real c; Real x(start = 0); "
        "equation c = 1; b = c + 1; a = b + c; der(x) = a; end C;", "C")
    sched = causalize(flat)
    order = [name for name, _, _ in sched.assignments]
    assert order.index("c") < order.index("b") < order.index("a")


def test_algebraic_loop_reports_cycle():
    flat = flatten_class(
        "model Q Real x; Real y; equation x = y + 1; y = x - 1; end Q;", "Q")
    with pytest.raises(CausalizeError) as err:
        causalize(flat)
    assert sorted(err.value.cycle) == ["x", "y"]


def test_self_dependency_is_a_loop():
    flat = flatten_class("model S Real x; equation x = x + 1; end S;", "S")
    with pytest.raises(CausalizeError) as err:
        causalize(flat)
    assert "x" in str(err.value)


def test_not_orientable():
    flat = flatten_class("model N Real x; Real y; equation x + y = 2; x - y = 0; end N;", "N")
    with pytest.raises(CausalizeError) as err:
        causalize(flat)
    assert "not orientable" in str(err.value)


def test_over_determined():
    flat = flatten_class("model O Real x; equation x = 1; x = 2; end O;", "O")
    with pytest.raises(CausalizeError) as err:
        causalize(flat)
    assert "over-determined" in str(err.value)


def test_under_determined():
    flat = flatten_class("model U Real x; Real y; equation x = 1; end U;", "U")
    with pytest.raises(CausalizeError) as err:
        causalize(flat)
    assert "under-determined" in str(err.value)


def test_permuted_equalities_matched():
    # v depined through a chain written in an inconvenient order
    flat = flatten_class(
        "model PM Real a; Real b; equation b = a; a = 3; end PM;", "PM")
    sched = causalize(flat)
    values = {}
    env = dict(sched.parameters)
    for name, fn, _ in sched.assignments:
        env[name] = fn(env)
        values[name] = env[name]
    assert values == {"a": 3, "b": 3}


def test_der_on_rhs():
    flat = flatten_class("model R Real x(start = 2); equation -x = der(x); end R;", "R")
    sched = causalize(flat)
    assert sched.states == ["x"]
    env = dict(sched.parameters)
    env["x"] = 2.0
    assert sched.derivatives[0][1](env) == -2.0


def test_when_equation_rejected():
    flat = flatten_class(
        "model W Real x(start = 0); discrete Real c; equation der(x) = 1; "
        "when x > 0.5 then c = x; end when; end W;", "W")
    with pytest.raises(CausalizeError) as err:
        causalize(flat)
    assert "when" in str(err.value)


def test_double_derivative_definition_rejected():
    flat = flatten_class(
        "model D Real x; equation der(x) = 1; der(x) = 2; end D;", "D")
    with pytest.raises(CausalizeError):
        causalize(flat)


def test_root_inputs_become_steerable_parameters():
    flat = flatten_class(
        "model I input Real u(start = 3); Real x(start = 0); "
        "equation der(x) = u - x; end I;", "I")
    sched = causalize(flat)
    assert sched.parameters == {"u": 3}
    assert sched.variable_kinds["u"] == "parameter"


def test_string_variable_rejected():
    flat = flatten_class('model SV String s = "x"; end SV;', "SV")
    with pytest.raises(CausalizeError):
        causalize(flat)


# -- expression compilation ---------------------------------------------------


def expr_of(text: str) -> ast.Expr:
    tree, diags = parse(f"model X Real probe = {text}; end X;")
    assert not diags
    stored, _ = lower(tree)
    return stored.classes[0].components[0].modification.binding


@pytest.mark.parametrize("text,env,expected", [
    ("2 + 3 * 4", {}, 14),
    ("x ^ 2", {"x": 3.0}, 9.0),
    ("-x", {"x": 2.0}, -2.0),
    ("sin(0.0)", {}, 0.0),
    ("sqrt(x)", {"x": 16.0}, 4.0),
    ("if x > 0 then 1.0 else -1.0", {"x": 5.0}, 1.0),
    ("if x > 0 then 1.0 else -1.0", {"x": -5.0}, -1.0),
    ("min(a, b)", {"a": 2.0, "b": 7.0}, 2.0),
    ("x / 4", {"x": 10.0}, 2.5),
    ("time * 2", {"time": 3.0}, 6.0),
    ("a and b or not c", {"a": True, "b": False, "c": False}, True),
    ("abs(-7.5)", {}, 7.5),
    ("exp(log(5.0))", {}, math.exp(math.log(5.0))),
])
def test_compile_expr(text, env, expected):
    fn = compile_expr(expr_of(text))
    assert fn(dict(env)) == expected


def test_compile_rejects_unsupported():
    with pytest.raises(CausalizeError):
        compile_expr(expr_of("{1, 2, 3}"))
    with pytest.raises(CausalizeError):
        compile_expr(expr_of("someUserFunction(1)"))
