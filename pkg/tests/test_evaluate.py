from __future__ import annotations

import math

import pytest

from mhub.frontend import EvalError, Evaluator, RecordValue, Scope, build_class_tree
from mhub.syntax import parse, lower

from conftest import compile_class, load_units


def eval_const(binding_src: str, extra: str = "") -> object:
    """Evaluate one constant binding in a scratch model."""
    src = f"model Scratch {extra} constant Real probe = 0; end Scratch;"
    src = src.replace("constant Real probe = 0;", f"constant Real probe = {binding_src};")
    inst, itree = compile_class(src, "Scratch")
    assert not inst.diags, inst.diags
    return itree.root.child("probe").evaluated


def eval_expr(expr_src: str, context: str = "") -> object:
    tree, diags = build_class_tree(load_units(f"model Ctx {context} end Ctx;"))
    assert not diags
    wrapped = f"model W constant Real v = {expr_src}; end W;"
    ptree, pdiags = parse(wrapped)
    assert not pdiags
    stored, _ = lower(ptree)
    binding = stored.classes[0].components[0].modification.binding
    from mhub.frontend import Instantiator

    inst = Instantiator(tree)
    itree = inst.instantiate("Ctx")
    return inst.evaluator.eval(binding, Scope(node=itree.root, class_ctx="Ctx"))


def test_one_based_indexing():
    assert eval_expr("{1, 2, 3}[2]") == 2


def test_index_out_of_bounds():
    with pytest.raises(EvalError):
        eval_expr("{1, 2, 3}[0]")
    with pytest.raises(EvalError):
        eval_expr("{1, 2, 3}[4]")


def test_sum_of_budget_masses():
    assert eval_expr("sum({26.0, 23.0})") == 49.0


def test_arithmetic_and_types():
    assert eval_expr("1 + 2") == 3
    assert isinstance(eval_expr("1 + 2"), int)
    assert eval_expr("7 / 2") == 3.5  # Integer division yields Real
    assert eval_expr("2 ^ 10") == 1024.0
    assert eval_expr("abs(-4)") == 4
    assert eval_expr("sqrt(16)") == 4.0
    assert eval_expr("min(3, 5)") == 3
    assert eval_expr("max({1.0, 9.0, 4.0})") == 9.0


def test_division_by_zero():
    with pytest.raises(EvalError):
        eval_expr("1 / 0")


def test_math_functions():
    assert eval_expr("sin(0)") == 0.0
    assert abs(eval_expr("cos(0)") - 1.0) < 1e-15
    assert abs(eval_expr("exp(1)") - math.e) < 1e-12
    assert abs(eval_expr("log(exp(2))") - 2.0) < 1e-12
    assert abs(eval_expr("tan(0.5) - sin(0.5)/cos(0.5)")) < 1e-15


def test_ranges():
    assert eval_expr("1:4") == [1, 2, 3, 4]
    assert eval_expr("1:2:7") == [1, 3, 5, 7]
    assert eval_expr("3:-1:1") == [3, 2, 1]
    assert eval_expr("2:1") == []
    assert eval_expr("0.0:0.5:1.0") == [0.0, 0.5, 1.0]


def test_size_ndims_fill():
    assert eval_expr("size({1, 2, 3}, 1)") == 3
    assert eval_expr("size([1, 2; 3, 4], 2)") == 2
    assert eval_expr("size({{1, 2}, {3, 4}, {5, 6}})") == [3, 2]
    assert eval_expr("ndims([1, 2; 3, 4])") == 2
    assert eval_expr("fill(7, 2, 3)") == [[7, 7, 7], [7, 7, 7]]
    assert eval_expr("zeros(2)") == [0, 0]
    assert eval_expr("ones(3)") == [1, 1, 1]


def test_string_concatenation():
    inst, itree = compile_class(
        'model S constant String s = "a" + "b" + "c"; end S;', "S")
    assert itree.root.child("s").evaluated == "abc"


def test_if_expression_and_logic():
    assert eval_expr("if 1 < 2 then 10 else 20") == 10
    assert eval_expr("if false then 1 elseif true then 2 else 3") == 2


def test_matrix_and_elementwise():
    assert eval_expr("{1, 2} .* {3, 4}") == [3, 8]
    assert eval_expr("{1.0, 2.0} * {3.0, 4.0}") == 11.0  # dot product
    assert eval_expr("2 * {1, 2, 3}") == [2, 4, 6]
    assert eval_expr("[1, 2; 3, 4][2, 1]") == 3


def test_array_comprehension_and_reduction():
    assert eval_expr("{i * i for i in 1:4}") == [1, 4, 9, 16]
    assert eval_expr("sum(i * i for i in 1:4)") == 30


def test_end_in_subscript():
    assert eval_expr("{10, 20, 30}[end]") == 30
    assert eval_expr("{10, 20, 30}[end - 1]") == 20


def test_record_constructor_and_field_access():
    src = """
model M
  record P Real x; Real y = 2; end P;
  constant P p = P(x = 1);
  constant Real px = p.x;
  constant Real py = p.y;
end M;
"""
    inst, itree = compile_class(src, "M")
    assert not inst.diags
    assert itree.root.child("px").evaluated == 1
    assert itree.root.child("py").evaluated == 2
    assert isinstance(itree.root.child("p").evaluated, RecordValue)


def test_record_field_slicing_over_array():
    src = """
model M
  record R Real a; end R;
  constant R rows[2] = {R(a = 5.0), R(a = 7.0)};
  constant Real total = sum(rows.a);
end M;
"""
    inst, itree = compile_class(src, "M")
    assert itree.root.child("total").evaluated == 12.0


def test_enum_literals():
    src = """
model M
  type Mode = enumeration(off, on);
  constant Mode m = Mode.on;
  constant Boolean isOn = m == Mode.on;
  constant Boolean ordered = Mode.off < Mode.on;
end M;
"""
    inst, itree = compile_class(src, "M")
    assert itree.root.child("isOn").evaluated is True
    assert itree.root.child("ordered").evaluated is True


def test_user_function_single_algorithm():
    src = """
model M
  function triple input Real u; output Real y; algorithm y := 3 * u; end triple;
  constant Real nine = triple(3);
end M;
"""
    inst, itree = compile_class(src, "M")
    assert itree.root.child("nine").evaluated == 9


def test_user_function_with_for_and_if():
    src = """
model M
  function fact
    input Integer n;
    output Integer y;
  algorithm
    y := 1;
    for k in 1:n loop
      y := y * k;
    end for;
  end fact;
  constant Integer f5 = fact(5);
end M;
"""
    inst, itree = compile_class(src, "M")
    assert itree.root.child("f5").evaluated == 120


def test_function_default_arguments():
    src = """
model M
  function scaled input Real u; input Real k = 10; output Real y;
  algorithm y := k * u; end scaled;
  constant Real a = scaled(2);
  constant Real b = scaled(2, 3);
  constant Real c = scaled(2, k = 4);
end M;
"""
    inst, itree = compile_class(src, "M")
    assert itree.root.child("a").evaluated == 20
    assert itree.root.child("b").evaluated == 6
    assert itree.root.child("c").evaluated == 8


def test_recursion_depth_capped():
    src = """
model M
  function loop_ input Real u; output Real y; algorithm y := loop_(u); end loop_;
  constant Real bad = loop_(1);
end M;
"""
    inst, itree = compile_class(src, "M")
    assert any(d.code == "SEM011" for d in inst.diags)


def test_nonconstant_reference_fails():
    src = "model M Real dynamic; constant Real c = dynamic; end M;"
    inst, itree = compile_class(src, "M")
    assert any(d.code == "SEM011" for d in inst.diags)


def test_der_not_constant():
    src = "model M Real x; constant Real c = der(x); end M;"
    inst, itree = compile_class(src, "M")
    assert any(d.code == "SEM011" for d in inst.diags)


def test_cross_package_constant():
    src = """
package Lib constant Real k = 2.5; end Lib;
model M constant Real twice = 2 * Lib.k; end M;
"""
    inst, itree = compile_class(src, "M")
    assert itree.root.child("twice").evaluated == 5.0


def test_evaluation_pure():
    src = "model M constant Real x = sum({1.0, 2.0, 3.0}) ^ 2; end M;"
    inst, itree = compile_class(src, "M")
    binding = itree.root.child("x").binding
    evaluator = itree.evaluator
    scope = Scope(node=itree.root, class_ctx="M")
    results = {evaluator.eval(binding, scope) for _ in range(20)}
    assert results == {36.0}


def test_rectangularity_enforced():
    with pytest.raises(EvalError):
        eval_expr("{{1, 2}, {3}}")
