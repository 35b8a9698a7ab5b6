from __future__ import annotations

import pytest

from mhub.syntax import format_real, lower, parse, print_stored_definition
from mhub.syntax import tree as ast
from mhub.syntax.printer import print_expr


def roundtrip(src: str):
    tree, diags = parse(src, "in.mo")
    assert not diags, diags
    stored, lds = lower(tree, "in.mo")
    assert not lds, lds
    printed = print_stored_definition(stored)
    tree2, d2 = parse(printed, "out.mo")
    assert not d2, (printed, d2)
    stored2, ld2 = lower(tree2, "out.mo")
    assert not ld2, ld2
    return stored, stored2, printed


def test_roundtrip_all_corpus_files(corpus):
    for name, src in corpus:
        stored, stored2, printed = roundtrip(src)
        assert stored == stored2, f"{name} changed shape:\n{printed}"


def test_empty_package_prints_canonically():
    stored, _, printed = roundtrip("package P\nend P;")
    assert "package P" in printed and "end P;" in printed


def test_numeric_fidelity():
    stored, stored2, _ = roundtrip("model M constant Real x = 26.0; end M;")
    binding = stored2.classes[0].components[0].modification.binding
    assert binding == ast.RealLit(26.0)


@pytest.mark.parametrize("value", [26.0, 0.1, 1e300, 5e-324, 1.5e-3, 123456.789, 3.0])
def test_format_real_round_trips(value):
    assert float(format_real(value)) == value


def test_precedence_preserved():
    cases = [
        "(1 + 2) * 3",
        "1 + 2 * 3",
        "-x * y",
        "-(x + y)",
        "a - (b - c)",
        "not (a or b)",
        "2 ^ (3 ^ 2)",
        "(if c then 1 else 2) + 5",
        "1:2:10",
        "x < y or z > w",
    ]
    for text in cases:
        src = f"model M Real q = {text}; end M;"
        stored, stored2, printed = roundtrip(src)
        assert stored == stored2, f"{text} -> {printed}"


def test_print_expr_unary_in_argument():
    expr = ast.Binary(op="+", lhs=ast.Ref(parts=(ast.RefPart("a"),)),
                      rhs=ast.Unary(op="-", operand=ast.Ref(parts=(ast.RefPart("b"),))))
    text = print_expr(expr)
    tree, diags = parse(f"model M Real x = {text}; end M;")
    assert not diags
    stored, _ = lower(tree)
    assert stored.classes[0].components[0].modification.binding == expr
