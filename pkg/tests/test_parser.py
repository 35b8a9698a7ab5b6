from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhub.syntax import apply_edit, lower, parse
from mhub.syntax import tree as ast

from conftest import corpus_paths


def test_minimal_model_parses_clean():
    tree, diags = parse("model M Real x; equation der(x)=-x; end M;")
    assert diags == []
    assert len(list(tree.root.find_all("class_definition"))) == 1
    assert list(tree.root.error_nodes()) == []


def test_empty_input():
    tree, diags = parse("")
    assert diags == []
    assert tree.root.kind == "stored_definition"
    stored, _ = lower(tree)
    assert stored.classes == ()


def test_missing_semicolon_recovers_with_error_node():
    src = "model M Real x end M;"
    tree, diags = parse(src, "bad.mo")
    assert any(d.code == "SYN001" for d in diags)
    assert len(list(tree.root.error_nodes())) >= 1
    # the diagnostic covers the region around 'end'
    end_pos = src.index("end")
    assert any(d.start <= end_pos < d.end or d.start == end_pos for d in diags)
    # recovery still produces the class and its component
    stored, _ = lower(tree, "bad.mo")
    assert [c.name for c in stored.classes] == ["M"]
    assert [c.name for c in stored.classes[0].components] == ["x"]


def test_full_coverage_even_for_garbage():
    src = "model ) 123 ??? end ;;; within"
    tree, diags = parse(src)
    assert tree.reconstructed_text() == src
    assert diags  # definitely varied complaints


def test_child_spans_nested_and_ordered():
    src = "model M Real x = 2 + 3; end M;"
    tree, _ = parse(src)

    def check(node):
        last_end = node.span[0]
        for child in node.children:
            span = child.span if hasattr(child, "span") and isinstance(child.span, tuple) \
                else (child.start, child.end)
            if span == (0, 0) and getattr(child, "children", None) == []:
                continue
            assert node.span[0] <= span[0] <= span[1] <= node.span[1]
            assert span[0] >= last_end or span[1] == span[0]
            last_end = max(last_end, span[1])
            if hasattr(child, "children"):
                check(child)

    check(tree.root)


def test_lower_extends_with_modification():
    tree, _ = parse("model B extends A(x=3); end B;")
    stored, _ = lower(tree)
    (cls,) = stored.classes
    (ext,) = cls.extends_clauses
    assert ext.base_name == "A"
    sub = ext.modification.submod("x")
    assert sub is not None and sub.binding == ast.IntLit(3)


def test_lower_connect():
    tree, _ = parse("model C equation connect(a.p, b.n); end C;")
    stored, _ = lower(tree)
    (eq,) = stored.classes[0].equations
    assert isinstance(eq, ast.EqConnect)
    assert eq.a.dotted() == "a.p" and eq.b.dotted() == "b.n"


def test_lower_expression_forms():
    src = """
model E
  Real a = 1 + 2 * 3 ^ 2;
  Real b = if true then 1 else 2;
  Real c[3] = {1, 2, 3};
  Real d = c[2];
  Real e1 = sum(c);
  Integer f[4] = 1:4;
  String s = "x" + "y";
  Boolean g = 1 < 2 and not false;
end E;
"""
    tree, diags = parse(src)
    assert diags == []
    stored, lds = lower(tree)
    assert lds == []
    comps = {c.name: c for c in stored.classes[0].components}
    assert isinstance(comps["a"].modification.binding, ast.Binary)
    assert isinstance(comps["b"].modification.binding, ast.IfExpr)
    assert isinstance(comps["c"].modification.binding, ast.ArrayExpr)
    assert isinstance(comps["f"].modification.binding, ast.RangeExpr)


def test_unsupported_constructs_get_syn002():
    cases = [
        "operator record Complex Real re; Real im; end Complex;",
        "function f external \"C\"; end f;",
    ]
    for src in cases:
        _, diags = parse(src)
        assert any(d.code == "SYN002" for d in diags), src


def test_inner_outer_reported_as_sem010():
    tree, parse_diags = parse("model M inner Real x; end M;")
    _, lower_diags = lower(tree)
    assert any(d.code == "SEM010" for d in lower_diags)


def test_end_name_mismatch_diagnostic():
    _, diags = parse("model M end N;")
    assert any("does not match" in d.message for d in diags)


# -- applyEdit ----------------------------------------------------------------


def test_apply_edit_equals_full_reparse():
    src = "model M Real x; equation der(x)=-x; end M;"
    tree, _ = parse(src)
    pos = src.index("M")
    edited_tree, _ = apply_edit(tree, (pos, pos + 1), "Mx")
    full, _ = parse(src[:pos] + "Mx" + src[pos + 1:])
    assert lower(edited_tree)[0] == lower(full)[0]
    assert edited_tree.reconstructed_text() == full.text


def test_apply_edit_inside_string_literal():
    src = 'model M constant String s = "hello"; end M; model N end N;'
    tree, _ = parse(src)
    pos = src.index("hello")
    edited, _ = parse(src[:pos] + "h3llo" + src[pos + len("hello"):])
    applied, _ = apply_edit(tree, (pos, pos + 5), "h3llo")
    ed_stored, _ = lower(applied)
    full_stored, _ = lower(edited)
    assert ed_stored == full_stored
    # sibling class N unaffected
    assert ed_stored.classes[1].name == "N"


def test_apply_edit_identity():
    src = "model M Real x; end M;"
    tree, _ = parse(src)
    same, _ = apply_edit(tree, (5, 5), "")
    assert same.text == src
    assert lower(same)[0] == lower(tree)[0]


def test_apply_edit_out_of_range():
    tree, _ = parse("model M end M;")
    with pytest.raises(ValueError):
        apply_edit(tree, (0, 10_000), "x")


def test_randomized_edit_sequences_match_full_reparse():
    rng = random.Random(7)
    with open(corpus_paths()[0], encoding="utf-8") as fh:
        text = fh.read()
    tree, _ = parse(text)
    snippets = ["x", ";", " model ", "der(", '"s"', "123", "", "\n"]
    for _ in range(40):
        start = rng.randrange(0, len(tree.text) + 1)
        end = rng.randrange(start, min(len(tree.text), start + 10) + 1)
        snippet = rng.choice(snippets)
        tree, _ = apply_edit(tree, (start, end), snippet)
        fresh, _ = parse(tree.text)
        assert lower(tree)[0] == lower(fresh)[0]
        assert tree.reconstructed_text() == tree.text


# -- totality ------------------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=400))
def test_parse_total_on_arbitrary_text(text):
    tree, _ = parse(text)
    assert tree.reconstructed_text() == text


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=400))
def test_parse_total_on_arbitrary_bytes(data):
    text = data.decode("utf-8", errors="replace")
    tree, _ = parse(text)
    assert tree.reconstructed_text() == text
