from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mhub.adapters import (
    AdapterError,
    adapt_csv,
    adapt_json,
    default_registry,
    infer_namespace,
    sanitize_identifier,
)
from mhub.frontend import Instantiator, build_class_tree
from mhub.syntax import lower, parse
from mhub.syntax import tree as ast

from conftest import LISTING1_CSV, LISTING2_JSON


def test_sanitize_identifier_examples():
    assert sanitize_identifier("initial-mass") == "initialMass"
    assert sanitize_identifier("budget-mass") == "budgetMass"
    assert sanitize_identifier("model") == "model_"
    assert sanitize_identifier("snake_case_name") == "snakeCaseName"
    assert sanitize_identifier("two words") == "twoWords"
    assert sanitize_identifier("MassBudget") == "MassBudget"
    assert sanitize_identifier("1st") == "_1st"
    assert sanitize_identifier("weird:chars!") == "weirdchars"


def test_sanitize_identifier_empty_rejected():
    with pytest.raises(AdapterError):
        sanitize_identifier("---")
    with pytest.raises(AdapterError):
        sanitize_identifier("")


def test_infer_namespace():
    assert infer_namespace("acme/engine/MassBudget.csv") == ("acme.engine", "MassBudget")
    assert infer_namespace("data/mass-budget.csv") == ("data", "massBudget")
    assert infer_namespace("Top.csv") == ("", "Top")
    assert infer_namespace("/ws/acme/Data.csv", "/ws") == ("acme", "Data")


def test_csv_fragment_matches_hand_written_modelica():
    frag = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    hand = """
within acme.engine;
package MassBudget
  record MassBudget
    String subsystem;
    Real initialMass;
    Real margin;
    Real budgetMass;
  end MassBudget;
  constant MassBudget root[:] = {
    MassBudget(subsystem = "Payload", initialMass = 18.2, margin = 7.8, budgetMass = 26.0),
    MassBudget(subsystem = "Structure", initialMass = 16.1, margin = 6.9, budgetMass = 23.0)
  };
end MassBudget;
"""
    tree, diags = parse(hand, "hand.mo")
    assert not diags
    stored, _ = lower(tree, "hand.mo")
    assert frag.ast == stored


def test_fragment_invariant_text_lowers_to_ast():
    frag = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    tree, diags = parse(frag.modelica_text, frag.provenance_uri)
    assert diags == []
    stored, _ = lower(tree, frag.provenance_uri)
    assert stored == frag.ast
    assert frag.provenance_uri == "acme/engine/MassBudget.csv"
    assert frag.package_qname == "acme.engine.MassBudget"


def test_csv_and_json_agree_on_listing_data():
    frag_csv = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    frag_json = adapt_json(LISTING2_JSON, "acme/engine/MassBudget.json")
    assert frag_csv.ast == frag_json.ast  # all numbers carry fractions -> Real both ways


def test_csv_instantiates_to_expected_values():
    frag = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    tree, diags = build_class_tree([(frag.ast, frag.provenance_uri)])
    assert not diags
    inst = Instantiator(tree)
    itree = inst.instantiate("acme.engine.MassBudget")
    assert not inst.diags
    root = itree.root.child("root")
    assert root.dimensions == (2,)
    row1 = {c.name: c.evaluated for c in root.child("root[1]").children}
    assert row1 == {"subsystem": "Payload", "initialMass": 18.2, "margin": 7.8,
                    "budgetMass": 26.0}
    row2 = {c.name: c.evaluated for c in root.child("root[2]").children}
    assert row2 == {"subsystem": "Structure", "initialMass": 16.1, "margin": 6.9,
                    "budgetMass": 23.0}


def test_header_only_csv():
    frag = adapt_csv(b"a,b\n", "x.csv")
    record = frag.ast.classes[0].nested_classes[0]
    assert [(c.type_name, c.name) for c in record.components] == [("String", "a"), ("String", "b")]
    binding = frag.ast.classes[0].components[0].modification.binding
    assert binding == ast.ArrayExpr(elements=())


def test_csv_type_inference():
    frag = adapt_csv(b"i,r,b,s,m\n1,1.5,true,x,1\n2,2e3,false,y,z\n", "t.csv")
    record = frag.ast.classes[0].nested_classes[0]
    types = {c.name: c.type_name for c in record.components}
    assert types == {"i": "Integer", "r": "Real", "b": "Boolean", "s": "String",
                     "m": "String"}  # any non-numeric cell demotes the column


def test_csv_errors():
    with pytest.raises(AdapterError):
        adapt_csv(b"", "x.csv")
    with pytest.raises(AdapterError):
        adapt_csv(b"a,b\n1\n", "x.csv")  # ragged row
    with pytest.raises(AdapterError):
        adapt_csv(b"a-b,a_b\n1,2\n", "x.csv")  # both sanitize to aB
    with pytest.raises(AdapterError):
        adapt_csv(b"a,b\n1,\n2,3\n", "x.csv")  # empty cell in a numeric column


def test_csv_rfc4180_quoting():
    frag = adapt_csv(b'name,note\n"Smith, Jane","said ""hi""\nand left"\n', "q.csv")
    call = frag.ast.classes[0].components[0].modification.binding.elements[0]
    values = dict(call.named_args)
    assert values["name"] == ast.StringLit("Smith, Jane")
    assert values["note"] == ast.StringLit('said "hi"\nand left')


def test_csv_bom_and_crlf():
    frag = adapt_csv(b"\xef\xbb\xbfa,b\r\n1,2\r\n", "bom.csv")
    record = frag.ast.classes[0].nested_classes[0]
    assert [c.name for c in record.components] == ["a", "b"]


def test_json_single_object():
    frag = adapt_json(b'{"on": true}', "cfg.json")
    pkg = frag.ast.classes[0]
    assert pkg.components[0].array_subscripts == ()
    record = pkg.nested_classes[0]
    assert [(c.type_name, c.name) for c in record.components] == [("Boolean", "on")]


def test_json_integer_vs_real():
    frag = adapt_json(b'[{"n": 1, "x": 1.0}, {"n": 2, "x": 2.5}]', "t.json")
    types = {c.name: c.type_name for c in frag.ast.classes[0].nested_classes[0].components}
    assert types == {"n": "Integer", "x": "Real"}


def test_json_numeric_columns_unify():
    frag = adapt_json(b'[{"x": 1}, {"x": 2.5}]', "t.json")
    types = {c.name: c.type_name for c in frag.ast.classes[0].nested_classes[0].components}
    assert types == {"x": "Real"}


def test_json_nested_object_and_array():
    frag = adapt_json(b'{"pos": {"x": 1.0, "y": 2.0}, "tags": ["a", "b"]}', "n.json")
    pkg = frag.ast.classes[0]
    record = pkg.nested_classes[0]
    names = {c.name: c for c in record.components}
    assert names["pos"].type_name == "Pos"
    assert names["tags"].type_name == "String"
    assert names["tags"].array_subscripts == (ast.IntLit(2),)


def test_json_errors():
    with pytest.raises(AdapterError):
        adapt_json(b'[{"a": 1}, {"a": "x"}]', "t.json")  # mixed column types
    with pytest.raises(AdapterError):
        adapt_json(b'[{"a": 1}, {"b": 2}]', "t.json")  # different key sets
    with pytest.raises(AdapterError):
        adapt_json(b'{"a": null}', "t.json")
    with pytest.raises(AdapterError):
        adapt_json(b"[1, 2]", "t.json")
    with pytest.raises(AdapterError):
        adapt_json(b"not json", "t.json")


def test_registry_dispatch():
    registry = default_registry()
    assert registry.extensions() == ["csv", "json"]
    assert registry.for_file("a/b.CSV") is not None
    assert registry.for_file("a/b.mo") is None


def test_determinism():
    a = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    b = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    assert a.modelica_text == b.modelica_text


# -- property: arbitrary well-formed tables always produce valid fragments ------

_header = st.lists(
    st.text(alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ", min_size=1,
            max_size=8),
    min_size=1, max_size=5, unique_by=lambda s: s.lower())

_cell = st.one_of(
    st.integers(min_value=-10**6, max_value=10**6).map(str),
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).map(repr),
    st.sampled_from(["true", "false", "word", "x y", "a-b"]),
)


@settings(max_examples=50, deadline=None)
@given(header=_header, rows=st.lists(st.lists(_cell, min_size=1, max_size=5), max_size=4))
def test_fragment_validity_fuzz(header, rows):
    width = len(header)
    table = [",".join(header)]
    for row in rows:
        row = (row + ["0"] * width)[:width]
        table.append(",".join(row))
    data = ("\n".join(table) + "\n").encode()
    try:
        frag = adapt_csv(data, "fuzz/Table.csv")
    except AdapterError:
        return  # rejected inputs are fine; crashing is not
    tree, diags = parse(frag.modelica_text, "fuzz")
    assert diags == []
    ctree, cdiags = build_class_tree([(frag.ast, frag.provenance_uri)])
    assert not cdiags
    inst = Instantiator(ctree)
    itree = inst.instantiate(frag.package_qname)
    assert not inst.diags
    root = itree.root.child("root")
    assert root is not None and root.dimensions == (len(rows),)
