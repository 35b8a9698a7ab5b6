from __future__ import annotations

import json

import pytest

from mhub.adapters import adapt_csv
from mhub.frontend import Instantiator, build_class_tree
from mhub.views import (
    KbEnv,
    ViewError,
    composition_view,
    render_kb_page,
    specialization_view,
    table_view,
)

from conftest import LISTING1_CSV, compile_class, load_units
from test_kgraph import listing_graph
from test_sparql import MASS_BUDGET_QUERY


def listing_env() -> KbEnv:
    frag = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    tree, _ = build_class_tree([(frag.ast, frag.provenance_uri)])
    return KbEnv(class_tree=tree)


# -- composition -----------------------------------------------------------------


def test_composition_counts_depth_one():
    src = "model Sub Real q; end Sub; model Top Sub a; Sub b; end Top;"
    _, itree = compile_class(src, "Top")
    doc = composition_view(itree, "", 1)
    assert len(doc.nodes) == 3
    comp_edges = [e for e in doc.edges if e["kind"] == "composition"]
    assert len(comp_edges) == 2
    assert not [e for e in doc.edges if e["kind"] == "connection"]


def test_composition_connection_edge():
    src = """connector Pin Real v; flow Real i; end Pin;
model Comp Pin p; end Comp;
model Two Comp a; Comp b; equation connect(a.p, b.p); end Two;"""
    _, itree = compile_class(src, "Two")
    doc = composition_view(itree, "", 1)
    connections = [e for e in doc.edges if e["kind"] == "connection"]
    assert connections == [{"from": "a", "to": "b", "kind": "connection"}]


def test_composition_depth_matches_bfs_oracle():
    src = """model L Real x; end L;
model Mid L l1; L l2; end Mid;
model Top Mid m1; Mid m2; end Top;"""
    _, itree = compile_class(src, "Top")

    def bfs_count(depth):
        frontier = [itree.root]
        seen = 1
        for _ in range(depth):
            nxt = []
            for node in frontier:
                nxt.extend(node.children)
            seen += len(nxt)
            frontier = nxt
        return seen

    for depth in (1, 2, 3):
        doc = composition_view(itree, "", depth)
        assert len(doc.nodes) == bfs_count(depth), depth


def test_composition_subtree_root():
    src = "model L Real x; end L; model T L child; end T;"
    _, itree = compile_class(src, "T")
    doc = composition_view(itree, "child", 1)
    assert doc.nodes[0]["id"] == "child"


def test_composition_unknown_root():
    src = "model T Real x; end T;"
    _, itree = compile_class(src, "T")
    with pytest.raises(ViewError):
        composition_view(itree, "ghost", 1)


def test_composition_json_schema_valid():
    src = "model Sub Real q; end Sub; model Top Sub a; end Top;"
    _, itree = compile_class(src, "Top")
    doc = composition_view(itree, "", 2)
    doc.validate()
    payload = json.loads(json.dumps(doc.to_json()))
    assert {n["id"] for n in payload["nodes"]} >= {"<root>", "a"}


# -- specialization ----------------------------------------------------------------


def spec_tree():
    tree, _ = build_class_tree(load_units(
        "model A end A; model B extends A; end B; model C extends A; end C; "
        "model D extends B; extends C; end D;"))
    return tree


def test_specialization_chain():
    tree, _ = build_class_tree(load_units(
        "model C end C; model B extends C; end B; model M extends B; end M;"))
    doc = specialization_view(tree, "M")
    assert {n["id"] for n in doc.nodes} == {"M", "B", "C"}
    assert len(doc.edges) == 2


def test_specialization_isolated_class():
    tree, _ = build_class_tree(load_units("model Lonely end Lonely;"))
    doc = specialization_view(tree, "Lonely")
    assert len(doc.nodes) == 1 and doc.edges == []


def test_specialization_diamond():
    doc = specialization_view(spec_tree(), "D")
    assert len(doc.nodes) == 4  # A appears once
    assert len(doc.edges) == 4


def test_specialization_direct_subclasses():
    doc = specialization_view(spec_tree(), "A")
    assert {n["id"] for n in doc.nodes} == {"A", "B", "C"}
    assert all(e["to"] == "A" for e in doc.edges)


def test_specialization_unknown_class():
    with pytest.raises(ViewError):
        specialization_view(spec_tree(), "Nope")


# -- tables ---------------------------------------------------------------------


def test_table_view_listing_query():
    doc = table_view(listing_graph(), MASS_BUDGET_QUERY)
    assert [c["key"] for c in doc.columns] == ["subsystem", "initialMass", "margin",
                                               "budgetMass"]
    assert len(doc.rows) == 2
    assert doc.rows[0]["subsystem"]["value"] == "Payload"
    assert doc.rows[0]["budgetMass"]["value"] == 26.0
    assert doc.rows[1]["budgetMass"]["value"] == 23.0


def test_table_view_empty_solutions_keep_headers():
    doc = table_view(listing_graph(),
                     'PREFIX mo: <https://modelihub.example/mo#>\n'
                     'SELECT ?x WHERE { ?x mo:name "no-such-name" }')
    assert doc.columns == [{"key": "x", "label": "x"}]
    assert doc.rows == []


def test_table_view_column_labels():
    doc = table_view(listing_graph(), MASS_BUDGET_QUERY,
                     column_spec={"budgetMass": "Budget [kg]"})
    labels = {c["key"]: c["label"] for c in doc.columns}
    assert labels["budgetMass"] == "Budget [kg]"


# -- kb pages ----------------------------------------------------------------------


def test_kb_budget_example():
    page = render_kb_page(
        "Budget is {{ acme.engine.MassBudget:root[1].budgetMass }}", listing_env())
    assert page.text == "Budget is 26"
    assert page.errors == []
    assert page.expressions[0]["value"] == 26.0


def test_kb_sum_over_record_field():
    page = render_kb_page(
        "{{ acme.engine.MassBudget:sum(root.budgetMass) }}", listing_env())
    assert page.text == "49"


def test_kb_no_markers_identity():
    text = "# Title\n\nplain *markdown*, no markers { single braces } \n"
    page = render_kb_page(text, listing_env())
    assert page.text == text


def test_kb_error_rendered_inline():
    page = render_kb_page("value: {{ acme.engine.MassBudget:nonexistent }}", listing_env())
    assert "⟦error:" in page.text
    assert page.errors and page.errors[0]["exprText"] == "acme.engine.MassBudget:nonexistent"


def test_kb_real_formatting():
    env = listing_env()
    page = render_kb_page("{{ acme.engine.MassBudget:root[1].initialMass }}", env)
    assert page.text == "18.2"  # non-integral keeps its shortest decimal form
    page2 = render_kb_page("{{ acme.engine.MassBudget:root[1].budgetMass / 2 }}", env)
    assert page2.text == "13"


def test_kb_deterministic():
    env = listing_env()
    texts = {render_kb_page("{{ acme.engine.MassBudget:sum(root.margin) }}", env).text
             for _ in range(5)}
    assert texts == {"14.7"}
