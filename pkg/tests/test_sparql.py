from __future__ import annotations

import pytest

from mhub.kgraph import GraphStore, Iri, SparqlError, Triple, materialize_entailments, query, vocab
from mhub.kgraph.terms import Literal, XSD_DOUBLE, XSD_INTEGER

from test_kgraph import chain_store, listing_graph

MO = "PREFIX mo: <https://modelihub.example/mo#>\n"

MASS_BUDGET_QUERY = MO + """
SELECT ?subsystem ?initialMass ?margin ?budgetMass WHERE {
  ?row mo:instanceOf <https://modelihub.example/c/acme.engine.MassBudget.MassBudget> .
  ?row mo:hasChild ?s . ?s mo:name "subsystem" . ?s mo:value ?subsystem .
  ?row mo:hasChild ?im . ?im mo:name "initialMass" . ?im mo:value ?initialMass .
  ?row mo:hasChild ?mg . ?mg mo:name "margin" . ?mg mo:value ?margin .
  ?row mo:hasChild ?bm . ?bm mo:name "budgetMass" . ?bm mo:value ?budgetMass .
}
ORDER BY DESC(?budgetMass)
"""


def test_superclass_query_on_three_chain():
    store = chain_store()
    materialize_entailments(store)
    result = query(store, MO + "SELECT ?sup WHERE { "
                   "<https://modelihub.example/c/M> mo:extendsTransitive ?sup }")
    names = {row["sup"].value.rsplit("/", 1)[-1] for row in result.rows}
    assert names == {"B", "C"}


def test_ask_irreflexive():
    store = chain_store()
    materialize_entailments(store)
    result = query(store, MO + "ASK { <https://modelihub.example/c/M> "
                   "mo:extendsTransitive <https://modelihub.example/c/M> }")
    assert result.boolean is False
    result2 = query(store, MO + "ASK { <https://modelihub.example/c/M> "
                    "mo:extendsTransitive <https://modelihub.example/c/C> }")
    assert result2.boolean is True


def test_mass_budget_table():
    store = listing_graph()
    result = query(store, MASS_BUDGET_QUERY)
    assert result.variables == ["subsystem", "initialMass", "margin", "budgetMass"]
    assert len(result.rows) == 2
    assert result.rows[0]["subsystem"].lexical == "Payload"  # 26.0 > 23.0
    assert result.rows[0]["budgetMass"] == Literal("26.0", XSD_DOUBLE)
    assert result.rows[1]["subsystem"].lexical == "Structure"


def test_value_scan_over_listing_graph():
    # The operation contract types every scalar constant (strings included),
    # so the full scan sees 2 rows x 4 fields; 6 of those are numeric and the
    # largest numeric value is 26.0.
    store = listing_graph()
    result = query(store, MO + "SELECT ?s ?m WHERE { ?s mo:value ?m } ORDER BY ?m")
    assert len(result.rows) == 8
    numeric = [r for r in result.rows if r["m"].datatype == XSD_DOUBLE]
    assert len(numeric) == 6
    values = [float(r["m"].lexical) for r in numeric]
    assert max(values) == 26.0
    # numbers order before strings, so the numeric block comes first, sorted
    assert values == sorted(values)


def test_filter_comparison():
    store = listing_graph()
    result = query(store, MO + "SELECT ?s ?m WHERE { ?s mo:value ?m . FILTER(?m > 20.0) }")
    assert {float(r["m"].lexical) for r in result.rows} == {23.0, 26.0}


def test_filter_regex():
    store = listing_graph()
    result = query(store, MO + 'SELECT ?s WHERE { ?s mo:value ?v . '
                   'FILTER(regex(?v, "^pay", "i")) }')
    assert len(result.rows) == 1


def test_filter_logical_and_isnumeric():
    store = listing_graph()
    result = query(store, MO + "SELECT ?m WHERE { ?s mo:value ?m . "
                   "FILTER(isNumeric(?m) && (?m < 7.0 || ?m > 25.0)) }")
    assert {float(r["m"].lexical) for r in result.rows} == {6.9, 26.0}


def test_optional_keeps_unmatched_rows():
    store = GraphStore()
    store.add(Triple(Iri("urn:a"), vocab.NAME, Literal("a")))
    store.add(Triple(Iri("urn:b"), vocab.NAME, Literal("b")))
    store.add(Triple(Iri("urn:a"), vocab.UNIT, Literal("kg")))
    result = query(store, MO + """
SELECT ?n ?u WHERE { ?s mo:name ?n . OPTIONAL { ?s mo:unit ?u } } ORDER BY ?n
""")
    assert len(result.rows) == 2
    assert result.rows[0]["u"].lexical == "kg"
    assert "u" not in result.rows[1]


def test_optional_with_bound_filter():
    store = GraphStore()
    store.add(Triple(Iri("urn:a"), vocab.NAME, Literal("a")))
    store.add(Triple(Iri("urn:a"), vocab.UNIT, Literal("kg")))
    store.add(Triple(Iri("urn:b"), vocab.NAME, Literal("b")))
    result = query(store, MO + "SELECT ?n WHERE { ?s mo:name ?n . "
                   "OPTIONAL { ?s mo:unit ?u } FILTER(!bound(?u)) }")
    assert [r["n"].lexical for r in result.rows] == ["b"]


def test_distinct_limit_offset():
    store = GraphStore()
    for i in range(5):
        store.add(Triple(Iri(f"urn:{i}"), vocab.VARIABILITY, Literal("constant")))
    result = query(store, MO + "SELECT DISTINCT ?v WHERE { ?s mo:variability ?v }")
    assert len(result.rows) == 1
    paged = query(store, MO + "SELECT ?s WHERE { ?s mo:variability ?v } "
                  "ORDER BY ?s LIMIT 2 OFFSET 1")
    assert [r["s"].value for r in paged.rows] == ["urn:1", "urn:2"]


def test_predicate_path_semicolon_and_comma():
    store = GraphStore()
    store.add(Triple(Iri("urn:x"), vocab.NAME, Literal("x")))
    store.add(Triple(Iri("urn:x"), vocab.UNIT, Literal("m")))
    store.add(Triple(Iri("urn:x"), vocab.UNIT, Literal("mm")))
    result = query(store, MO + 'ASK { <urn:x> mo:name "x" ; mo:unit "m", "mm" }')
    assert result.boolean is True


def test_insertion_order_irrelevant():
    t1 = Triple(Iri("urn:a"), vocab.NAME, Literal("a"))
    t2 = Triple(Iri("urn:b"), vocab.NAME, Literal("b"))
    s1 = GraphStore()
    s1.add(t1)
    s1.add(t2)
    s2 = GraphStore()
    s2.add(t2)
    s2.add(t1)
    q = MO + "SELECT ?s ?n WHERE { ?s mo:name ?n }"
    assert query(s1, q).rows == query(s2, q).rows


def test_typed_literal_terms_in_query():
    store = GraphStore()
    store.add(Triple(Iri("urn:n"), vocab.VALUE, Literal("3", XSD_INTEGER)))
    r = query(store, MO + 'ASK { ?s mo:value "3"^^<http://www.w3.org/2001/XMLSchema#integer> }')
    assert r.boolean is True
    r2 = query(store, "PREFIX xsd: <http://www.w3.org/2001/XMLSchema#>\n"
               + MO + 'ASK { ?s mo:value "3"^^xsd:integer }')
    assert r2.boolean is True


def test_select_star():
    store = GraphStore()
    store.add(Triple(Iri("urn:a"), vocab.NAME, Literal("a")))
    result = query(store, "SELECT * WHERE { ?s ?p ?o }")
    assert set(result.variables) == {"s", "p", "o"}


def test_parse_error_carries_position():
    with pytest.raises(SparqlError) as err:
        query(GraphStore(), "SELECT ?x WHERE { ?x ?y }")
    assert "offset" in str(err.value)
    with pytest.raises(SparqlError):
        query(GraphStore(), "FROB ?x WHERE { }")


def test_unknown_prefix_rejected():
    with pytest.raises(SparqlError):
        query(GraphStore(), "SELECT ?s WHERE { ?s nope:name ?n }")


def test_sparql_json_shape():
    store = listing_graph()
    doc = query(store, MASS_BUDGET_QUERY).to_sparql_json()
    assert doc["head"]["vars"] == ["subsystem", "initialMass", "margin", "budgetMass"]
    bindings = doc["results"]["bindings"]
    assert len(bindings) == 2
    first = bindings[0]["budgetMass"]
    assert first == {"type": "literal", "value": "26.0",
                     "datatype": "http://www.w3.org/2001/XMLSchema#double"}
    ask_doc = query(store, "ASK { ?s ?p ?o }").to_sparql_json()
    assert ask_doc == {"head": {}, "boolean": True}
