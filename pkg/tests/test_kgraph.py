from __future__ import annotations

import random

import pytest

from mhub.adapters import adapt_csv
from mhub.frontend import Instantiator, build_class_tree
from mhub.kgraph import (
    ENTAILED,
    EntailmentError,
    GraphStore,
    Iri,
    Triple,
    emit_class_triples,
    emit_instance_triples,
    export_graph,
    load_graph,
    materialize_entailments,
    rematerialize,
    vocab,
)
from mhub.kgraph.terms import RDF_TYPE, Literal, XSD_DOUBLE

from conftest import LISTING1_CSV, load_units


def listing_graph():
    frag = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    tree, diags = build_class_tree([(frag.ast, frag.provenance_uri)])
    assert not diags
    inst = Instantiator(tree)
    itree = inst.instantiate("acme.engine.MassBudget")
    store = GraphStore()
    store.add_all(emit_class_triples(tree))
    store.add_all(emit_instance_triples(itree))
    materialize_entailments(store)
    return store


def test_class_triples_for_listing_package():
    frag = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
    tree, _ = build_class_tree([(frag.ast, frag.provenance_uri)])
    triples = set(emit_class_triples(tree))
    pkg = vocab.class_iri("acme.engine.MassBudget")
    rec = vocab.class_iri("acme.engine.MassBudget.MassBudget")
    assert Triple(pkg, Iri(RDF_TYPE), vocab.PACKAGE) in triples
    assert Triple(rec, Iri(RDF_TYPE), vocab.RECORD) in triples
    # provenance: the fragment's source file is the package's mo:source
    assert Triple(pkg, vocab.SOURCE, Literal("acme/engine/MassBudget.csv")) in triples
    # four components, each carrying type/variability/causality
    comps = [t for t in triples if t.subject == rec and t.predicate == vocab.HAS_COMPONENT]
    assert len(comps) == 4


def test_extends_edge_emitted():
    tree, _ = build_class_tree(load_units("model A end A; model B extends A; end B;"))
    triples = set(emit_class_triples(tree))
    assert Triple(vocab.class_iri("B"), vocab.EXTENDS, vocab.class_iri("A")) in triples


def test_empty_tree_emits_nothing():
    tree, _ = build_class_tree([])
    assert emit_class_triples(tree) == []


def test_instance_value_triple():
    store = listing_graph()
    subject = vocab.instance_iri("acme.engine.MassBudget", "root[1].budgetMass")
    hits = store.match(s=subject, p=vocab.VALUE)
    assert [t.object for t in hits] == [Literal("26.0", XSD_DOUBLE)]


def test_parameter_without_binding_has_no_value_triple():
    tree, _ = build_class_tree(load_units("model M parameter Real p; end M;"))
    inst = Instantiator(tree)
    itree = inst.instantiate("M")
    triples = emit_instance_triples(itree)
    assert not [t for t in triples if t.predicate == vocab.VALUE]
    assert [t for t in triples if t.predicate == vocab.HAS_CHILD]


def test_scalar_model_one_child():
    tree, _ = build_class_tree(load_units("model M Real x; end M;"))
    itree = Instantiator(tree).instantiate("M")
    triples = emit_instance_triples(itree)
    children = [t for t in triples if t.predicate == vocab.HAS_CHILD]
    assert len(children) == 1


# -- entailment ------------------------------------------------------------------


def chain_store():
    store = GraphStore()
    store.add(Triple(vocab.class_iri("M"), vocab.EXTENDS, vocab.class_iri("B")))
    store.add(Triple(vocab.class_iri("B"), vocab.EXTENDS, vocab.class_iri("C")))
    store.add(Triple(Iri("https://modelihub.example/i/x"), vocab.INSTANCE_OF,
                     vocab.class_iri("M")))
    return store


def test_three_chain_closure():
    store = chain_store()
    added = materialize_entailments(store)
    ext = {(t.subject.value.rsplit("/", 1)[-1], t.object.value.rsplit("/", 1)[-1])
           for t in store.graph(ENTAILED) if t.predicate == vocab.EXTENDS_TRANSITIVE}
    assert ext == {("M", "B"), ("M", "C"), ("B", "C")}
    inst = {t.object.value.rsplit("/", 1)[-1]
            for t in store.graph(ENTAILED) if t.predicate == vocab.INSTANCE_OF_TRANSITIVE}
    assert inst == {"M", "B", "C"}
    assert added == 6


def test_idempotent():
    store = chain_store()
    materialize_entailments(store)
    assert materialize_entailments(store) == 0


def test_cycle_detected():
    store = GraphStore()
    store.add(Triple(vocab.class_iri("A"), vocab.EXTENDS, vocab.class_iri("B")))
    store.add(Triple(vocab.class_iri("B"), vocab.EXTENDS, vocab.class_iri("A")))
    with pytest.raises(EntailmentError) as err:
        materialize_entailments(store)
    assert "cycle" in str(err.value)


def brute_force_reachability(edges: dict[int, set[int]], n: int) -> set[tuple[int, int]]:
    """Independent oracle: DFS from every node."""
    out = set()
    for start in range(n):
        stack = list(edges.get(start, ()))
        seen = set()
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            out.add((start, node))
            stack.extend(edges.get(node, ()))
    return out


def random_dag(rng: random.Random, n: int, density: float) -> dict[int, set[int]]:
    edges: dict[int, set[int]] = {}
    for i in range(n):
        for j in range(i + 1, n):  # i -> j with i < j keeps it acyclic
            if rng.random() < density:
                edges.setdefault(i, set()).add(j)
    return edges


@pytest.mark.parametrize("seed", range(10))
def test_closure_matches_brute_force_on_random_dags(seed):
    rng = random.Random(seed)
    n = rng.randint(2, 60)
    density = rng.choice([0.02, 0.05, 0.1, 0.3])
    edges = random_dag(rng, n, density)
    store = GraphStore()
    for src, targets in edges.items():
        for dst in targets:
            store.add(Triple(vocab.class_iri(f"N{src}"), vocab.EXTENDS,
                             vocab.class_iri(f"N{dst}")))
    materialize_entailments(store)
    got = {(int(t.subject.value.rsplit("/N", 1)[-1]), int(t.object.value.rsplit("/N", 1)[-1]))
           for t in store.graph(ENTAILED) if t.predicate == vocab.EXTENDS_TRANSITIVE}
    assert got == brute_force_reachability(edges, n)


def test_monotonic_rematerialization():
    store = chain_store()
    materialize_entailments(store)
    before = store.graph(ENTAILED)
    # adding an edge never removes entailed triples
    store.add(Triple(vocab.class_iri("C"), vocab.EXTENDS, vocab.class_iri("D")))
    rematerialize(store)
    assert before <= store.graph(ENTAILED)
    # rebuild-from-scratch equals fresh materialization
    fresh = GraphStore()
    for t in store.graph("asserted"):
        fresh.add(t)
    materialize_entailments(fresh)
    assert fresh.graph(ENTAILED) == store.graph(ENTAILED)


# -- serialization ------------------------------------------------------------------


def test_ntriples_round_trip():
    store = listing_graph()
    data = export_graph(store, "ntriples", "both")
    reloaded = GraphStore()
    load_graph(reloaded, data)
    assert reloaded.all_triples() == store.all_triples()
    assert data.decode().count("\n") == len(store)


def test_turtle_round_trip():
    store = listing_graph()
    data = export_graph(store, "turtle", "asserted")
    reloaded = GraphStore()
    load_graph(reloaded, data)
    assert reloaded.all_triples() == store.graph("asserted")


def test_export_empty_store():
    store = GraphStore()
    assert export_graph(store, "ntriples", "both") == b""
    turtle = export_graph(store, "turtle", "both").decode()
    assert "@prefix" in turtle


def test_literal_escaping_round_trip():
    store = GraphStore()
    tricky = 'quote " backslash \\ newline \n tab \t'
    store.add(Triple(Iri("urn:s"), vocab.NAME, Literal(tricky)))
    for fmt in ("ntriples", "turtle"):
        reloaded = GraphStore()
        load_graph(reloaded, export_graph(store, fmt, "both"))
        assert reloaded.all_triples() == store.all_triples(), fmt


def test_store_pattern_match():
    store = chain_store()
    assert len(store.match(p=vocab.EXTENDS)) == 2
    assert len(store.match(s=vocab.class_iri("M"))) == 1
    assert len(store.match()) == 3
    assert store.match(s=vocab.class_iri("M"), p=vocab.EXTENDS,
                       o=vocab.class_iri("B")) != []
