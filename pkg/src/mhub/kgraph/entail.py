"""Materialized entailments: transitive extends closure and instance-of
composition, stored in the separate "entailed" graph."""
from __future__ import annotations

from collections import defaultdict

from .store import ENTAILED, GraphStore
from .terms import Iri, Triple
from . import vocab


class EntailmentError(Exception):
    pass


def materialize_entailments(store: GraphStore) -> int:
    """(Re)build the entailed graph; returns the number of triples added.

    Idempotent: a second run over an unchanged store adds zero triples.
    Raises EntailmentError when the extends relation has a cycle.
    """
    with store.lock:
        extends: dict[str, set[str]] = defaultdict(set)
        for t in store.graph("asserted"):
            if t.predicate == vocab.EXTENDS and isinstance(t.object, Iri):
                extends[t.subject.value].add(t.object.value)

        closure = _transitive_closure(extends)

        added = 0
        for sub, supers in sorted(closure.items()):
            for sup in sorted(supers):
                if store.add(Triple(Iri(sub), vocab.EXTENDS_TRANSITIVE, Iri(sup)), ENTAILED):
                    added += 1

        for t in list(store.graph("asserted")):
            if t.predicate == vocab.INSTANCE_OF and isinstance(t.object, Iri):
                if store.add(Triple(t.subject, vocab.INSTANCE_OF_TRANSITIVE, t.object), ENTAILED):
                    added += 1
                for sup in sorted(closure.get(t.object.value, ())):
                    if store.add(Triple(t.subject, vocab.INSTANCE_OF_TRANSITIVE, Iri(sup)),
                                 ENTAILED):
                        added += 1
        return added


def rematerialize(store: GraphStore) -> int:
    """Drop and rebuild the entailed graph (after asserted-graph changes)."""
    with store.lock:
        store.clear(ENTAILED)
        return materialize_entailments(store)


def _transitive_closure(edges: dict[str, set[str]]) -> dict[str, set[str]]:
    """Irreflexive transitive closure by DFS with cycle detection."""
    closure: dict[str, set[str]] = {}
    visiting: set[str] = set()

    def visit(node: str, trail: tuple[str, ...]) -> set[str]:
        if node in closure:
            return closure[node]
        if node in visiting:
            start = trail.index(node)
            cycle = " -> ".join(trail[start:] + (node,))
            raise EntailmentError(f"extends cycle: {cycle}")
        visiting.add(node)
        reach: set[str] = set()
        for target in edges.get(node, ()):
            reach.add(target)
            reach |= visit(target, trail + (node,))
        visiting.discard(node)
        closure[node] = reach
        return reach

    for node in sorted(edges):
        visit(node, ())
    return closure
