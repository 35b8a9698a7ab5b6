"""In-memory triple store with pattern indexes and named graphs.

Two graphs: "asserted" holds emitted triples, "entailed" holds materialized
closures; queries run over their union. Single-writer / multi-reader: loads
and materialization take the write lock, queries take snapshots.
"""
from __future__ import annotations

import threading
from collections import defaultdict
from typing import Iterable, Optional

from .terms import Iri, Term, Triple

ASSERTED = "asserted"
ENTAILED = "entailed"


class GraphStore:
    def __init__(self):
        self._lock = threading.RLock()
        self._graphs: dict[str, set[Triple]] = {ASSERTED: set(), ENTAILED: set()}
        self._by_s: dict[str, set[Triple]] = defaultdict(set)
        self._by_p: dict[str, set[Triple]] = defaultdict(set)
        self._by_o: dict[Term, set[Triple]] = defaultdict(set)

    # -- mutation -------------------------------------------------------------

    def add(self, triple: Triple, graph: str = ASSERTED) -> bool:
        with self._lock:
            if triple in self._graphs[ASSERTED] or triple in self._graphs[ENTAILED]:
                return False
            self._graphs[graph].add(triple)
            self._index(triple)
            return True

    def add_all(self, triples: Iterable[Triple], graph: str = ASSERTED) -> int:
        count = 0
        with self._lock:
            for t in triples:
                if self.add(t, graph):
                    count += 1
        return count

    def clear(self, graph: Optional[str] = None) -> None:
        with self._lock:
            graphs = [graph] if graph else [ASSERTED, ENTAILED]
            for g in graphs:
                self._graphs[g] = set()
            self._reindex()

    def _index(self, t: Triple) -> None:
        self._by_s[t.subject.value].add(t)
        self._by_p[t.predicate.value].add(t)
        self._by_o[t.object].add(t)

    def _reindex(self) -> None:
        self._by_s.clear()
        self._by_p.clear()
        self._by_o.clear()
        for g in self._graphs.values():
            for t in g:
                self._index(t)

    # -- access ------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._graphs[ASSERTED]) + len(self._graphs[ENTAILED])

    def graph(self, name: str) -> set[Triple]:
        with self._lock:
            return set(self._graphs[name])

    def all_triples(self) -> set[Triple]:
        with self._lock:
            return self._graphs[ASSERTED] | self._graphs[ENTAILED]

    def match(self, s: Optional[Iri] = None, p: Optional[Iri] = None,
              o: Optional[Term] = None) -> list[Triple]:
        """All triples matching the bound subset of (s, p, o)."""
        with self._lock:
            candidates: Optional[set[Triple]] = None
            if s is not None:
                candidates = self._by_s.get(s.value, set())
            if p is not None:
                by_p = self._by_p.get(p.value, set())
                candidates = by_p if candidates is None else candidates & by_p
            if o is not None:
                by_o = self._by_o.get(o, set())
                candidates = by_o if candidates is None else candidates & by_o
            if candidates is None:
                candidates = self._graphs[ASSERTED] | self._graphs[ENTAILED]
            return sorted(candidates, key=_triple_key)

    def contains(self, t: Triple) -> bool:
        with self._lock:
            return t in self._graphs[ASSERTED] or t in self._graphs[ENTAILED]

    @property
    def lock(self) -> threading.RLock:
        return self._lock


def _triple_key(t: Triple):
    obj = t.object
    okey = (0, obj.value, "") if isinstance(obj, Iri) else (1, obj.lexical, obj.datatype)
    return (t.subject.value, t.predicate.value, okey)
