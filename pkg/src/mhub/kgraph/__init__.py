"""Knowledge graph: RDF emission, entailment materialization, SPARQL."""
from __future__ import annotations

from .emit import emit_class_triples, emit_instance_triples
from .entail import EntailmentError, materialize_entailments, rematerialize
from .serialize import export_graph, load_graph
from .sparql import ResultTable, SparqlError, query
from .store import ASSERTED, ENTAILED, GraphStore
from .terms import Iri, Literal, Triple, literal_for, percent_encode
from . import vocab

__all__ = [
    "emit_class_triples", "emit_instance_triples",
    "EntailmentError", "materialize_entailments", "rematerialize",
    "export_graph", "load_graph",
    "ResultTable", "SparqlError", "query",
    "ASSERTED", "ENTAILED", "GraphStore",
    "Iri", "Literal", "Triple", "literal_for", "percent_encode",
    "vocab",
]
