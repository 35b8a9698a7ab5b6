"""Triple emission from class trees and instance trees."""
from __future__ import annotations

from ..frontend import ClassTree, InstanceTree
from ..frontend.instantiate import InstanceNode
from ..syntax import tree as ast
from . import vocab
from .terms import RDF_TYPE, Iri, Literal, Triple, literal_for

_VARIABILITY_DEFAULT = "continuous"


def emit_class_triples(class_tree: ClassTree) -> list[Triple]:
    triples: list[Triple] = []
    for entry in class_tree.iter_sorted():
        if entry.uri == "<builtin>":
            continue
        subject = vocab.class_iri(entry.qname)
        triples.append(Triple(subject, Iri(RDF_TYPE), vocab.RESTRICTION_CLASS[entry.restriction]))
        triples.append(Triple(subject, vocab.NAME, Literal(entry.name)))
        triples.append(Triple(subject, vocab.SOURCE, Literal(entry.uri)))
        cls = entry.ast
        if cls is None:
            continue
        for ext in cls.extends_clauses:
            base = _resolved(class_tree, ext.base_name, entry.qname)
            if base is not None:
                triples.append(Triple(subject, vocab.EXTENDS, vocab.class_iri(base)))
        if cls.is_short_class():
            base = _resolved(class_tree, cls.alias_target, entry.parent)
            if base is not None:
                triples.append(Triple(subject, vocab.EXTENDS, vocab.class_iri(base)))
        for comp in cls.components:
            comp_iri = Iri(subject.value + "." + vocab.percent_encode(comp.name))
            triples.append(Triple(subject, vocab.HAS_COMPONENT, comp_iri))
            triples.append(Triple(comp_iri, Iri(RDF_TYPE), vocab.COMPONENT))
            triples.append(Triple(comp_iri, vocab.NAME, Literal(comp.name)))
            comp_type = _resolved(class_tree, comp.type_name, entry.qname)
            triples.append(Triple(comp_iri, vocab.TYPE,
                                  vocab.class_iri(comp_type or comp.type_name)))
            variability = comp.variability.value if comp.variability else _VARIABILITY_DEFAULT
            triples.append(Triple(comp_iri, vocab.VARIABILITY, Literal(variability)))
            triples.append(Triple(comp_iri, vocab.CAUSALITY, Literal(comp.causality.value)))
    return triples


def emit_instance_triples(itree: InstanceTree) -> list[Triple]:
    triples: list[Triple] = []
    root_name = itree.root_class
    _emit_node(itree.root, root_name, triples)
    return triples


def _emit_node(node: InstanceNode, root_name: str, triples: list[Triple]) -> None:
    subject = vocab.instance_iri(root_name, node.path)
    triples.append(Triple(subject, vocab.NAME, Literal(node.name)))
    triples.append(Triple(subject, vocab.INSTANCE_OF, vocab.class_iri(node.class_ref)))
    unit = node.attributes.get("unit")
    if isinstance(unit, str) and unit:
        triples.append(Triple(subject, vocab.UNIT, Literal(unit)))
    if node.evaluated is not None and _scalar(node.evaluated) \
            and node.variability in (ast.Variability.CONSTANT, ast.Variability.PARAMETER):
        triples.append(Triple(subject, vocab.VALUE, literal_for(node.evaluated)))
    for child in node.children:
        child_iri = vocab.instance_iri(root_name, child.path)
        triples.append(Triple(subject, vocab.HAS_CHILD, child_iri))
        _emit_node(child, root_name, triples)


def _scalar(value) -> bool:
    return isinstance(value, (int, float, bool, str))


def _resolved(class_tree: ClassTree, name: str, scope: str):
    from ..frontend.resolve import ResolveError, resolve

    try:
        return resolve(class_tree, name, scope)
    except ResolveError:
        return None
