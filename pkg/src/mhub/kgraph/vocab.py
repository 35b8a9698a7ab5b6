"""The closed vocabulary of the system-model graph."""
from __future__ import annotations

from ..syntax.tree import Restriction
from .terms import Iri, percent_encode

MO = "https://modelihub.example/mo#"
CLASS_BASE = "https://modelihub.example/c/"
INSTANCE_BASE = "https://modelihub.example/i/"

# classes
PACKAGE = Iri(MO + "Package")
MODEL = Iri(MO + "Model")
RECORD = Iri(MO + "Record")
CONNECTOR = Iri(MO + "Connector")
BLOCK = Iri(MO + "Block")
FUNCTION = Iri(MO + "Function")
TYPE_ALIAS = Iri(MO + "TypeAlias")
COMPONENT = Iri(MO + "Component")

# predicates
NAME = Iri(MO + "name")
EXTENDS = Iri(MO + "extends")
EXTENDS_TRANSITIVE = Iri(MO + "extendsTransitive")
HAS_COMPONENT = Iri(MO + "hasComponent")
HAS_CHILD = Iri(MO + "hasChild")
TYPE = Iri(MO + "type")
VARIABILITY = Iri(MO + "variability")
CAUSALITY = Iri(MO + "causality")
VALUE = Iri(MO + "value")
UNIT = Iri(MO + "unit")
SOURCE = Iri(MO + "source")
INSTANCE_OF = Iri(MO + "instanceOf")
INSTANCE_OF_TRANSITIVE = Iri(MO + "instanceOfTransitive")

RESTRICTION_CLASS = {
    Restriction.PACKAGE: PACKAGE,
    Restriction.MODEL: MODEL,
    Restriction.RECORD: RECORD,
    Restriction.CONNECTOR: CONNECTOR,
    Restriction.BLOCK: BLOCK,
    Restriction.TYPE: TYPE_ALIAS,
    Restriction.FUNCTION: FUNCTION,
}

PREFIXES = {
    "mo": MO,
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
}


def class_iri(qname: str) -> Iri:
    return Iri(CLASS_BASE + ".".join(percent_encode(p) for p in qname.split(".")))


def instance_iri(root: str, path: str) -> Iri:
    segments = [percent_encode(root)]
    if path:
        segments.extend(percent_encode(p) for p in path.split("."))
    return Iri(INSTANCE_BASE + "/".join(segments))
