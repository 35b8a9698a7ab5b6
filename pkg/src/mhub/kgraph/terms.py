"""RDF terms: IRIs and typed literals."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_STRING = XSD + "string"
XSD_DOUBLE = XSD + "double"
XSD_INTEGER = XSD + "integer"
XSD_BOOLEAN = XSD + "boolean"

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

_UNRESERVED = frozenset(
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-._~"
)


@dataclass(frozen=True)
class Iri:
    value: str

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: str = XSD_STRING

    def __str__(self) -> str:
        return f'"{self.lexical}"^^<{self.datatype}>'


Term = Union[Iri, Literal]


@dataclass(frozen=True)
class Triple:
    subject: Iri
    predicate: Iri
    object: Term


def percent_encode(segment: str) -> str:
    """RFC 3986 percent-encoding keeping only the unreserved set."""
    out = []
    for byte in segment.encode("utf-8"):
        ch = chr(byte)
        if ch in _UNRESERVED:
            out.append(ch)
        else:
            out.append(f"%{byte:02X}")
    return "".join(out)


def literal_for(value) -> Literal:
    if isinstance(value, bool):
        return Literal("true" if value else "false", XSD_BOOLEAN)
    if isinstance(value, int):
        return Literal(str(value), XSD_INTEGER)
    if isinstance(value, float):
        return Literal(repr(value), XSD_DOUBLE)
    return Literal(str(value), XSD_STRING)


def literal_value(lit: Literal):
    """Python value of a typed literal (numbers, booleans, else the lexical form)."""
    if lit.datatype == XSD_INTEGER:
        try:
            return int(lit.lexical)
        except ValueError:
            return lit.lexical
    if lit.datatype in (XSD_DOUBLE, XSD + "decimal", XSD + "float"):
        try:
            return float(lit.lexical)
        except ValueError:
            return lit.lexical
    if lit.datatype == XSD_BOOLEAN:
        return lit.lexical == "true"
    return lit.lexical
