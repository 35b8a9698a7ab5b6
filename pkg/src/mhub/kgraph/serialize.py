"""Turtle and N-Triples export/import (round-trip safe for this store)."""
from __future__ import annotations

import re
from typing import Iterable

from .store import ASSERTED, ENTAILED, GraphStore
from .terms import XSD_STRING, Iri, Literal, Term, Triple
from .vocab import PREFIXES


def export_graph(store: GraphStore, fmt: str = "ntriples", graphs: str = "both") -> bytes:
    triples = _selected(store, graphs)
    if fmt == "ntriples":
        return _to_ntriples(triples).encode("utf-8")
    if fmt == "turtle":
        return _to_turtle(triples).encode("utf-8")
    raise ValueError(f"unknown export format {fmt!r} (use turtle or ntriples)")


def _selected(store: GraphStore, graphs: str) -> list[Triple]:
    if graphs == "asserted":
        pool = store.graph(ASSERTED)
    elif graphs == "entailed":
        pool = store.graph(ENTAILED)
    elif graphs == "both":
        pool = store.all_triples()
    else:
        raise ValueError(f"unknown graph selection {graphs!r}")
    return sorted(pool, key=lambda t: (t.subject.value, t.predicate.value, _okey(t.object)))


def _okey(o: Term):
    if isinstance(o, Iri):
        return (0, o.value, "")
    return (1, o.lexical, o.datatype)


def _to_ntriples(triples: Iterable[Triple]) -> str:
    lines = []
    for t in triples:
        lines.append(f"{_nt_term(t.subject)} {_nt_term(t.predicate)} {_nt_term(t.object)} .")
    return "\n".join(lines) + ("\n" if lines else "")


def _nt_term(term: Term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    body = _escape(term.lexical)
    if term.datatype == XSD_STRING:
        return f'"{body}"'
    return f'"{body}"^^<{term.datatype}>'


def _to_turtle(triples: list[Triple]) -> str:
    lines = [f"@prefix {name}: <{iri}> ." for name, iri in sorted(PREFIXES.items())]
    lines.append("")
    for t in triples:
        lines.append(f"{_ttl_term(t.subject)} {_ttl_term(t.predicate)} {_ttl_term(t.object)} .")
    return "\n".join(lines) + "\n"


def _ttl_term(term: Term) -> str:
    if isinstance(term, Iri):
        for name, base in PREFIXES.items():
            if term.value.startswith(base):
                local = term.value[len(base):]
                if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.-]*", local or ""):
                    return f"{name}:{local}"
        return f"<{term.value}>"
    body = _escape(term.lexical)
    if term.datatype == XSD_STRING:
        return f'"{body}"'
    return f'"{body}"^^<{term.datatype}>'


def _escape(text: str) -> str:
    return (text.replace("\\", "\\\\").replace('"', '\\"')
            .replace("\n", "\\n").replace("\r", "\\r").replace("\t", "\\t"))


# ---------------------------------------------------------------------------
# import

_IRI_RE = r"<([^<>]*)>"
_LITERAL_RE = r'"((?:[^"\\]|\\.)*)"(?:\^\^(?:<([^<>]*)>|([A-Za-z_][\w.-]*:[\w.%-]*)))?'
_PNAME_RE = r"([A-Za-z_][\w.-]*):([\w.%-]*)"
_TERM_RE = re.compile(rf"\s*(?:{_IRI_RE}|{_LITERAL_RE}|{_PNAME_RE})")


def load_graph(store: GraphStore, data: bytes, graph: str = ASSERTED) -> int:
    """Parse Turtle/N-Triples as produced by export_graph into the store."""
    text = data.decode("utf-8")
    prefixes = dict(PREFIXES)
    count = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@prefix"):
            m = re.match(r"@prefix\s+([A-Za-z_][\w.-]*):\s*<([^<>]*)>\s*\.", line)
            if not m:
                raise ValueError(f"line {line_no}: bad @prefix")
            prefixes[m.group(1)] = m.group(2)
            continue
        terms, rest = _parse_terms(line, prefixes, line_no)
        if len(terms) != 3 or rest.strip() != ".":
            raise ValueError(f"line {line_no}: expected 's p o .'")
        s, p, o = terms
        if not isinstance(s, Iri) or not isinstance(p, Iri):
            raise ValueError(f"line {line_no}: subject/predicate must be IRIs")
        if store.add(Triple(s, p, o), graph):
            count += 1
    return count


def _parse_terms(line: str, prefixes: dict[str, str], line_no: int):
    terms: list[Term] = []
    rest = line
    for _ in range(3):
        m = _TERM_RE.match(rest)
        if not m:
            raise ValueError(f"line {line_no}: cannot parse term near {rest[:30]!r}")
        iri, lit, dt_iri, dt_pname, pfx, local = m.groups()
        if iri is not None:
            terms.append(Iri(iri))
        elif lit is not None:
            datatype = XSD_STRING
            if dt_iri:
                datatype = dt_iri
            elif dt_pname:
                p, l = dt_pname.split(":", 1)
                if p not in prefixes:
                    raise ValueError(f"line {line_no}: unknown prefix {p!r}")
                datatype = prefixes[p] + l
            terms.append(Literal(_unescape(lit), datatype))
        elif pfx is not None:
            if pfx not in prefixes:
                raise ValueError(f"line {line_no}: unknown prefix {pfx!r}")
            terms.append(Iri(prefixes[pfx] + (local or "")))
        rest = rest[m.end():]
    return terms, rest


def _unescape(text: str) -> str:
    out = []
    i = 0
    escapes = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            out.append(escapes.get(text[i + 1], text[i + 1]))
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)
