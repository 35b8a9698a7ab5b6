"""SPARQL 1.1 subset: SELECT/ASK with basic graph patterns, FILTER
(comparisons, logical operators, regex, bound), OPTIONAL, DISTINCT,
ORDER BY, LIMIT/OFFSET.

Solutions are computed over asserted plus entailed triples. Deterministic:
without ORDER BY, rows follow a canonical term ordering.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .store import GraphStore
from .terms import (
    RDF_TYPE,
    XSD_BOOLEAN,
    XSD_DOUBLE,
    XSD_INTEGER,
    XSD_STRING,
    Iri,
    Literal,
    Term,
    Triple,
    literal_value,
)


class SparqlError(Exception):
    def __init__(self, message: str, position: Optional[int] = None):
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)
        self.position = position


@dataclass(frozen=True)
class Variable:
    name: str


PatternTerm = Union[Variable, Iri, Literal]


@dataclass(frozen=True)
class TriplePattern:
    s: PatternTerm
    p: PatternTerm
    o: PatternTerm


@dataclass
class Group:
    patterns: list = field(default_factory=list)  # TriplePattern | Filter | Optional_


@dataclass
class Filter:
    expr: "FilterExpr"


@dataclass
class Optional_:
    group: Group


# filter expression nodes
@dataclass(frozen=True)
class FComparison:
    op: str
    lhs: "FilterExpr"
    rhs: "FilterExpr"


@dataclass(frozen=True)
class FLogical:
    op: str  # '&&' | '||'
    lhs: "FilterExpr"
    rhs: "FilterExpr"


@dataclass(frozen=True)
class FNot:
    operand: "FilterExpr"


@dataclass(frozen=True)
class FRegex:
    text: "FilterExpr"
    pattern: "FilterExpr"
    flags: Optional["FilterExpr"] = None


@dataclass(frozen=True)
class FBound:
    var: Variable


@dataclass(frozen=True)
class FTerm:
    term: PatternTerm


@dataclass(frozen=True)
class FIsNumeric:
    operand: "FilterExpr"


FilterExpr = Union[FComparison, FLogical, FNot, FRegex, FBound, FTerm, FIsNumeric]


@dataclass
class Query:
    form: str  # 'select' | 'ask'
    variables: list[Variable]  # empty means '*'
    distinct: bool
    where: Group
    order_by: list[tuple[Variable, bool]]  # (var, descending)
    limit: Optional[int]
    offset: int


@dataclass
class ResultTable:
    variables: list[str]
    rows: list[dict[str, Term]]
    boolean: Optional[bool] = None  # ASK result

    def to_sparql_json(self) -> dict:
        if self.boolean is not None:
            return {"head": {}, "boolean": self.boolean}
        bindings = []
        for row in self.rows:
            binding = {}
            for var in self.variables:
                if var not in row:
                    continue
                term = row[var]
                if isinstance(term, Iri):
                    binding[var] = {"type": "uri", "value": term.value}
                else:
                    entry = {"type": "literal", "value": term.lexical}
                    if term.datatype != XSD_STRING:
                        entry["datatype"] = term.datatype
                    binding[var] = entry
            bindings.append(binding)
        return {"head": {"vars": list(self.variables)}, "results": {"bindings": bindings}}


# ---------------------------------------------------------------------------
# tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<iri><[^<>\s]*>)
  | (?P<var>[?$][A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<number>[+-]?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?))
  | (?P<pname>[A-Za-z_][A-Za-z0-9_.-]*)?:(?P<plocal>[A-Za-z0-9_.%-]*)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>\^\^|&&|\|\||!=|<=|>=|[{}().,;*=<>!])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    out: list[_Tok] = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise SparqlError(f"unexpected character {text[i]!r}", i)
        kind = m.lastgroup
        if kind == "plocal":
            out.append(_Tok("pname", m.group(0), i))
        elif kind != "ws":
            out.append(_Tok(kind, m.group(0), i))
        i = m.end()
    out.append(_Tok("eof", "", len(text)))
    return out


# ---------------------------------------------------------------------------
# parser

_KEYWORDS = {"select", "ask", "where", "filter", "optional", "order", "by", "asc",
             "desc", "limit", "offset", "distinct", "prefix", "regex", "bound",
             "true", "false", "a", "isnumeric"}


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0
        self.prefixes: dict[str, str] = {}

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at_word(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "word" and tok.text.lower() == word

    def expect_word(self, word: str) -> None:
        if not self.at_word(word):
            raise SparqlError(f"expected {word.upper()}", self.peek().pos)
        self.next()

    def expect_punct(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != text:
            raise SparqlError(f"expected '{text}'", tok.pos)
        self.next()

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "punct" and tok.text == text

    # -- grammar ------------------------------------------------------------

    def parse(self) -> Query:
        while self.at_word("prefix"):
            self.next()
            tok = self.next()
            if tok.kind != "pname" or not tok.text.endswith(":"):
                # pname token includes the local part; a bare "mo:" parses as pname
                if tok.kind != "pname":
                    raise SparqlError("expected prefix name", tok.pos)
            name = tok.text[:-1] if tok.text.endswith(":") else tok.text.split(":", 1)[0]
            iri_tok = self.next()
            if iri_tok.kind != "iri":
                raise SparqlError("expected IRI after prefix name", iri_tok.pos)
            self.prefixes[name] = iri_tok.text[1:-1]

        if self.at_word("select"):
            query = self._parse_select()
        elif self.at_word("ask"):
            query = self._parse_ask()
        else:
            raise SparqlError("expected SELECT or ASK", self.peek().pos)
        tok = self.peek()
        if tok.kind != "eof":
            raise SparqlError(f"unexpected trailing {tok.text!r}", tok.pos)
        return query

    def _parse_select(self) -> Query:
        self.next()
        distinct = False
        if self.at_word("distinct"):
            distinct = True
            self.next()
        variables: list[Variable] = []
        if self.at_punct("*"):
            self.next()
        else:
            while self.peek().kind == "var":
                variables.append(Variable(self.next().text[1:]))
            if not variables:
                raise SparqlError("SELECT needs projection variables or *", self.peek().pos)
        if self.at_word("where"):
            self.next()
        where = self._parse_group()
        order_by: list[tuple[Variable, bool]] = []
        limit: Optional[int] = None
        offset = 0
        if self.at_word("order"):
            self.next()
            self.expect_word("by")
            while True:
                descending = False
                if self.at_word("asc") or self.at_word("desc"):
                    descending = self.next().text.lower() == "desc"
                    self.expect_punct("(")
                    var_tok = self.next()
                    if var_tok.kind != "var":
                        raise SparqlError("expected variable in ORDER BY", var_tok.pos)
                    order_by.append((Variable(var_tok.text[1:]), descending))
                    self.expect_punct(")")
                elif self.peek().kind == "var":
                    order_by.append((Variable(self.next().text[1:]), False))
                else:
                    break
            if not order_by:
                raise SparqlError("ORDER BY needs at least one key", self.peek().pos)
        if self.at_word("limit"):
            self.next()
            limit = self._int()
        if self.at_word("offset"):
            self.next()
            offset = self._int()
            if limit is None and self.at_word("limit"):
                self.next()
                limit = self._int()
        return Query(form="select", variables=variables, distinct=distinct,
                     where=where, order_by=order_by, limit=limit, offset=offset)

    def _parse_ask(self) -> Query:
        self.next()
        if self.at_word("where"):
            self.next()
        where = self._parse_group()
        return Query(form="ask", variables=[], distinct=False, where=where,
                     order_by=[], limit=None, offset=0)

    def _int(self) -> int:
        tok = self.next()
        if tok.kind != "number" or not re.fullmatch(r"\d+", tok.text):
            raise SparqlError("expected a non-negative integer", tok.pos)
        return int(tok.text)

    def _parse_group(self) -> Group:
        self.expect_punct("{")
        group = Group()
        while not self.at_punct("}"):
            if self.peek().kind == "eof":
                raise SparqlError("unterminated group", self.peek().pos)
            if self.at_word("filter"):
                self.next()
                self.expect_punct("(")
                expr = self._parse_or()
                self.expect_punct(")")
                group.patterns.append(Filter(expr))
                continue
            if self.at_word("optional"):
                self.next()
                group.patterns.append(Optional_(self._parse_group()))
                continue
            self._parse_triples(group)
        self.expect_punct("}")
        return group

    def _parse_triples(self, group: Group) -> None:
        s = self._term()
        while True:
            p = self._term(predicate=True)
            while True:
                o = self._term()
                group.patterns.append(TriplePattern(s, p, o))
                if self.at_punct(","):
                    self.next()
                    continue
                break
            if self.at_punct(";"):
                self.next()
                if self.at_punct(".") or self.at_punct("}"):
                    break
                continue
            break
        if self.at_punct("."):
            self.next()

    def _term(self, predicate: bool = False) -> PatternTerm:
        tok = self.peek()
        if tok.kind == "var":
            self.next()
            return Variable(tok.text[1:])
        if tok.kind == "iri":
            self.next()
            return Iri(tok.text[1:-1])
        if tok.kind == "pname":
            self.next()
            prefix, local = tok.text.split(":", 1)
            if prefix not in self.prefixes:
                raise SparqlError(f"unknown prefix '{prefix}:'", tok.pos)
            return Iri(self.prefixes[prefix] + local)
        if tok.kind == "word" and tok.text == "a" and predicate:
            self.next()
            return Iri(RDF_TYPE)
        if predicate:
            raise SparqlError("expected predicate", tok.pos)
        if tok.kind == "string":
            self.next()
            value = _unquote(tok.text)
            if self.at_punct("^^"):
                self.next()
                dt_tok = self.next()
                if dt_tok.kind == "iri":
                    return Literal(value, dt_tok.text[1:-1])
                if dt_tok.kind == "pname":
                    prefix, local = dt_tok.text.split(":", 1)
                    if prefix not in self.prefixes:
                        raise SparqlError(f"unknown prefix '{prefix}:'", dt_tok.pos)
                    return Literal(value, self.prefixes[prefix] + local)
                raise SparqlError("expected datatype IRI", dt_tok.pos)
            return Literal(value, XSD_STRING)
        if tok.kind == "number":
            self.next()
            if re.fullmatch(r"[+-]?\d+", tok.text):
                return Literal(str(int(tok.text)), XSD_INTEGER)
            return Literal(repr(float(tok.text)), XSD_DOUBLE)
        if tok.kind == "word" and tok.text.lower() in ("true", "false"):
            self.next()
            return Literal(tok.text.lower(), XSD_BOOLEAN)
        raise SparqlError(f"expected term, got {tok.text!r}", tok.pos)

    # -- filter expressions ----------------------------------------------------

    def _parse_or(self) -> FilterExpr:
        lhs = self._parse_and()
        while self.at_punct("||"):
            self.next()
            lhs = FLogical("||", lhs, self._parse_and())
        return lhs

    def _parse_and(self) -> FilterExpr:
        lhs = self._parse_not()
        while self.at_punct("&&"):
            self.next()
            lhs = FLogical("&&", lhs, self._parse_not())
        return lhs

    def _parse_not(self) -> FilterExpr:
        if self.at_punct("!"):
            self.next()
            return FNot(self._parse_not())
        return self._parse_comparison()

    def _parse_comparison(self) -> FilterExpr:
        lhs = self._parse_primary()
        tok = self.peek()
        if tok.kind == "punct" and tok.text in ("=", "!=", "<", "<=", ">", ">="):
            self.next()
            rhs = self._parse_primary()
            return FComparison(tok.text, lhs, rhs)
        return lhs

    def _parse_primary(self) -> FilterExpr:
        tok = self.peek()
        if self.at_punct("("):
            self.next()
            inner = self._parse_or()
            self.expect_punct(")")
            return inner
        if self.at_word("regex"):
            self.next()
            self.expect_punct("(")
            text = self._parse_or()
            self.expect_punct(",")
            pattern = self._parse_or()
            flags = None
            if self.at_punct(","):
                self.next()
                flags = self._parse_or()
            self.expect_punct(")")
            return FRegex(text, pattern, flags)
        if self.at_word("bound"):
            self.next()
            self.expect_punct("(")
            var_tok = self.next()
            if var_tok.kind != "var":
                raise SparqlError("bound() needs a variable", var_tok.pos)
            self.expect_punct(")")
            return FBound(Variable(var_tok.text[1:]))
        if self.at_word("isnumeric"):
            self.next()
            self.expect_punct("(")
            inner = self._parse_or()
            self.expect_punct(")")
            return FIsNumeric(inner)
        return FTerm(self._term())


def _unquote(quoted: str) -> str:
    body = quoted[1:-1]
    out = []
    i = 0
    escapes = {"n": "\n", "t": "\t", "r": "\r", '"': '"', "\\": "\\"}
    while i < len(body):
        if body[i] == "\\" and i + 1 < len(body):
            out.append(escapes.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(body[i])
            i += 1
    return "".join(out)


# ---------------------------------------------------------------------------
# evaluation

Binding = dict[str, Term]


def query(store: GraphStore, sparql_text: str) -> ResultTable:
    parsed = _Parser(sparql_text).parse()
    solutions = _eval_group(store, parsed.where, [{}])

    if parsed.form == "ask":
        return ResultTable(variables=[], rows=[], boolean=bool(solutions))

    if parsed.variables:
        names = [v.name for v in parsed.variables]
    else:
        seen: list[str] = []
        for sol in solutions:
            for key in sol:
                if key not in seen:
                    seen.append(key)
        names = sorted(seen)

    rows = [{k: v for k, v in sol.items() if k in names} for sol in solutions]

    if parsed.distinct:
        unique: list[Binding] = []
        marker = set()
        for row in rows:
            key = tuple(sorted((k, _term_sort_key(v)) for k, v in row.items()))
            if key not in marker:
                marker.add(key)
                unique.append(row)
        rows = unique

    if parsed.order_by:
        for var, descending in reversed(parsed.order_by):
            rows.sort(key=lambda r, v=var: _order_key(r.get(v.name)), reverse=descending)
    else:
        rows.sort(key=lambda r: tuple(_term_sort_key(r.get(n)) for n in names))

    if parsed.offset:
        rows = rows[parsed.offset:]
    if parsed.limit is not None:
        rows = rows[: parsed.limit]
    return ResultTable(variables=names, rows=rows)


def _eval_group(store: GraphStore, group: Group, solutions: list[Binding]) -> list[Binding]:
    for item in group.patterns:
        if isinstance(item, TriplePattern):
            solutions = _join_pattern(store, item, solutions)
        elif isinstance(item, Optional_):
            solutions = _left_join(store, item.group, solutions)
        elif isinstance(item, Filter):
            solutions = [s for s in solutions if _filter_truth(item.expr, s)]
        else:
            raise SparqlError(f"unsupported group item {item!r}")
    return solutions


def _join_pattern(store: GraphStore, pattern: TriplePattern,
                  solutions: list[Binding]) -> list[Binding]:
    out: list[Binding] = []
    for sol in solutions:
        s = _substitute(pattern.s, sol)
        p = _substitute(pattern.p, sol)
        o = _substitute(pattern.o, sol)
        s_bound = s if not isinstance(s, Variable) else None
        p_bound = p if not isinstance(p, Variable) else None
        o_bound = o if not isinstance(o, Variable) else None
        if isinstance(s_bound, Literal) or isinstance(p_bound, Literal):
            continue  # literals cannot be subjects/predicates
        for triple in store.match(s_bound, p_bound, o_bound):
            extended = dict(sol)
            ok = True
            for term, value in ((s, triple.subject), (p, triple.predicate), (o, triple.object)):
                if isinstance(term, Variable):
                    if term.name in extended and extended[term.name] != value:
                        ok = False
                        break
                    extended[term.name] = value
            if ok:
                out.append(extended)
    return out


def _left_join(store: GraphStore, group: Group, solutions: list[Binding]) -> list[Binding]:
    out: list[Binding] = []
    for sol in solutions:
        extended = _eval_group(store, group, [dict(sol)])
        if extended:
            out.extend(extended)
        else:
            out.append(sol)
    return out


def _substitute(term: PatternTerm, binding: Binding) -> PatternTerm:
    if isinstance(term, Variable) and term.name in binding:
        return binding[term.name]
    return term


def _filter_truth(expr: FilterExpr, binding: Binding) -> bool:
    try:
        value = _filter_eval(expr, binding)
    except _FilterUnbound:
        return False
    return value is True


class _FilterUnbound(Exception):
    pass


def _filter_eval(expr: FilterExpr, binding: Binding):
    if isinstance(expr, FTerm):
        term = expr.term
        if isinstance(term, Variable):
            if term.name not in binding:
                raise _FilterUnbound()
            term = binding[term.name]
        if isinstance(term, Literal):
            return literal_value(term)
        return term
    if isinstance(expr, FBound):
        return expr.var.name in binding
    if isinstance(expr, FIsNumeric):
        value = _filter_eval(expr.operand, binding)
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if isinstance(expr, FNot):
        inner = _filter_eval(expr.operand, binding)
        if not isinstance(inner, bool):
            raise SparqlError("'!' needs a boolean")
        return not inner
    if isinstance(expr, FLogical):
        lhs = _filter_eval(expr.lhs, binding)
        if expr.op == "&&":
            return bool(lhs) and bool(_filter_eval(expr.rhs, binding))
        return bool(lhs) or bool(_filter_eval(expr.rhs, binding))
    if isinstance(expr, FComparison):
        lhs = _filter_eval(expr.lhs, binding)
        rhs = _filter_eval(expr.rhs, binding)
        if isinstance(lhs, Iri) or isinstance(rhs, Iri):
            if expr.op in ("=", "!="):
                equal = isinstance(lhs, Iri) and isinstance(rhs, Iri) and lhs == rhs
                return equal if expr.op == "=" else not equal
            raise SparqlError("IRIs only support = and !=")
        if isinstance(lhs, bool) != isinstance(rhs, bool):
            raise _FilterUnbound()
        if isinstance(lhs, str) != isinstance(rhs, str):
            raise _FilterUnbound()  # type error: row drops out
        if expr.op == "=":
            return lhs == rhs
        if expr.op == "!=":
            return lhs != rhs
        if expr.op == "<":
            return lhs < rhs
        if expr.op == "<=":
            return lhs <= rhs
        if expr.op == ">":
            return lhs > rhs
        if expr.op == ">=":
            return lhs >= rhs
    if isinstance(expr, FRegex):
        text = _filter_eval(expr.text, binding)
        pattern = _filter_eval(expr.pattern, binding)
        flags_value = _filter_eval(expr.flags, binding) if expr.flags is not None else ""
        if not isinstance(text, str) or not isinstance(pattern, str):
            raise _FilterUnbound()
        flags = re.IGNORECASE if "i" in str(flags_value) else 0
        try:
            return re.search(pattern, text, flags) is not None
        except re.error as exc:
            raise SparqlError(f"bad regex: {exc}") from exc
    raise SparqlError(f"unsupported filter expression {expr!r}")


def _order_key(term: Optional[Term]):
    # unbound < numbers < booleans < strings < IRIs
    if term is None:
        return (0, 0, "")
    if isinstance(term, Literal):
        value = literal_value(term)
        if isinstance(value, bool):
            return (2, int(value), "")
        if isinstance(value, (int, float)):
            return (1, float(value), "")
        return (3, 0, value)
    return (4, 0, term.value)


def _term_sort_key(term: Optional[Term]):
    if term is None:
        return (0, "", "")
    if isinstance(term, Iri):
        return (1, term.value, "")
    return (2, term.lexical, term.datatype)
