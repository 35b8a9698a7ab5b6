"""Analytical view documents: composition/specialization graphs, query
tables, and knowledge-base pages with live embedded expressions."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

from .frontend import (
    ClassTree,
    EvalError,
    InstanceTree,
    Instantiator,
    ResolveError,
    Scope,
    display_form,
    resolve,
)
from .frontend.instantiate import InstanceNode
from .kgraph import GraphStore, query as sparql_query
from .kgraph.terms import Iri, Literal, literal_value
from .syntax import parse
from .syntax import tree as ast


class ViewError(Exception):
    pass


@dataclass
class GraphDoc:
    nodes: list[dict] = field(default_factory=list)
    edges: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"nodes": self.nodes, "edges": self.edges}

    def validate(self) -> None:
        ids = [n["id"] for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ViewError("duplicate node ids")
        known = set(ids)
        for e in self.edges:
            if e["from"] not in known or e["to"] not in known:
                raise ViewError(f"edge endpoint missing: {e}")


@dataclass
class TableDoc:
    columns: list[dict]
    rows: list[dict]

    def to_json(self) -> dict:
        return {"columns": self.columns, "rows": self.rows}


@dataclass
class KbPage:
    source_uri: str
    text: str
    expressions: list[dict] = field(default_factory=list)
    errors: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"sourceUri": self.source_uri, "text": self.text,
                "expressions": self.expressions, "errors": self.errors}


# ---------------------------------------------------------------------------
# composition view


def composition_view(itree: InstanceTree, root_path: str = "", depth: int = 1) -> GraphDoc:
    if depth < 1:
        raise ViewError("depth must be >= 1")
    root = itree.find(root_path) if root_path else itree.root
    if root is None:
        raise ViewError(f"unknown instance path {root_path!r}")

    doc = GraphDoc()
    included: dict[str, InstanceNode] = {}

    def add_node(node: InstanceNode, level: int) -> None:
        node_id = node.path or "<root>"
        if node_id in included:
            return
        included[node_id] = node
        kind = "component"
        if node.restriction is ast.Restriction.PACKAGE:
            kind = "package"
        elif node.path == (root.path or ""):
            kind = "class"
        meta = {"type": node.class_ref}
        if node.builtin and node.builtin != node.class_ref:
            meta["baseType"] = node.builtin
        doc_info = _documentation_info(node)
        if doc_info:
            meta["documentation"] = doc_info
        doc.nodes.append({"id": node_id, "label": node.name, "kind": kind, "meta": meta})
        if level >= depth:
            return
        for child in node.children:
            add_node(child, level + 1)
            doc.edges.append({"from": node_id, "to": child.path, "kind": "composition"})

    add_node(root, 0)

    # connection edges between included sibling components
    for container in list(included.values()):
        for eq in container.equations:
            if not isinstance(eq, ast.EqConnect):
                continue
            a = _endpoint_component(container, eq.a)
            b = _endpoint_component(container, eq.b)
            if a is None or b is None or a.path == b.path:
                continue
            a_id, b_id = a.path or "<root>", b.path or "<root>"
            if a_id in included and b_id in included:
                doc.edges.append({"from": a_id, "to": b_id, "kind": "connection"})
    doc.validate()
    return doc


def _endpoint_component(container: InstanceNode, ref: ast.Ref) -> Optional[InstanceNode]:
    return container.child(ref.parts[0].name)


def _documentation_info(node: InstanceNode) -> Optional[str]:
    annotation = node.annotation
    if annotation is None:
        return None
    doc_mod = annotation.submod("Documentation")
    if doc_mod is None:
        return None
    info = doc_mod.submod("info")
    if info is not None and isinstance(info.binding, ast.StringLit):
        return info.binding.value
    return None


# ---------------------------------------------------------------------------
# specialization view


def specialization_view(class_tree: ClassTree, class_name: str) -> GraphDoc:
    try:
        qname = resolve(class_tree, class_name, "")
    except ResolveError as exc:
        raise ViewError(str(exc)) from exc

    doc = GraphDoc()
    seen: set[str] = set()

    def kind_of(q: str) -> str:
        entry = class_tree.get(q)
        if entry is not None and entry.restriction is ast.Restriction.PACKAGE:
            return "package"
        return "class"

    def add_node(q: str) -> None:
        if q in seen:
            return
        seen.add(q)
        entry = class_tree.get(q)
        meta = {}
        if entry is not None:
            meta = {"restriction": entry.restriction.value, "source": entry.uri}
        doc.nodes.append({"id": q, "label": q.rsplit(".", 1)[-1], "kind": kind_of(q),
                          "meta": meta})

    def supers_of(q: str, trail: set[str]) -> None:
        if q in trail:
            return
        trail.add(q)
        entry = class_tree.get(q)
        if entry is None or entry.ast is None:
            return
        bases: list[str] = []
        for ext in entry.ast.extends_clauses:
            try:
                bases.append(resolve(class_tree, ext.base_name, entry.qname))
            except ResolveError:
                continue
        if entry.ast.is_short_class():
            try:
                bases.append(resolve(class_tree, entry.ast.alias_target, entry.parent))
            except ResolveError:
                pass
        for base in bases:
            if class_tree.get(base) is None:
                continue
            add_node(base)
            edge = {"from": q, "to": base, "kind": "extends"}
            if edge not in doc.edges:
                doc.edges.append(edge)
            supers_of(base, trail)

    add_node(qname)
    supers_of(qname, set())
    for sub in class_tree.subclasses_of(qname):
        add_node(sub.qname)
        edge = {"from": sub.qname, "to": qname, "kind": "extends"}
        if edge not in doc.edges:
            doc.edges.append(edge)
    doc.validate()
    return doc


# ---------------------------------------------------------------------------
# table view


def table_view(store: GraphStore, sparql_text: str,
               column_spec: Optional[dict[str, str]] = None) -> TableDoc:
    result = sparql_query(store, sparql_text)
    if result.boolean is not None:
        raise ViewError("table views need a SELECT query")
    columns = [{"key": name, "label": (column_spec or {}).get(name, name)}
               for name in result.variables]
    rows = []
    for binding in result.rows:
        row = {}
        for name in result.variables:
            term = binding.get(name)
            if term is None:
                continue
            if isinstance(term, Iri):
                row[name] = {"type": "uri", "value": term.value}
            else:
                row[name] = {"type": "literal", "value": literal_value(term)}
        rows.append(row)
    return TableDoc(columns=columns, rows=rows)


# ---------------------------------------------------------------------------
# knowledge-base pages

_MARKER_RE = re.compile(r"\{\{(.*?)\}\}", re.DOTALL)


@dataclass
class KbEnv:
    class_tree: ClassTree
    instantiator: Optional[Instantiator] = None
    store: Optional[GraphStore] = None

    def __post_init__(self):
        if self.instantiator is None:
            self.instantiator = Instantiator(self.class_tree)
        self._cache: dict[str, InstanceTree] = {}

    def instance_of(self, root_class: str) -> InstanceTree:
        if root_class not in self._cache:
            self._cache[root_class] = self.instantiator.instantiate(root_class)
        return self._cache[root_class]


def render_kb_page(markdown_text: str, env: KbEnv, source_uri: str = "<kb>") -> KbPage:
    expressions: list[dict] = []
    errors: list[dict] = []

    def substitute(match: re.Match) -> str:
        marker = match.group(1).strip()
        span = (match.start(), match.end())
        try:
            rendered, value = _eval_marker(marker, env)
        except (EvalError, ResolveError, ViewError, Exception) as exc:  # noqa: BLE001
            code = getattr(exc, "code", "EVAL")
            errors.append({"span": list(span), "exprText": marker, "error": str(exc)})
            return f"⟦error: {code}⟧"
        expressions.append({"span": list(span), "exprText": marker, "value": value})
        return rendered

    text = _MARKER_RE.sub(substitute, markdown_text)
    return KbPage(source_uri=source_uri, text=text, expressions=expressions, errors=errors)


def _eval_marker(marker: str, env: KbEnv) -> tuple[str, object]:
    if ":" not in marker:
        raise ViewError(f"marker must look like 'RootClass:expr', got {marker!r}")
    root_class, expr_text = marker.split(":", 1)
    root_class = root_class.strip()
    expr_text = expr_text.strip()
    expr = _parse_expression(expr_text)
    itree = env.instance_of(root_class)
    evaluator = itree.evaluator
    value = evaluator.eval(expr, Scope(node=itree.root, class_ctx=itree.root_class))
    return display_form(value, drop_integral_fraction=True), _jsonable(value)


def _parse_expression(expr_text: str) -> ast.Expr:
    wrapper = f"model __kb__ constant Real __v__ = {expr_text}; end __kb__;"
    tree, diags = parse(wrapper, "<kb-expr>")
    if diags:
        raise ViewError(f"cannot parse expression {expr_text!r}: {diags[0].message}")
    stored = tree.root.ast
    binding = stored.classes[0].components[0].modification.binding
    if binding is None:
        raise ViewError(f"cannot parse expression {expr_text!r}")
    return binding


def _jsonable(value):
    from .frontend.values import EnumValue, RecordValue

    if isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, EnumValue):
        return str(value)
    if isinstance(value, RecordValue):
        return {k: _jsonable(v) for k, v in value.fields.items()}
    return str(value)
