"""Adapters: CSV and JSON artifacts as virtual Modelica fragments.

Each adapter emits a package named after the file stem containing a record
type and a ``constant <Record> root`` instance, so downstream stages treat
the artifact exactly like hand-written Modelica. The namespace comes from
the file's location under the workspace source root.
"""
from __future__ import annotations

import csv
import io
import json
import posixpath
from dataclasses import dataclass
from typing import Callable, Optional

from .syntax import lower, parse, print_stored_definition
from .syntax import tree as ast
from .syntax.lexer import KEYWORDS

_IDENT_OK = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_")
_SEPARATORS = set("-_ \t")


class AdapterError(ValueError):
    """Raised when an artifact cannot be represented as Modelica."""


@dataclass
class VirtualFragment:
    modelica_text: str
    ast: ast.StoredDefinition
    provenance_uri: str
    package_path: str  # within-path, '' at the workspace root

    @property
    def package_qname(self) -> str:
        name = self.ast.classes[0].name
        return f"{self.package_path}.{name}" if self.package_path else name


def sanitize_identifier(raw: str) -> str:
    """Fold kebab/snake/space-separated words to lowerCamelCase and strip
    characters Modelica identifiers cannot carry."""
    if not raw:
        raise AdapterError("empty identifier")
    words: list[str] = []
    cur: list[str] = []
    for ch in raw:
        if ch in _SEPARATORS:
            if cur:
                words.append("".join(cur))
                cur = []
        else:
            cur.append(ch)
    if cur:
        words.append("".join(cur))
    if not words:
        raise AdapterError(f"identifier {raw!r} sanitizes to empty")
    if len(words) == 1:
        candidate = words[0]
    else:
        head = words[0].lower()
        tail = [w[:1].upper() + w[1:] for w in words[1:]]
        candidate = head + "".join(tail)
    cleaned = "".join(ch for ch in candidate if ch in _IDENT_OK)
    if not cleaned:
        raise AdapterError(f"identifier {raw!r} sanitizes to empty")
    if cleaned[0].isdigit():
        cleaned = "_" + cleaned
    if cleaned in KEYWORDS:
        cleaned += "_"
    return cleaned


def infer_namespace(file_uri: str, workspace_root: str = "") -> tuple[str, str]:
    """Map a file location to (within-path, package name)."""
    rel = file_uri
    if workspace_root:
        root = workspace_root.rstrip("/") + "/"
        if file_uri.startswith(root):
            rel = file_uri[len(root):]
    rel = rel.lstrip("/")
    directory, filename = posixpath.split(rel)
    stem = filename.rsplit(".", 1)[0] if "." in filename else filename
    if not stem:
        raise AdapterError(f"cannot derive a package name from {file_uri!r}")
    package = sanitize_identifier(stem)
    segments = [sanitize_identifier(s) for s in directory.split("/") if s]
    return ".".join(segments), package


# ---------------------------------------------------------------------------
# CSV


def adapt_csv(data: bytes, file_uri: str, workspace_root: str = "") -> VirtualFragment:
    text = data.decode("utf-8-sig")  # strips a BOM if present
    reader = csv.reader(io.StringIO(text, newline=""))
    rows = [row for row in reader]
    # a fully empty trailing line yields an empty row; drop those
    rows = [row for row in rows if row != []]
    if not rows:
        raise AdapterError(f"{file_uri}: empty CSV")
    header = rows[0]
    if not header or all(not h.strip() for h in header):
        raise AdapterError(f"{file_uri}: CSV has no header row")
    fields = [sanitize_identifier(h.strip()) for h in header]
    if len(set(fields)) != len(fields):
        dupes = sorted({f for f in fields if fields.count(f) > 1})
        raise AdapterError(f"{file_uri}: duplicate sanitized headers {dupes}")
    data_rows = rows[1:]
    for i, row in enumerate(data_rows, start=2):
        if len(row) != len(header):
            raise AdapterError(f"{file_uri}: row {i} has {len(row)} columns, header has {len(header)}")

    columns = list(zip(*data_rows)) if data_rows else [() for _ in fields]
    types = [_infer_csv_type(col, file_uri, fields[i]) for i, col in enumerate(columns)]
    values: list[list] = []
    for row in data_rows:
        values.append([_csv_cell(cell, t) for cell, t in zip(row, types)])
    return _build_fragment(file_uri, workspace_root, fields, types, values,
                           single_object=False)


def _infer_csv_type(column, file_uri: str, field: str) -> str:
    cells = [c.strip() for c in column]
    non_empty = [c for c in cells if c != ""]
    if not non_empty:
        return "String"
    if all(c in ("true", "false") for c in non_empty):
        kind = "Boolean"
    elif all(_is_decimal(c) for c in non_empty):
        kind = "Integer" if all(not any(x in c for x in ".eE") for c in non_empty) else "Real"
    else:
        kind = "String"
    if kind != "String" and len(non_empty) != len(cells):
        raise AdapterError(f"{file_uri}: column '{field}' has empty cells but is not a String column")
    return kind


def _is_decimal(cell: str) -> bool:
    body = cell[1:] if cell[:1] in "+-" else cell
    if not body:
        return False
    try:
        float(body)
    except ValueError:
        return False
    # exclude exotic float syntax the Modelica grammar has no literal for
    return not any(x in body.lower() for x in ("inf", "nan", "_"))


def _csv_cell(cell: str, kind: str):
    text = cell.strip()
    if kind == "String":
        return cell
    if kind == "Boolean":
        return text == "true"
    if kind == "Integer":
        return int(text)
    return float(text)


# ---------------------------------------------------------------------------
# JSON


def adapt_json(data: bytes, file_uri: str, workspace_root: str = "") -> VirtualFragment:
    try:
        doc = json.loads(data.decode("utf-8-sig"))
    except json.JSONDecodeError as exc:
        raise AdapterError(f"{file_uri}: invalid JSON: {exc}") from exc
    if isinstance(doc, dict):
        fields, types, row = _object_shape(doc, file_uri)
        return _build_fragment(file_uri, workspace_root, fields, types, [row],
                               single_object=True)
    if isinstance(doc, list):
        if not doc or not all(isinstance(el, dict) for el in doc):
            raise AdapterError(f"{file_uri}: JSON root must be an object or an array of objects")
        keysets = {tuple(el.keys()) for el in doc}
        if len(keysets) > 1:
            raise AdapterError(f"{file_uri}: array elements have different key sets")
        shapes = [_object_shape(el, file_uri) for el in doc]
        fields = shapes[0][0]
        types = list(shapes[0][1])
        for _, t, _ in shapes[1:]:
            for i, (a, b) in enumerate(zip(types, t)):
                types[i] = _unify_type(a, b, file_uri, fields[i])
        rows = [row for _, _, row in shapes]
        return _build_fragment(file_uri, workspace_root, fields, types, rows,
                               single_object=False)
    raise AdapterError(f"{file_uri}: JSON root must be an object or an array of objects")


def _object_shape(obj: dict, file_uri: str):
    fields: list[str] = []
    types: list = []
    row: list = []
    for key, value in obj.items():
        fields.append(sanitize_identifier(str(key)))
        kind, converted = _json_value(value, file_uri, key)
        types.append(kind)
        row.append(converted)
    if len(set(fields)) != len(fields):
        raise AdapterError(f"{file_uri}: duplicate sanitized keys")
    return fields, types, row


def _json_value(value, file_uri: str, key: str):
    if value is None:
        raise AdapterError(f"{file_uri}: null value for '{key}' has no Modelica representation")
    if isinstance(value, bool):
        return "Boolean", value
    if isinstance(value, int):
        return "Integer", value
    if isinstance(value, float):
        return "Real", value
    if isinstance(value, str):
        return "String", value
    if isinstance(value, list):
        if not value:
            raise AdapterError(f"{file_uri}: empty array for '{key}' cannot be typed")
        kinds_vals = [_json_value(el, file_uri, key) for el in value]
        kinds = {k for k, _ in kinds_vals}
        if kinds == {"Integer", "Real"}:
            kinds = {"Real"}
            kinds_vals = [("Real", float(v)) for _, v in kinds_vals]
        if len(kinds) > 1 or any(isinstance(k, tuple) for k in kinds):
            raise AdapterError(f"{file_uri}: array for '{key}' mixes types")
        kind = kinds.pop()
        return ("array", kind, len(value)), [v for _, v in kinds_vals]
    if isinstance(value, dict):
        fields, types, row = _object_shape(value, file_uri)
        return ("record", key, tuple(fields), tuple(types)), dict(zip(fields, row))
    raise AdapterError(f"{file_uri}: unsupported JSON value for '{key}'")


def _unify_type(a, b, file_uri: str, field: str):
    if a == b:
        return a
    if {a, b} == {"Integer", "Real"}:
        return "Real"
    raise AdapterError(f"{file_uri}: column '{field}' mixes types ({a} vs {b})")


# ---------------------------------------------------------------------------
# fragment assembly


def _build_fragment(file_uri: str, workspace_root: str, fields: list[str], types: list,
                    rows: list[list], single_object: bool) -> VirtualFragment:
    within, package = infer_namespace(file_uri, workspace_root)
    record_name = package

    nested_records: list[ast.AstClass] = []
    components = tuple(
        _field_component(name, kind, record_name, nested_records)
        for name, kind in zip(fields, types)
    )
    record = ast.AstClass(name=record_name, restriction=ast.Restriction.RECORD,
                          components=components,
                          nested_classes=tuple(nested_records))

    ctor_calls = [_constructor_call(record_name, fields, types, row) for row in rows]
    if single_object:
        binding: ast.Expr = ctor_calls[0]
        subs: tuple = ()
    else:
        binding = ast.ArrayExpr(elements=tuple(ctor_calls))
        subs = (ast.Colon(),)

    root_comp = ast.Component(type_name=record_name, name="root",
                              array_subscripts=subs,
                              variability=ast.Variability.CONSTANT,
                              modification=ast.Modification(binding=binding))
    pkg = ast.AstClass(name=package, restriction=ast.Restriction.PACKAGE,
                       nested_classes=(record,), components=(root_comp,))
    stored = ast.StoredDefinition(within=within if within else None, classes=(pkg,))

    text = print_stored_definition(stored)
    tree, diags = parse(text, file_uri)
    if diags:
        raise AdapterError(f"{file_uri}: generated fragment does not parse: {diags[0].message}")
    lowered, lower_diags = lower(tree, file_uri)
    if lower_diags:
        raise AdapterError(f"{file_uri}: generated fragment does not lower cleanly")
    return VirtualFragment(modelica_text=text, ast=lowered, provenance_uri=file_uri,
                           package_path=within)


def _field_component(name: str, kind, record_name: str,
                     nested_records: list[ast.AstClass]) -> ast.Component:
    if isinstance(kind, tuple) and kind[0] == "array":
        _, elem_kind, length = kind
        return ast.Component(type_name=elem_kind, name=name,
                             array_subscripts=(ast.IntLit(length),))
    if isinstance(kind, tuple) and kind[0] == "record":
        _, key, sub_fields, sub_types = kind
        nested_name = sanitize_identifier(str(key))[:1].upper() + sanitize_identifier(str(key))[1:]
        sub_nested: list[ast.AstClass] = []
        sub_comps = tuple(_field_component(f, t, nested_name, sub_nested)
                          for f, t in zip(sub_fields, sub_types))
        nested_records.append(ast.AstClass(name=nested_name, restriction=ast.Restriction.RECORD,
                                           components=sub_comps,
                                           nested_classes=tuple(sub_nested)))
        return ast.Component(type_name=nested_name, name=name)
    return ast.Component(type_name=kind, name=name)


def _constructor_call(record_name: str, fields: list[str], types: list, row: list) -> ast.Call:
    named = tuple((name, _value_expr(value, kind))
                  for name, kind, value in zip(fields, types, row))
    return ast.Call(callee=ast.Ref(parts=(ast.RefPart(record_name, ()),)), named_args=named)


def _value_expr(value, kind) -> ast.Expr:
    if isinstance(kind, tuple) and kind[0] == "array":
        return ast.ArrayExpr(elements=tuple(_value_expr(v, kind[1]) for v in value))
    if isinstance(kind, tuple) and kind[0] == "record":
        _, key, sub_fields, sub_types = kind
        nested_name = sanitize_identifier(str(key))[:1].upper() + sanitize_identifier(str(key))[1:]
        named = tuple((f, _value_expr(value[f], t)) for f, t in zip(sub_fields, sub_types))
        return ast.Call(callee=ast.Ref(parts=(ast.RefPart(nested_name, ()),)), named_args=named)
    if kind == "Boolean":
        return ast.BoolLit(bool(value))
    if kind == "Integer":
        return ast.IntLit(int(value))
    if kind == "Real":
        return ast.RealLit(float(value))
    return ast.StringLit(str(value))


# ---------------------------------------------------------------------------
# registry


class AdapterRegistry:
    """Extension -> adapter function; extensions are lower-case and unique."""

    def __init__(self):
        self._adapters: dict[str, Callable[[bytes, str, str], VirtualFragment]] = {}

    def register(self, extension: str, fn: Callable[[bytes, str, str], VirtualFragment]) -> None:
        ext = extension.lower().lstrip(".")
        if ext in self._adapters:
            raise AdapterError(f"adapter for '.{ext}' already registered")
        self._adapters[ext] = fn

    def for_file(self, file_uri: str) -> Optional[Callable[[bytes, str, str], VirtualFragment]]:
        ext = file_uri.rsplit(".", 1)[-1].lower() if "." in file_uri else ""
        return self._adapters.get(ext)

    def extensions(self) -> list[str]:
        return sorted(self._adapters)


def default_registry() -> AdapterRegistry:
    registry = AdapterRegistry()
    registry.register("csv", adapt_csv)
    registry.register("json", adapt_json)
    return registry
