"""Lexical name lookup over the class tree.

Implements enclosing-scope lookup with qualified, renamed, and unqualified
imports. inner/outer is not part of the supported language subset.
"""
from __future__ import annotations

from typing import Optional

from ..diagnostics import SEM_AMBIGUOUS_IMPORT, SEM_UNRESOLVED_NAME
from ..syntax import tree as ast
from .classtree import BUILTIN_TYPES, ClassEntry, ClassTree


class ResolveError(Exception):
    def __init__(self, code: str, message: str, scope: str):
        super().__init__(message)
        self.code = code
        self.message = message
        self.scope = scope  # innermost scope searched


def resolve(tree: ClassTree, name: str, scope: str) -> str:
    """Resolve ``name`` from ``scope`` (a class qname, '' = top level).

    Returns the qualified name of the found class. Raises ResolveError with
    the innermost scope searched on failure.
    """
    parts = name.split(".")
    base = _lookup_first(tree, parts[0], scope)
    if base is None:
        raise ResolveError(SEM_UNRESOLVED_NAME, f"cannot resolve '{name}' from scope '{scope or '<top>'}'", scope)
    qname = base
    for part in parts[1:]:
        member = _lookup_member(tree, qname, part)
        if member is None:
            raise ResolveError(SEM_UNRESOLVED_NAME,
                               f"'{qname}' has no member class '{part}'", qname)
        qname = member
    return qname


def _lookup_first(tree: ClassTree, simple: str, scope: str) -> Optional[str]:
    cur: Optional[str] = scope
    while cur is not None:
        if cur == "":
            if tree.has(simple):
                return simple
            return None
        entry = tree.get(cur)
        if entry is None:
            cur = cur.rsplit(".", 1)[0] if "." in cur else ""
            continue
        found = _lookup_member(tree, cur, simple)
        if found is not None:
            return found
        found = _lookup_imports(tree, entry, simple)
        if found is not None:
            return found
        if entry.ast is not None and entry.ast.encapsulated:
            # encapsulation boundary: only predefined types remain visible
            return simple if simple in BUILTIN_TYPES else None
        cur = entry.parent
    return None


def _lookup_member(tree: ClassTree, qname: str, simple: str,
                   seen: Optional[set] = None) -> Optional[str]:
    """Find member class ``simple`` of class ``qname``, following aliases,
    tree placement, and inherited members."""
    if seen is None:
        seen = set()
    if qname in seen:
        return None
    seen.add(qname)

    entry = tree.get(qname)
    if entry is None:
        return None
    if entry.ast is not None and entry.ast.is_short_class():
        target = _dealias(tree, entry)
        if target is None:
            return None
        return _lookup_member(tree, target, simple, seen)

    candidate = f"{qname}.{simple}"
    if tree.has(candidate):
        return candidate
    if entry.ast is not None:
        for ext in entry.ast.extends_clauses:
            try:
                base = resolve(tree, ext.base_name, entry.parent)
            except ResolveError:
                continue
            found = _lookup_member(tree, base, simple, seen)
            if found is not None:
                return found
    return None


def _lookup_imports(tree: ClassTree, entry: ClassEntry, simple: str) -> Optional[str]:
    if entry.ast is None:
        return None
    matches: list[str] = []
    for imp in entry.ast.imports:
        if imp.alias is not None:
            if imp.alias == simple and tree.has(imp.name):
                return imp.name
            continue
        if imp.wildcard:
            candidate = f"{imp.name}.{simple}"
            if tree.has(candidate):
                matches.append(candidate)
            continue
        if imp.selection:
            if simple in imp.selection and tree.has(f"{imp.name}.{simple}"):
                return f"{imp.name}.{simple}"
            continue
        if imp.name.rsplit(".", 1)[-1] == simple and tree.has(imp.name):
            return imp.name
    if len(matches) > 1:
        raise ResolveError(SEM_AMBIGUOUS_IMPORT,
                           f"'{simple}' is ambiguous among unqualified imports: {sorted(matches)}",
                           entry.qname)
    if matches:
        return matches[0]
    return None


def _dealias(tree: ClassTree, entry: ClassEntry) -> Optional[str]:
    seen = set()
    cur = entry
    while cur.ast is not None and cur.ast.is_short_class():
        if cur.qname in seen:
            return None
        seen.add(cur.qname)
        try:
            target = resolve(tree, cur.ast.alias_target, cur.parent)
        except ResolveError:
            return None
        nxt = tree.get(target)
        if nxt is None:
            return None
        cur = nxt
    return cur.qname


def resolve_entry(tree: ClassTree, name: str, scope: str) -> ClassEntry:
    qname = resolve(tree, name, scope)
    entry = tree.get(qname)
    assert entry is not None
    return entry
