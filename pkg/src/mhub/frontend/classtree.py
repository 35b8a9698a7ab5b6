"""Class tree construction: qualified names over all loaded source units."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..diagnostics import SEM_DUPLICATE_CLASS, Diagnostic, Severity
from ..syntax import tree as ast

BUILTIN_TYPES = frozenset(["Real", "Integer", "Boolean", "String"])

# attribute name -> default, per builtin type
BUILTIN_ATTRIBUTES: dict[str, dict[str, object]] = {
    "Real": {"quantity": "", "unit": "", "displayUnit": "", "min": float("-inf"),
             "max": float("inf"), "start": 0.0, "fixed": False, "nominal": 1.0},
    "Integer": {"quantity": "", "min": -2**31, "max": 2**31 - 1, "start": 0, "fixed": False},
    "Boolean": {"quantity": "", "start": False, "fixed": False},
    "String": {"quantity": "", "start": ""},
}


@dataclass
class ClassEntry:
    qname: str
    ast: Optional[ast.AstClass]  # None for synthetic package / builtin entries
    parent: str  # enclosing scope qname, '' for top level
    restriction: ast.Restriction
    uri: str
    synthetic: bool = False

    @property
    def name(self) -> str:
        return self.qname.rsplit(".", 1)[-1]


@dataclass
class ClassTree:
    entries: dict[str, ClassEntry] = field(default_factory=dict)

    def get(self, qname: str) -> Optional[ClassEntry]:
        return self.entries.get(qname)

    def has(self, qname: str) -> bool:
        return qname in self.entries

    def children_of(self, qname: str) -> list[ClassEntry]:
        return [e for e in self.entries.values() if e.parent == qname]

    def subclasses_of(self, qname: str) -> list[ClassEntry]:
        """Entries whose direct extends clauses name ``qname`` (resolved)."""
        from .resolve import resolve, ResolveError

        out = []
        for entry in self.entries.values():
            if entry.ast is None:
                continue
            for ext in entry.ast.extends_clauses:
                try:
                    if resolve(self, ext.base_name, entry.parent) == qname:
                        out.append(entry)
                        break
                except ResolveError:
                    continue
        return out

    def iter_sorted(self):
        return (self.entries[k] for k in sorted(self.entries))


def build_class_tree(units: list[tuple[ast.StoredDefinition, str]]) -> tuple[ClassTree, list[Diagnostic]]:
    """Place every class definition at its qualified path.

    ``units`` must already be in the deterministic order the workspace chose
    (dependencies before own sources, lexicographic within each): on duplicate
    names the later unit wins and a SEM001 diagnostic is reported.
    """
    tree = ClassTree()
    diags: list[Diagnostic] = []

    for name in BUILTIN_TYPES:
        tree.entries[name] = ClassEntry(qname=name, ast=None, parent="",
                                        restriction=ast.Restriction.TYPE,
                                        uri="<builtin>", synthetic=True)

    for stored, uri in units:
        prefix = stored.within or ""
        _ensure_packages(tree, prefix, uri)
        for cls in stored.classes:
            _insert(tree, cls, prefix, uri, diags)
    return tree, diags


def _ensure_packages(tree: ClassTree, prefix: str, uri: str) -> None:
    if not prefix:
        return
    parts = prefix.split(".")
    for i in range(1, len(parts) + 1):
        qname = ".".join(parts[:i])
        if not tree.has(qname):
            tree.entries[qname] = ClassEntry(
                qname=qname, ast=None, parent=".".join(parts[: i - 1]),
                restriction=ast.Restriction.PACKAGE, uri=uri, synthetic=True,
            )


def _insert(tree: ClassTree, cls: ast.AstClass, parent: str, uri: str,
            diags: list[Diagnostic]) -> None:
    qname = f"{parent}.{cls.name}" if parent else cls.name
    existing = tree.get(qname)
    if existing is not None and not existing.synthetic:
        diags.append(Diagnostic(uri, cls.span[0], cls.span[1], Severity.ERROR,
                                SEM_DUPLICATE_CLASS,
                                f"duplicate definition of '{qname}' (also in {existing.uri})"))
        # last writer wins wholesale: drop the replaced definition's children
        stale_prefix = qname + "."
        for key in [k for k in tree.entries if k.startswith(stale_prefix)]:
            del tree.entries[key]
    tree.entries[qname] = ClassEntry(qname=qname, ast=cls, parent=parent,
                                     restriction=cls.restriction, uri=uri)
    for nested in cls.nested_classes:
        _insert(tree, nested, qname, uri, diags)
