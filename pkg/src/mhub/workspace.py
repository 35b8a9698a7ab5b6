"""Workspace scanning: discover sources, run adapters, resolve dependencies,
and build the unified class tree."""
from __future__ import annotations

import json
import os
import posixpath
from dataclasses import dataclass, field
from typing import Optional

from .adapters import AdapterError, AdapterRegistry, VirtualFragment, default_registry
from .diagnostics import Diagnostic, Severity, sort_key
from .frontend import ClassTree, build_class_tree
from .semver import SemverError, Version, max_satisfying, satisfies
from .syntax import SourceKind, SourceUnit, lower, parse
from .syntax import tree as ast

SKIP_DIRS = frozenset([".git", ".hg", ".svn", "node_modules", "vendor", "__pycache__", "build"])


class WorkspaceError(Exception):
    pass


@dataclass
class Manifest:
    name: str
    version: str
    dependencies: dict[str, str] = field(default_factory=dict)
    source_dir: str = "src"

    @classmethod
    def parse(cls, text: str, uri: str = "package.json") -> "Manifest":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise WorkspaceError(f"{uri}: invalid manifest JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise WorkspaceError(f"{uri}: manifest must be a JSON object")
        name = doc.get("name")
        if not name or not isinstance(name, str):
            raise WorkspaceError(f"{uri}: manifest needs a non-empty 'name'")
        version = doc.get("version", "0.0.0")
        try:
            Version.parse(version)
        except SemverError as exc:
            raise WorkspaceError(f"{uri}: bad version: {exc}") from exc
        deps = doc.get("dependencies", {})
        if not isinstance(deps, dict):
            raise WorkspaceError(f"{uri}: 'dependencies' must be an object")
        if name in deps:
            raise WorkspaceError(f"{uri}: package '{name}' depends on itself")
        source_dir = doc.get("modelicaSourceDir", "src")
        return cls(name=name, version=version,
                   dependencies={str(k): str(v) for k, v in deps.items()},
                   source_dir=source_dir)


@dataclass
class Workspace:
    root: str
    manifest: Optional[Manifest]
    sources: list[SourceUnit]
    fragments: list[VirtualFragment]
    markdown_files: list[str]
    class_tree: ClassTree
    diagnostics: list[Diagnostic]
    dependency_roots: list[tuple[str, str]] = field(default_factory=list)  # (name@version, path)


def scan(root: str, registry_dir: Optional[str] = None,
         adapters: Optional[AdapterRegistry] = None) -> Workspace:
    """Scan ``root`` into a Workspace with a fully built class tree."""
    if not os.path.isdir(root):
        raise WorkspaceError(f"workspace root {root!r} is not a readable directory")
    adapters = adapters or default_registry()
    diagnostics: list[Diagnostic] = []

    manifest = _load_manifest(root)
    dep_units: list[tuple[ast.StoredDefinition, str]] = []
    dependency_roots: list[tuple[str, str]] = []
    if manifest is not None and manifest.dependencies:
        if registry_dir is None:
            diagnostics.append(Diagnostic("package.json", 0, 0, Severity.WARNING, "WSP001",
                                          "manifest declares dependencies but no registry was given"))
        else:
            resolved = resolve_dependencies(manifest, registry_dir)
            for dep_name, dep_version, dep_path in resolved:
                dependency_roots.append((f"{dep_name}@{dep_version}", dep_path))
                dep_manifest = _load_manifest(dep_path)
                src_dir = os.path.join(dep_path, dep_manifest.source_dir) \
                    if dep_manifest else os.path.join(dep_path, "src")
                if not os.path.isdir(src_dir):
                    src_dir = dep_path
                units, _, _, dep_diags = _scan_sources(src_dir, adapters,
                                                       uri_prefix=f"{dep_name}@{dep_version}/")
                dep_units.extend(units)
                diagnostics.extend(dep_diags)

    source_root = root
    if manifest is not None:
        candidate = os.path.join(root, manifest.source_dir)
        if os.path.isdir(candidate):
            source_root = candidate

    own_units, sources, fragments, own_diags = _scan_sources(source_root, adapters)
    diagnostics.extend(own_diags)
    markdown = _find_markdown(source_root)

    class_tree, tree_diags = build_class_tree(dep_units + own_units)
    diagnostics.extend(tree_diags)
    diagnostics.sort(key=sort_key)
    return Workspace(root=root, manifest=manifest, sources=sources, fragments=fragments,
                     markdown_files=markdown, class_tree=class_tree,
                     diagnostics=diagnostics, dependency_roots=dependency_roots)


def _load_manifest(root: str) -> Optional[Manifest]:
    path = os.path.join(root, "package.json")
    if not os.path.isfile(path):
        return None
    with open(path, encoding="utf-8") as fh:
        return Manifest.parse(fh.read(), uri=path)


def _scan_sources(source_root: str, adapters: AdapterRegistry, uri_prefix: str = ""):
    units: list[tuple[ast.StoredDefinition, str]] = []
    sources: list[SourceUnit] = []
    fragments: list[VirtualFragment] = []
    diagnostics: list[Diagnostic] = []

    for rel_path in _walk_files(source_root):
        uri = uri_prefix + rel_path
        full = os.path.join(source_root, rel_path)
        if rel_path.endswith(".mo"):
            with open(full, encoding="utf-8", errors="replace") as fh:
                text = fh.read()
            unit = SourceUnit(uri=uri, text=text, kind=SourceKind.MODELICA)
            sources.append(unit)
            tree, parse_diags = parse(text, uri)
            diagnostics.extend(parse_diags)
            stored, lower_diags = lower(tree, uri)
            diagnostics.extend(lower_diags)
            units.append((stored, uri))
            continue
        adapter = adapters.for_file(rel_path)
        if adapter is not None:
            with open(full, "rb") as fh:
                data = fh.read()
            try:
                fragment = adapter(data, uri if not uri_prefix else rel_path, "")
            except AdapterError as exc:
                diagnostics.append(Diagnostic(uri, 0, 0, Severity.ERROR, "ADP001", str(exc)))
                continue
            fragments.append(fragment)
            sources.append(SourceUnit(uri=uri, text=fragment.modelica_text,
                                      kind=SourceKind.VIRTUAL_MODELICA))
            units.append((fragment.ast, uri))
    return units, sources, fragments, diagnostics


def _walk_files(source_root: str) -> list[str]:
    out: list[str] = []
    for dirpath, dirnames, filenames in os.walk(source_root):
        dirnames[:] = sorted(d for d in dirnames if d not in SKIP_DIRS and not d.startswith("."))
        rel_dir = os.path.relpath(dirpath, source_root)
        for name in sorted(filenames):
            if name.startswith("."):
                continue
            rel = name if rel_dir == "." else posixpath.join(*rel_dir.split(os.sep), name)
            out.append(rel)
    return sorted(out)


def _find_markdown(source_root: str) -> list[str]:
    return [p for p in _walk_files(source_root) if p.endswith(".md")]


# ---------------------------------------------------------------------------
# dependency resolution


def resolve_dependencies(manifest: Manifest, registry_dir: str) -> list[tuple[str, str, str]]:
    """Breadth-first maximal-satisfying resolution over a local registry.

    Registry layout: <registry_dir>/<name>/<version>/{package.json, src/...}.
    Returns (name, version, path) triples in resolution order.
    """
    constraints: dict[str, list[str]] = {}
    resolved: dict[str, tuple[str, str]] = {}
    order: list[str] = []
    queue: list[tuple[str, str, tuple[str, ...]]] = [
        (name, rng, (manifest.name,)) for name, rng in sorted(manifest.dependencies.items())
    ]

    while queue:
        name, rng, chain = queue.pop(0)
        if name in chain:
            cycle = " -> ".join(chain + (name,))
            raise WorkspaceError(f"dependency cycle: {cycle}")
        constraints.setdefault(name, []).append(rng)
        available = _available_versions(registry_dir, name)
        if not available:
            raise WorkspaceError(f"package '{name}' not found in registry {registry_dir}")
        candidates = [v for v in available
                      if all(satisfies(v, r) for r in constraints[name])]
        if not candidates:
            ranges = ", ".join(sorted(set(constraints[name])))
            raise WorkspaceError(
                f"no version of '{name}' satisfies all required ranges ({ranges}); "
                f"available: {', '.join(available)}")
        best = max_satisfying(candidates, "*")
        assert best is not None
        previous = resolved.get(name)
        resolved[name] = (best, os.path.join(registry_dir, name, best))
        if name not in order:
            order.append(name)
        if previous is not None and previous[0] == best:
            continue
        dep_manifest = _load_manifest(os.path.join(registry_dir, name, best))
        if dep_manifest is not None:
            for sub_name, sub_range in sorted(dep_manifest.dependencies.items()):
                queue.append((sub_name, sub_range, chain + (name,)))

    return [(name, resolved[name][0], resolved[name][1]) for name in order]


def _available_versions(registry_dir: str, name: str) -> list[str]:
    pkg_dir = os.path.join(registry_dir, name)
    if not os.path.isdir(pkg_dir):
        return []
    versions = []
    for entry in sorted(os.listdir(pkg_dir)):
        if os.path.isdir(os.path.join(pkg_dir, entry)):
            try:
                Version.parse(entry)
            except SemverError:
                continue
            versions.append(entry)
    return versions


def publish(workspace_root: str, registry_dir: str) -> tuple[str, str]:
    """Copy the workspace into the registry as <name>/<version>/."""
    import shutil

    manifest = _load_manifest(workspace_root)
    if manifest is None:
        raise WorkspaceError(f"{workspace_root}: no package.json to publish")
    target = os.path.join(registry_dir, manifest.name, manifest.version)
    if os.path.exists(target):
        raise WorkspaceError(f"{manifest.name}@{manifest.version} is already published")
    os.makedirs(os.path.dirname(target), exist_ok=True)
    shutil.copytree(workspace_root, target,
                    ignore=shutil.ignore_patterns(*SKIP_DIRS, ".*"))
    return manifest.name, manifest.version
