from __future__ import annotations

import json
import os

import pytest

from mhub.semver import Range, SemverError, Version, max_satisfying, satisfies
from mhub.workspace import Manifest, WorkspaceError, publish, resolve_dependencies, scan


# -- semver ----------------------------------------------------------------------


def test_version_parse_and_order():
    assert Version.parse("1.2.3") < Version.parse("1.2.10")
    assert Version.parse("1.2.3") < Version.parse("1.10.0")
    assert Version.parse("2.0.0-rc.1") < Version.parse("2.0.0")
    assert Version.parse("1.0.0-alpha") < Version.parse("1.0.0-alpha.1")
    assert Version.parse("1.0.0-1") < Version.parse("1.0.0-alpha")
    with pytest.raises(SemverError):
        Version.parse("1.2")
    with pytest.raises(SemverError):
        Version.parse("v1.2.3")


@pytest.mark.parametrize("version,range_text,expected", [
    ("1.1.0", "^1.0.0", True),
    ("2.0.0", "^1.0.0", False),
    ("0.1.5", "^0.1.2", True),
    ("0.2.0", "^0.1.2", False),
    ("1.2.9", "~1.2.3", True),
    ("1.3.0", "~1.2.3", False),
    ("1.5.0", ">=1.0.0 <2.0.0", True),
    ("2.0.0", ">=1.0.0 <2.0.0", False),
    ("3.1.4", "*", True),
    ("1.7.0", "1.x", True),
    ("2.0.0", "1.x", False),
    ("1.2.5", "1.2.x", True),
    ("1.0.0", "1.0.0", True),
    ("1.0.1", "=1.0.0", False),
])
def test_satisfies(version, range_text, expected):
    assert satisfies(version, range_text) is expected


def test_max_satisfying():
    assert max_satisfying(["1.0.0", "1.1.0", "2.0.0"], "^1.0.0") == "1.1.0"
    assert max_satisfying(["1.0.0", "1.2.0"], "^2.0.0") is None


def test_prerelease_needs_explicit_opt_in():
    assert not satisfies("1.2.0-beta", "^1.0.0")
    assert satisfies("1.2.0-beta", ">=1.2.0-alpha")


# -- manifest ---------------------------------------------------------------------


def test_manifest_parse():
    m = Manifest.parse(json.dumps({
        "name": "acme-lib", "version": "1.2.3",
        "dependencies": {"base": "^1.0.0"},
        "modelicaSourceDir": "models",
        "unrelated": {"ignored": True},
    }))
    assert m.name == "acme-lib"
    assert m.dependencies == {"base": "^1.0.0"}
    assert m.source_dir == "models"


def test_manifest_errors():
    with pytest.raises(WorkspaceError):
        Manifest.parse("{")
    with pytest.raises(WorkspaceError):
        Manifest.parse(json.dumps({"version": "1.0.0"}))
    with pytest.raises(WorkspaceError):
        Manifest.parse(json.dumps({"name": "x", "version": "nope"}))
    with pytest.raises(WorkspaceError):
        Manifest.parse(json.dumps({"name": "x", "version": "1.0.0",
                                   "dependencies": {"x": "^1.0.0"}}))


# -- scanning ----------------------------------------------------------------------


def _write(root, rel, content):
    path = os.path.join(root, rel)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    mode = "wb" if isinstance(content, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(content)


def test_scan_discovers_and_adapts(tmp_path):
    root = str(tmp_path)
    _write(root, "acme/engine/MassBudget.csv",
           "subsystem,initial-mass,margin,budget-mass\nPayload,18.2,7.8,26.0\n")
    _write(root, "Decay.mo", "model Decay Real x(start=1); equation der(x) = -x; end Decay;")
    _write(root, "notes/overview.md", "# Overview\nBudget: {{ x }}\n")
    _write(root, ".hidden/skipme.mo", "model Bad end;")  # hidden dirs skipped
    ws = scan(root)
    assert ws.class_tree.has("acme.engine.MassBudget")
    assert ws.class_tree.has("Decay")
    assert ws.markdown_files == ["notes/overview.md"]
    assert [f.package_qname for f in ws.fragments] == ["acme.engine.MassBudget"]
    assert not ws.diagnostics


def test_scan_empty_directory(tmp_path):
    ws = scan(str(tmp_path))
    assert ws.diagnostics == []
    assert all(e.uri == "<builtin>" for e in ws.class_tree.entries.values())


def test_scan_unreadable_root():
    with pytest.raises(WorkspaceError):
        scan("/nonexistent/nowhere")


def test_rescan_stability(tmp_path):
    root = str(tmp_path)
    _write(root, "b.mo", "model B end B;")
    _write(root, "a.mo", "model A end A;")
    _write(root, "t.csv", "x\n1\n")
    ws1 = scan(root)
    ws2 = scan(root)
    assert sorted(ws1.class_tree.entries) == sorted(ws2.class_tree.entries)
    assert [s.uri for s in ws1.sources] == [s.uri for s in ws2.sources]
    assert ws1.diagnostics == ws2.diagnostics


def test_scan_reports_parse_diagnostics(tmp_path):
    root = str(tmp_path)
    _write(root, "bad.mo", "model Broken Real x end Broken;")
    ws = scan(root)
    assert any(d.code == "SYN001" and d.uri == "bad.mo" for d in ws.diagnostics)


# -- registry / dependencies ---------------------------------------------------------


def _registry_package(registry, name, version, deps=None, classes="model Thing end Thing;"):
    base = os.path.join(registry, name, version)
    _write(base, "package.json", json.dumps({
        "name": name, "version": version, "dependencies": deps or {}}))
    _write(base, "src/lib.mo", f"within {name.replace('-', '_')}lib;\n{classes}")


def test_maximal_satisfying_resolution(tmp_path):
    registry = str(tmp_path / "registry")
    _registry_package(registry, "lib", "1.0.0")
    _registry_package(registry, "lib", "1.2.0")
    _registry_package(registry, "lib", "2.0.0")
    manifest = Manifest(name="host", version="0.1.0", dependencies={"lib": "^1.0.0"})
    resolved = resolve_dependencies(manifest, registry)
    assert [(n, v) for n, v, _ in resolved] == [("lib", "1.2.0")]


def test_transitive_resolution_breadth_first(tmp_path):
    registry = str(tmp_path / "registry")
    _registry_package(registry, "a", "1.0.0", deps={"b": "^1.0.0"})
    _registry_package(registry, "b", "1.1.0")
    manifest = Manifest(name="host", version="0.1.0", dependencies={"a": "^1.0.0"})
    resolved = resolve_dependencies(manifest, registry)
    assert [(n, v) for n, v, _ in resolved] == [("a", "1.0.0"), ("b", "1.1.0")]


def test_dependency_cycle_error(tmp_path):
    registry = str(tmp_path / "registry")
    _registry_package(registry, "a", "1.0.0", deps={"b": "^1.0.0"})
    _registry_package(registry, "b", "1.0.0", deps={"a": "^1.0.0"})
    manifest = Manifest(name="host", version="0.1.0", dependencies={"a": "^1.0.0"})
    with pytest.raises(WorkspaceError) as err:
        resolve_dependencies(manifest, registry)
    assert "cycle" in str(err.value)
    assert "a -> b -> a" in str(err.value)


def test_unsatisfiable_range_conflict(tmp_path):
    registry = str(tmp_path / "registry")
    _registry_package(registry, "a", "1.0.0")
    _registry_package(registry, "a", "2.0.0")
    _registry_package(registry, "b", "1.0.0", deps={"a": "^2.0.0"})
    manifest = Manifest(name="host", version="0.1.0",
                        dependencies={"a": "^1.0.0", "b": "^1.0.0"})
    with pytest.raises(WorkspaceError) as err:
        resolve_dependencies(manifest, registry)
    assert "no version of 'a'" in str(err.value)


def test_missing_package_error(tmp_path):
    registry = str(tmp_path / "registry")
    os.makedirs(registry)
    manifest = Manifest(name="host", version="0.1.0", dependencies={"ghost": "*"})
    with pytest.raises(WorkspaceError) as err:
        resolve_dependencies(manifest, registry)
    assert "not found" in str(err.value)


def test_scan_with_dependencies_makes_classes_visible(tmp_path):
    registry = str(tmp_path / "registry")
    _registry_package(registry, "lib", "1.0.0",
                      classes="model Widget parameter Real size = 1; end Widget;")
    _registry_package(registry, "lib", "1.2.0",
                      classes="model Widget parameter Real size = 2; end Widget;")
    root = str(tmp_path / "ws")
    _write(root, "package.json", json.dumps({
        "name": "host", "version": "0.1.0", "dependencies": {"lib": "^1.0.0"}}))
    _write(root, "src/Use.mo", "model Use liblib.Widget w; end Use;")
    ws = scan(root, registry)
    assert ws.class_tree.has("liblib.Widget")
    assert ws.dependency_roots == [("lib@1.2.0", os.path.join(registry, "lib", "1.2.0"))]
    # dependency uris carry the name@version prefix
    entry = ws.class_tree.get("liblib.Widget")
    assert entry.uri.startswith("lib@1.2.0/")


def test_publish_round_trip(tmp_path):
    root = str(tmp_path / "pkg")
    registry = str(tmp_path / "registry")
    _write(root, "package.json", json.dumps({"name": "mylib", "version": "0.3.0"}))
    _write(root, "src/A.mo", "model A end A;")
    name, version = publish(root, registry)
    assert (name, version) == ("mylib", "0.3.0")
    assert os.path.isfile(os.path.join(registry, "mylib", "0.3.0", "src", "A.mo"))
    with pytest.raises(WorkspaceError):
        publish(root, registry)  # same version twice
