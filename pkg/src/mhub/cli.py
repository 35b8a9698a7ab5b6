"""mh: command-line entry point.

Every command is a thin binding over the module operations; output is JSON
on stdout unless --text is given. Exit codes: 0 success, 1 diagnostics or
operation errors, 2 usage errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

from . import __version__
from .diagnostics import Severity, has_errors


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "fn"):
        parser.print_help()
        return 2
    try:
        return args.fn(args)
    except BrokenPipeError:
        return 0
    except KeyboardInterrupt:
        return 130


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mh", description=__doc__)
    parser.add_argument("--version", action="version", version=f"mh {__version__}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("parse", help="parse a Modelica file and dump its tree")
    p.add_argument("file")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--cst", action="store_true", help="dump the concrete syntax tree")
    mode.add_argument("--ast", action="store_true", help="dump the lowered AST (default)")
    p.add_argument("--text", action="store_true")
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("check", help="scan a workspace and report diagnostics")
    p.add_argument("dir", nargs="?", default=".")
    p.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    p.add_argument("--text", action="store_true")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("flatten", help="flatten a class to its variable/equation set")
    p.add_argument("cls", metavar="class")
    p.add_argument("--dir", default=".")
    p.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    p.add_argument("--json", action="store_true", help="JSON output (the default)")
    p.add_argument("--text", action="store_true")
    p.set_defaults(fn=cmd_flatten)

    p = sub.add_parser("adapt", help="print the virtual Modelica for a data artifact")
    p.add_argument("file")
    p.add_argument("--root", default="", help="workspace root for namespace inference")
    p.set_defaults(fn=cmd_adapt)

    graph = sub.add_parser("graph", help="knowledge-graph operations")
    gsub = graph.add_subparsers(dest="graph_command")
    g = gsub.add_parser("build", help="emit triples for the workspace")
    g.add_argument("--dir", default=".")
    g.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    g.add_argument("--out", help="write N-Triples to this file")
    g.add_argument("--instantiate", action="append", default=[],
                   help="extra root classes whose instance trees join the graph")
    g.set_defaults(fn=cmd_graph_build)
    g = gsub.add_parser("query", help="run a SPARQL query over the workspace graph")
    g.add_argument("query_file", help="a .rq file, or - for stdin")
    g.add_argument("--dir", default=".")
    g.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    g.add_argument("--instantiate", action="append", default=[])
    g.set_defaults(fn=cmd_graph_query)
    g = gsub.add_parser("export", help="serialize the workspace graph")
    g.add_argument("--format", choices=["turtle", "ntriples"], default="ntriples")
    g.add_argument("--graphs", choices=["asserted", "entailed", "both"], default="both")
    g.add_argument("--dir", default=".")
    g.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    g.add_argument("--instantiate", action="append", default=[])
    g.set_defaults(fn=cmd_graph_export)

    view = sub.add_parser("view", help="analytical view documents")
    vsub = view.add_subparsers(dest="view_command")
    v = vsub.add_parser("composition")
    v.add_argument("root", help="root class (optionally class:instance.path)")
    v.add_argument("--depth", type=int, default=1)
    v.add_argument("--dir", default=".")
    v.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    v.set_defaults(fn=cmd_view_composition)
    v = vsub.add_parser("specialization")
    v.add_argument("cls", metavar="class")
    v.add_argument("--dir", default=".")
    v.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    v.set_defaults(fn=cmd_view_specialization)
    v = vsub.add_parser("table")
    v.add_argument("query_file", help="a .rq file, or - for stdin")
    v.add_argument("--dir", default=".")
    v.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    v.set_defaults(fn=cmd_view_table)
    v = vsub.add_parser("kb")
    v.add_argument("page", help="markdown file, workspace-relative")
    v.add_argument("--dir", default=".")
    v.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    v.add_argument("--text", action="store_true", help="print the rendered text only")
    v.set_defaults(fn=cmd_view_kb)

    twin = sub.add_parser("twin", help="twin lifecycle against a running service")
    tsub = twin.add_subparsers(dest="twin_command")
    t = tsub.add_parser("deploy")
    t.add_argument("--id", required=True)
    t.add_argument("--class", dest="root_class", required=True)
    t.add_argument("--step-size", type=float, default=0.01)
    t.add_argument("--rt-factor", type=float, default=1.0)
    t.add_argument("--publish-every", type=int, default=1)
    _api_flag(t)
    t.set_defaults(fn=cmd_twin_deploy)
    for name in ("start", "stop", "undeploy"):
        t = tsub.add_parser(name)
        t.add_argument("id")
        _api_flag(t)
        t.set_defaults(fn=cmd_twin_lifecycle, action=name)
    t = tsub.add_parser("list")
    _api_flag(t)
    t.set_defaults(fn=cmd_twin_list)

    p = sub.add_parser("serve", help="run the HTTP service (and embedded broker)")
    p.add_argument("--dir", default=".")
    p.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    p.add_argument("--http", type=int, default=int(os.environ.get("MH_HTTP_PORT", "8080")))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--embedded-broker", action="store_true", default=True)
    p.add_argument("--no-embedded-broker", dest="embedded_broker", action="store_false")
    p.add_argument("--mqtt-port", type=int, default=int(os.environ.get("MH_MQTT_PORT", "1883")))
    p.add_argument("--ws-port", type=int, default=int(os.environ.get("MH_WS_PORT", "9001")))
    p.add_argument("--static", help="dashboard build directory served at /")
    p.add_argument("--cors", action="append", default=[], help="allowed CORS origin (repeatable)")
    p.set_defaults(fn=cmd_serve)

    pkg = sub.add_parser("pkg", help="package registry operations")
    psub = pkg.add_subparsers(dest="pkg_command")
    k = psub.add_parser("publish")
    k.add_argument("--registry", default=os.environ.get("MH_REGISTRY"), required=False)
    k.add_argument("--dir", default=".")
    k.set_defaults(fn=cmd_pkg_publish)
    k = psub.add_parser("install")
    k.add_argument("--registry", default=os.environ.get("MH_REGISTRY"))
    k.add_argument("--dir", default=".")
    k.set_defaults(fn=cmd_pkg_install)

    return parser


def _api_flag(p) -> None:
    default = f"http://127.0.0.1:{os.environ.get('MH_HTTP_PORT', '8080')}"
    p.add_argument("--api", default=os.environ.get("MH_API", default),
                   help="base URL of the running service")


def _emit(doc, text: bool = False) -> None:
    if text and isinstance(doc, str):
        print(doc)
    else:
        print(json.dumps(doc, indent=2, sort_keys=False))


def _read_query(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# commands


def cmd_parse(args) -> int:
    from .syntax import lower, parse

    with open(args.file, encoding="utf-8") as fh:
        text = fh.read()
    tree, diags = parse(text, args.file)
    if args.cst:
        _emit(tree.root.to_json())
    else:
        stored, lower_diags = lower(tree, args.file)
        diags = diags + lower_diags
        _emit(_ast_json(stored))
    for d in diags:
        print(f"{d.uri}:{d.start}-{d.end}: {d.severity.value} {d.code}: {d.message}",
              file=sys.stderr)
    return 1 if has_errors(diags) else 0


def _ast_json(node):
    import dataclasses
    from enum import Enum

    if dataclasses.is_dataclass(node):
        out = {"node": type(node).__name__}
        for f in dataclasses.fields(node):
            if f.name == "span":
                continue
            out[f.name] = _ast_json(getattr(node, f.name))
        return out
    if isinstance(node, Enum):
        return node.value
    if isinstance(node, (list, tuple)):
        return [_ast_json(x) for x in node]
    if isinstance(node, dict):
        return {k: _ast_json(v) for k, v in node.items()}
    return node


def cmd_check(args) -> int:
    from .workspace import WorkspaceError, scan

    try:
        workspace = scan(args.dir, args.registry)
    except WorkspaceError as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    classes = sum(1 for e in workspace.class_tree.entries.values() if e.uri != "<builtin>")
    doc = {"classes": classes, "diagnostics": [d.to_json() for d in workspace.diagnostics]}
    if args.text:
        print(f"{classes} classes")
        for d in workspace.diagnostics:
            print(f"{d.uri}:{d.start}-{d.end}: {d.severity.value} {d.code}: {d.message}")
    else:
        _emit(doc)
    return 1 if has_errors(workspace.diagnostics) else 0


def cmd_flatten(args) -> int:
    from .hub import CompileError, Hub, HubConfig
    from .frontend import InstantiationError
    from .twin import CausalizeError

    hub = Hub(HubConfig(workspace_root=args.dir, registry_dir=args.registry))
    try:
        flat = hub.flatten_class(args.cls)
    except (CompileError, InstantiationError) as exc:
        diags = getattr(exc, "diagnostics", None) or [getattr(exc, "diag", None)]
        print(json.dumps({"error": str(exc),
                          "diagnostics": [d.to_json() for d in diags if d is not None]}))
        return 1
    _emit(flat.to_json())
    return 0


def cmd_adapt(args) -> int:
    from .adapters import AdapterError, default_registry

    registry = default_registry()
    adapter = registry.for_file(args.file)
    if adapter is None:
        print(json.dumps({"error": f"no adapter for {args.file!r} "
                                   f"(known: {registry.extensions()})"}))
        return 1
    with open(args.file, "rb") as fh:
        data = fh.read()
    try:
        fragment = adapter(data, args.file, args.root)
    except AdapterError as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    sys.stdout.write(fragment.modelica_text)
    return 0


def _hub_for(args):
    from .hub import Hub, HubConfig

    hub = Hub(HubConfig(workspace_root=args.dir, registry_dir=args.registry,
                        instantiate_roots=tuple(getattr(args, "instantiate", []) or [])))
    hub.ensure_scanned()
    return hub


def cmd_graph_build(args) -> int:
    from .kgraph import export_graph

    hub = _hub_for(args)
    data = export_graph(hub.store, "ntriples", "both")
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    doc = {"triples": len(hub.store),
           "asserted": len(hub.store.graph("asserted")),
           "entailed": len(hub.store.graph("entailed"))}
    if args.out:
        doc["out"] = args.out
    _emit(doc)
    return 0


def cmd_graph_query(args) -> int:
    from .kgraph import SparqlError, query

    hub = _hub_for(args)
    try:
        result = query(hub.store, _read_query(args.query_file))
    except SparqlError as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    _emit(result.to_sparql_json())
    return 0


def cmd_graph_export(args) -> int:
    from .kgraph import export_graph

    hub = _hub_for(args)
    sys.stdout.write(export_graph(hub.store, args.format, args.graphs).decode("utf-8"))
    return 0


def cmd_view_composition(args) -> int:
    from .hub import CompileError
    from .views import ViewError, composition_view

    hub = _hub_for(args)
    root, _, path = args.root.partition(":")
    try:
        itree = hub.instance_of(root)
        doc = composition_view(itree, path, args.depth)
    except (CompileError, ViewError, Exception) as exc:  # noqa: BLE001
        print(json.dumps({"error": str(exc)}))
        return 1
    _emit(doc.to_json())
    return 0


def cmd_view_specialization(args) -> int:
    from .views import ViewError, specialization_view

    hub = _hub_for(args)
    try:
        doc = specialization_view(hub.workspace.class_tree, args.cls)
    except ViewError as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    _emit(doc.to_json())
    return 0


def cmd_view_table(args) -> int:
    from .kgraph import SparqlError
    from .views import ViewError, table_view

    hub = _hub_for(args)
    try:
        doc = table_view(hub.store, _read_query(args.query_file))
    except (SparqlError, ViewError) as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    _emit(doc.to_json())
    return 0


def cmd_view_kb(args) -> int:
    from .views import render_kb_page

    hub = _hub_for(args)
    workspace = hub.workspace
    source_root = workspace.root
    if workspace.manifest is not None:
        candidate = os.path.join(workspace.root, workspace.manifest.source_dir)
        if os.path.isdir(candidate):
            source_root = candidate
    page_path = os.path.join(source_root, args.page)
    if not os.path.isfile(page_path):
        print(json.dumps({"error": f"no page {args.page!r}"}))
        return 1
    with open(page_path, encoding="utf-8") as fh:
        text = fh.read()
    page = render_kb_page(text, hub.kb_env(), source_uri=args.page)
    if args.text:
        sys.stdout.write(page.text)
    else:
        _emit(page.to_json())
    return 0


# -- twin subcommands (HTTP clients of the running service) ---------------------


def _http(method: str, url: str, body: Optional[dict] = None):
    import urllib.error
    import urllib.request

    data = json.dumps(body).encode() if body is not None else None
    req = urllib.request.Request(url, data=data, method=method,
                                 headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            raw = resp.read()
            return resp.status, json.loads(raw) if raw else None
    except urllib.error.HTTPError as exc:
        raw = exc.read()
        try:
            return exc.code, json.loads(raw) if raw else None
        except json.JSONDecodeError:
            return exc.code, {"message": raw.decode(errors="replace")}
    except urllib.error.URLError as exc:
        print(json.dumps({"error": f"cannot reach service at {url}: {exc.reason}"}))
        raise SystemExit(1)


def cmd_twin_deploy(args) -> int:
    status, body = _http("POST", f"{args.api}/api/twins", {
        "id": args.id,
        "rootClass": args.root_class,
        "stepSize": args.step_size,
        "rtFactor": args.rt_factor,
        "publishEvery": args.publish_every,
    })
    _emit(body)
    return 0 if status == 201 else 1


def cmd_twin_lifecycle(args) -> int:
    if args.action == "undeploy":
        status, body = _http("DELETE", f"{args.api}/api/twins/{args.id}")
        if status == 204:
            _emit({"id": args.id, "undeployed": True})
            return 0
        _emit(body)
        return 1
    status, body = _http("POST", f"{args.api}/api/twins/{args.id}/{args.action}")
    _emit(body)
    return 0 if status == 200 else 1


def cmd_twin_list(args) -> int:
    status, body = _http("GET", f"{args.api}/api/twins")
    _emit(body)
    return 0 if status == 200 else 1


def cmd_serve(args) -> int:
    import logging

    from .service import ServerConfig, Service

    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    config = ServerConfig(
        http_port=args.http,
        host=args.host,
        workspace_root=args.dir,
        registry_dir=args.registry,
        embedded_broker=args.embedded_broker,
        mqtt_port=args.mqtt_port,
        ws_port=args.ws_port,
        static_dir=args.static,
        cors_allow=tuple(args.cors),
    )
    service = Service(config)
    try:
        service.hub.rescan()
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


def cmd_pkg_publish(args) -> int:
    from .workspace import WorkspaceError, publish

    if not args.registry:
        print(json.dumps({"error": "--registry (or MH_REGISTRY) is required"}))
        return 2
    try:
        name, version = publish(args.dir, args.registry)
    except WorkspaceError as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    _emit({"published": f"{name}@{version}", "registry": args.registry})
    return 0


def cmd_pkg_install(args) -> int:
    from .workspace import WorkspaceError, _load_manifest, resolve_dependencies

    manifest = _load_manifest(args.dir)
    if manifest is None:
        print(json.dumps({"error": "no package.json in the workspace"}))
        return 1
    if not manifest.dependencies:
        _emit({"resolved": []})
        return 0
    if not args.registry:
        print(json.dumps({"error": "--registry (or MH_REGISTRY) is required"}))
        return 2
    try:
        resolved = resolve_dependencies(manifest, args.registry)
    except WorkspaceError as exc:
        print(json.dumps({"error": str(exc)}))
        return 1
    _emit({"resolved": [f"{n}@{v}" for n, v, _ in resolved]})
    return 0


if __name__ == "__main__":
    sys.exit(main())
