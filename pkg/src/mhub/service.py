"""HTTP management and query API plus static hosting of the dashboard."""
from __future__ import annotations

import json
import logging
import mimetypes
import os
import re
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Callable, Optional
from urllib.parse import parse_qs, unquote, urlparse

from . import __version__
from .frontend import InstantiationError
from .hub import CompileError, Hub, HubConfig
from .kgraph import SparqlError, query as sparql_query
from .twin import CausalizeError, IllegalTransition, TwinError, TwinSpec
from .views import ViewError, composition_view, render_kb_page, specialization_view, table_view

log = logging.getLogger("mhub.service")

SPARQL_RESULTS_TYPE = "application/sparql-results+json"


@dataclass
class ServerConfig:
    http_port: int = 8080
    host: str = "127.0.0.1"
    workspace_root: str = "."
    registry_dir: Optional[str] = None
    embedded_broker: bool = True
    mqtt_port: int = 1883
    ws_port: int = 9001
    broker_host: str = "127.0.0.1"
    static_dir: Optional[str] = None
    cors_allow: tuple[str, ...] = ()


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, body_extra: Optional[dict] = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.body_extra = body_extra or {}


class Service:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.broker = None
        if config.embedded_broker:
            from .mqtt import Broker, BrokerConfig

            self.broker = Broker(BrokerConfig(host=config.broker_host,
                                              tcp_port=config.mqtt_port,
                                              ws_port=config.ws_port)).start()
            mqtt_port = self.broker.tcp_port
        else:
            mqtt_port = config.mqtt_port
        self.hub = Hub(HubConfig(workspace_root=config.workspace_root,
                                 registry_dir=config.registry_dir,
                                 broker_host=config.broker_host,
                                 broker_port=mqtt_port))
        self.httpd: Optional[ThreadingHTTPServer] = None
        self.http_port: Optional[int] = None

    def start(self) -> "Service":
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((self.config.host, self.config.http_port), handler)
        self.http_port = self.httpd.server_address[1]
        thread = threading.Thread(target=self.httpd.serve_forever, name="http", daemon=True)
        thread.start()
        log.info("HTTP API on %s:%s", self.config.host, self.http_port)
        return self

    def serve_forever(self) -> None:
        handler = _make_handler(self)
        self.httpd = ThreadingHTTPServer((self.config.host, self.config.http_port), handler)
        self.http_port = self.httpd.server_address[1]
        log.info("HTTP API on %s:%s", self.config.host, self.http_port)
        self.httpd.serve_forever()

    def stop(self) -> None:
        if self.httpd is not None:
            self.httpd.shutdown()
        self.hub.shutdown()
        if self.broker is not None:
            self.broker.stop()

    # -- route table ------------------------------------------------------------

    def routes(self) -> list[tuple[str, re.Pattern, Callable]]:
        return [
            ("GET", re.compile(r"^/api/health$"), self.health),
            ("POST", re.compile(r"^/api/scan$"), self.scan),
            ("POST", re.compile(r"^/api/query$"), self.query),
            ("GET", re.compile(r"^/api/views/composition$"), self.view_composition),
            ("GET", re.compile(r"^/api/views/specialization$"), self.view_specialization),
            ("POST", re.compile(r"^/api/views/table$"), self.view_table),
            ("GET", re.compile(r"^/api/kb/(?P<path>.+)$"), self.kb_page),
            ("GET", re.compile(r"^/api/twins$"), self.twins_list),
            ("POST", re.compile(r"^/api/twins$"), self.twins_deploy),
            ("POST", re.compile(r"^/api/twins/(?P<id>[a-z0-9-]+)/start$"), self.twin_start),
            ("POST", re.compile(r"^/api/twins/(?P<id>[a-z0-9-]+)/stop$"), self.twin_stop),
            ("DELETE", re.compile(r"^/api/twins/(?P<id>[a-z0-9-]+)$"), self.twin_undeploy),
        ]

    # -- handlers -----------------------------------------------------------------

    def health(self, request) -> tuple[int, dict]:
        return 200, {"status": "ok", "version": __version__}

    def scan(self, request) -> tuple[int, dict]:
        try:
            return 200, self.hub.rescan()
        except Exception as exc:  # scan failures are client-visible configuration errors
            raise ApiError(400, "scan-failed", str(exc)) from exc

    def query(self, request) -> tuple[int, dict]:
        body = request.json_body()
        sparql = body.get("sparql")
        if not isinstance(sparql, str) or not sparql.strip():
            raise ApiError(400, "bad-request", "body must carry a 'sparql' string")
        self.hub.ensure_scanned()
        try:
            result = sparql_query(self.hub.store, sparql)
        except SparqlError as exc:
            raise ApiError(400, "sparql-error", str(exc)) from exc
        request.content_type = SPARQL_RESULTS_TYPE
        return 200, result.to_sparql_json()

    def view_composition(self, request) -> tuple[int, dict]:
        params = request.params
        root = _single(params, "root")
        if not root:
            raise ApiError(400, "bad-request", "query parameter 'root' is required")
        depth = int(_single(params, "depth") or "1")
        path = _single(params, "path") or ""
        itree = self._instance(root)
        try:
            doc = composition_view(itree, path, depth)
        except ViewError as exc:
            raise ApiError(404, "unknown-path", str(exc)) from exc
        return 200, doc.to_json()

    def view_specialization(self, request) -> tuple[int, dict]:
        cls = _single(request.params, "class")
        if not cls:
            raise ApiError(400, "bad-request", "query parameter 'class' is required")
        workspace = self.hub.ensure_scanned()
        try:
            doc = specialization_view(workspace.class_tree, cls)
        except ViewError as exc:
            raise ApiError(404, "unknown-class", str(exc)) from exc
        return 200, doc.to_json()

    def view_table(self, request) -> tuple[int, dict]:
        body = request.json_body()
        sparql = body.get("sparql")
        if not isinstance(sparql, str) or not sparql.strip():
            raise ApiError(400, "bad-request", "body must carry a 'sparql' string")
        self.hub.ensure_scanned()
        try:
            doc = table_view(self.hub.store, sparql,
                             body.get("columns") if isinstance(body.get("columns"), dict) else None)
        except (SparqlError, ViewError) as exc:
            raise ApiError(400, "sparql-error", str(exc)) from exc
        return 200, doc.to_json()

    def kb_page(self, request, path: str) -> tuple[int, dict]:
        workspace = self.hub.ensure_scanned()
        rel = unquote(path)
        if rel not in workspace.markdown_files:
            raise ApiError(404, "unknown-page", f"no markdown page {rel!r} in the workspace")
        source_root = workspace.root
        if workspace.manifest is not None:
            candidate = os.path.join(workspace.root, workspace.manifest.source_dir)
            if os.path.isdir(candidate):
                source_root = candidate
        with open(os.path.join(source_root, rel), encoding="utf-8") as fh:
            text = fh.read()
        page = render_kb_page(text, self.hub.kb_env(), source_uri=rel)
        return 200, page.to_json()

    def twins_list(self, request) -> tuple[int, list]:
        return 200, self.hub.twins.list()

    def twins_deploy(self, request) -> tuple[int, dict]:
        body = request.json_body()
        try:
            spec = TwinSpec(
                id=str(body.get("id", "")),
                root_class=str(body.get("rootClass", "")),
                step_size=float(body.get("stepSize", 0.01)),
                rt_factor=float(body.get("rtFactor", 1.0)),
                publish_every=int(body.get("publishEvery", 1)),
            )
        except (TypeError, ValueError) as exc:
            raise ApiError(400, "bad-request", f"invalid twin spec: {exc}") from exc
        if not spec.root_class:
            raise ApiError(400, "bad-request", "rootClass is required")
        self.hub.ensure_scanned()
        try:
            self.hub.twins.deploy(spec)
        except (CompileError,) as exc:
            raise ApiError(422, "compile-error", str(exc),
                           {"diagnostics": [d.to_json() for d in exc.diagnostics]}) from exc
        except InstantiationError as exc:
            from .diagnostics import SEM_UNRESOLVED_NAME

            status = 404 if exc.diag.code == SEM_UNRESOLVED_NAME else 422
            raise ApiError(status, "unknown-class" if status == 404 else "compile-error",
                           str(exc), {"diagnostics": [exc.diag.to_json()]}) from exc
        except CausalizeError as exc:
            raise ApiError(422, "causalize-error", str(exc),
                           {"cycle": exc.cycle}) from exc
        except TwinError as exc:
            if "already deployed" in str(exc):
                raise ApiError(409, "duplicate-id", str(exc)) from exc
            raise ApiError(400, "bad-request", str(exc)) from exc
        return 201, {"id": spec.id}

    def twin_start(self, request, id: str) -> tuple[int, dict]:
        try:
            info = self.hub.twins.start(id)
        except IllegalTransition as exc:
            raise ApiError(409, "illegal-transition", str(exc)) from exc
        except TwinError as exc:
            raise ApiError(404, "unknown-twin", str(exc)) from exc
        return 200, {"state": info["state"]}

    def twin_stop(self, request, id: str) -> tuple[int, dict]:
        try:
            info = self.hub.twins.stop(id)
        except IllegalTransition as exc:
            raise ApiError(409, "illegal-transition", str(exc)) from exc
        except TwinError as exc:
            raise ApiError(404, "unknown-twin", str(exc)) from exc
        return 200, {"state": info["state"]}

    def twin_undeploy(self, request, id: str) -> tuple[int, None]:
        try:
            self.hub.twins.undeploy(id)
        except IllegalTransition as exc:
            raise ApiError(409, "illegal-transition", str(exc)) from exc
        except TwinError as exc:
            raise ApiError(404, "unknown-twin", str(exc)) from exc
        return 204, None

    def _instance(self, root_class: str):
        try:
            return self.hub.instance_of(root_class)
        except CompileError as exc:
            raise ApiError(422, "compile-error", str(exc),
                           {"diagnostics": [d.to_json() for d in exc.diagnostics]}) from exc
        except InstantiationError as exc:
            raise ApiError(404, "unknown-class", str(exc)) from exc


def _single(params: dict, key: str) -> Optional[str]:
    values = params.get(key)
    return values[0] if values else None


def _make_handler(service: Service):
    routes = service.routes()

    class Handler(BaseHTTPRequestHandler):
        server_version = "mhub"
        protocol_version = "HTTP/1.1"

        # request helpers -----------------------------------------------------
        content_type = "application/json"

        def log_message(self, fmt, *args):  # quiet by default
            log.debug("%s " + fmt, self.client_address[0], *args)

        @property
        def params(self) -> dict:
            return parse_qs(urlparse(self.path).query)

        def json_body(self) -> dict:
            length = int(self.headers.get("Content-Length") or 0)
            if length == 0:
                return {}
            raw = self.rfile.read(length)
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ApiError(400, "bad-json", f"request body is not valid JSON: {exc}")
            return doc if isinstance(doc, dict) else {}

        # dispatch ------------------------------------------------------------

        def _dispatch(self, method: str) -> None:
            self.content_type = "application/json"
            path = urlparse(self.path).path
            try:
                for route_method, pattern, fn in routes:
                    if route_method != method:
                        continue
                    m = pattern.match(path)
                    if m is None:
                        continue
                    status, body = fn(self, **m.groupdict())
                    self._send_json(status, body)
                    return
                if method == "GET" and not path.startswith("/api/"):
                    self._serve_static(path)
                    return
                self._send_json(404, {"code": "not-found", "message": f"no route {path}"})
            except ApiError as exc:
                body = {"code": exc.code, "message": exc.message}
                body.update(exc.body_extra)
                self._send_json(exc.status, body)
            except BrokenPipeError:
                pass
            except Exception as exc:  # noqa: BLE001 - last-resort 500
                log.exception("handler failed")
                self._send_json(500, {"code": "internal", "message": str(exc)})

        def do_GET(self):
            self._dispatch("GET")

        def do_POST(self):
            self._dispatch("POST")

        def do_DELETE(self):
            self._dispatch("DELETE")

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors_headers()
            self.send_header("Allow", "GET, POST, DELETE, OPTIONS")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def _cors_headers(self) -> None:
            origin = self.headers.get("Origin")
            if origin and origin in service.config.cors_allow:
                self.send_header("Access-Control-Allow-Origin", origin)

        def _send_json(self, status: int, body) -> None:
            payload = b"" if body is None else json.dumps(body).encode("utf-8")
            self.send_response(status)
            self._cors_headers()
            if payload:
                self.send_header("Content-Type", self.content_type)
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            if payload:
                self.wfile.write(payload)

        def _serve_static(self, path: str) -> None:
            static_dir = service.config.static_dir
            if static_dir is None:
                self._send_json(404, {"code": "not-found",
                                      "message": "no dashboard build configured"})
                return
            rel = unquote(path.lstrip("/")) or "index.html"
            full = os.path.realpath(os.path.join(static_dir, rel))
            base = os.path.realpath(static_dir)
            if not full.startswith(base + os.sep) and full != base:
                self._send_json(404, {"code": "not-found", "message": "outside static root"})
                return
            if os.path.isdir(full):
                full = os.path.join(full, "index.html")
            if not os.path.isfile(full):
                self._send_json(404, {"code": "not-found", "message": f"no file {rel}"})
                return
            ctype = mimetypes.guess_type(full)[0] or "application/octet-stream"
            with open(full, "rb") as fh:
                data = fh.read()
            self.send_response(200)
            self._cors_headers()
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

    return Handler
