"""The hub: one object owning workspace, knowledge graph, views, and twins."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

from .diagnostics import Diagnostic, has_errors
from .frontend import FlatModel, InstanceTree, InstantiationError, Instantiator, flatten
from .kgraph import GraphStore, emit_class_triples, emit_instance_triples, rematerialize
from .twin import TwinManager
from .views import KbEnv
from .workspace import Workspace, scan


class CompileError(Exception):
    def __init__(self, message: str, diagnostics: list[Diagnostic]):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass
class HubConfig:
    workspace_root: str
    registry_dir: Optional[str] = None
    broker_host: str = "127.0.0.1"
    broker_port: int = 1883
    instantiate_roots: tuple[str, ...] = ()  # extra instance trees for the graph


class Hub:
    def __init__(self, config: HubConfig):
        self.config = config
        self._lock = threading.RLock()
        self.workspace: Optional[Workspace] = None
        self.store = GraphStore()
        self._instantiator: Optional[Instantiator] = None
        self._instance_cache: dict[str, InstanceTree] = {}
        self.twins = TwinManager(self.flatten_class,
                                 broker_host=config.broker_host,
                                 broker_port=config.broker_port)
        self.graph_diagnostics: list[Diagnostic] = []

    # -- scanning -----------------------------------------------------------------

    def rescan(self) -> dict:
        with self._lock:
            workspace = scan(self.config.workspace_root, self.config.registry_dir)
            self.workspace = workspace
            self._instantiator = Instantiator(workspace.class_tree)
            self._instance_cache = {}
            self.graph_diagnostics = []
            self._rebuild_store()
            classes = sum(1 for e in workspace.class_tree.entries.values()
                          if e.uri != "<builtin>")
            return {
                "classes": classes,
                "diagnostics": [d.to_json() for d in workspace.diagnostics],
            }

    def _rebuild_store(self) -> None:
        assert self.workspace is not None
        self.store.clear()
        self.store.add_all(emit_class_triples(self.workspace.class_tree))
        roots = [f.package_qname for f in self.workspace.fragments]
        roots.extend(self.config.instantiate_roots)
        for root in roots:
            try:
                itree = self.instance_of(root)
            except (CompileError, InstantiationError):
                continue
            self.store.add_all(emit_instance_triples(itree))
        rematerialize(self.store)

    def ensure_scanned(self) -> Workspace:
        with self._lock:
            if self.workspace is None:
                self.rescan()
            assert self.workspace is not None
            return self.workspace

    # -- compilation ------------------------------------------------------------------

    def instance_of(self, root_class: str) -> InstanceTree:
        workspace = self.ensure_scanned()
        with self._lock:
            if root_class in self._instance_cache:
                return self._instance_cache[root_class]
            assert self._instantiator is not None
            itree = self._instantiator.instantiate(root_class)
            diags = list(self._instantiator.diags)
            self._instantiator.diags = []
            if has_errors(diags):
                raise CompileError(f"cannot instantiate '{root_class}'", diags)
            self._instance_cache[root_class] = itree
            return itree

    def flatten_class(self, root_class: str) -> FlatModel:
        itree = self.instance_of(root_class)
        flat, diags = flatten(itree)
        if has_errors(diags):
            raise CompileError(f"cannot flatten '{root_class}'", diags)
        return flat

    def kb_env(self) -> KbEnv:
        workspace = self.ensure_scanned()
        with self._lock:
            assert self._instantiator is not None
            return KbEnv(class_tree=workspace.class_tree, instantiator=self._instantiator,
                         store=self.store)

    def shutdown(self) -> None:
        self.twins.shutdown()
