"""Class instantiation: extends expansion, modification merging, redeclare,
array expansion, and constant/parameter evaluation."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from ..diagnostics import (
    SEM_EVAL_ERROR,
    SEM_EXTENDS_CYCLE,
    SEM_FINAL_MODIFIED,
    SEM_NONCONSTANT_DIMENSION,
    SEM_REDECLARE_NOT_REPLACEABLE,
    SEM_UNKNOWN_MODIFIED_ELEMENT,
    SEM_UNRESOLVED_NAME,
    Diagnostic,
    Severity,
)
from ..syntax import tree as ast
from .classtree import BUILTIN_ATTRIBUTES, BUILTIN_TYPES, ClassEntry, ClassTree
from .evaluate import EvalError, Evaluator, Scope
from .resolve import ResolveError, resolve
from .values import Value, dimensions_of

_VAR_RANK = {
    ast.Variability.CONTINUOUS: 0,
    ast.Variability.DISCRETE: 1,
    ast.Variability.PARAMETER: 2,
    ast.Variability.CONSTANT: 3,
}
_RANK_VAR = {v: k for k, v in _VAR_RANK.items()}


@dataclass
class InstanceNode:
    name: str  # last path segment, e.g. "x" or "root[1]"
    path: str  # dotted path from the instance root, '' for the root node
    class_ref: str  # resolved class qname; builtins are their own name
    restriction: Optional[ast.Restriction]
    variability: ast.Variability
    causality: ast.Causality
    flow_prefix: Optional[str] = None
    dimensions: tuple[int, ...] = ()
    is_array: bool = False  # array container node; children are its elements
    builtin: Optional[str] = None  # Real/Integer/Boolean/String or an enum qname
    children: list["InstanceNode"] = field(default_factory=list)
    parent: Optional["InstanceNode"] = dataclasses.field(default=None, repr=False)
    binding: Optional[ast.Expr] = None
    evaluated: Optional[Value] = None
    attributes: dict[str, Value] = field(default_factory=dict)
    modification: ast.Modification = ast.Modification()
    equations: tuple[ast.Equation, ...] = ()
    initial_equations: tuple[ast.Equation, ...] = ()
    annotation: Optional[ast.Modification] = None

    def child(self, name: str) -> Optional["InstanceNode"]:
        for c in self.children:
            if c.name == name:
                return c
        return None

    def is_leaf(self) -> bool:
        return self.builtin is not None and not self.is_array

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class InstanceTree:
    root: InstanceNode
    class_tree: ClassTree
    root_class: str
    evaluator: Optional[object] = None

    def find(self, path: str) -> Optional[InstanceNode]:
        if path == "":
            return self.root
        node = self.root
        for segment in path.split("."):
            base, indices = _split_indices(segment)
            nxt = node.child(base) if not indices else None
            if nxt is None:
                nxt = node.child(segment)
            if nxt is None and indices:
                arr = node.child(base)
                nxt = arr.child(segment) if arr is not None else None
            if nxt is None:
                return None
            node = nxt
        return node


def _split_indices(segment: str):
    if "[" not in segment:
        return segment, None
    base, rest = segment.split("[", 1)
    return base, rest.rstrip("]")


class InstantiationError(Exception):
    def __init__(self, diag: Diagnostic):
        super().__init__(diag.message)
        self.diag = diag


class Instantiator:
    def __init__(self, class_tree: ClassTree):
        self.tree = class_tree
        self.diags: list[Diagnostic] = []
        self.evaluator = Evaluator(class_tree, instantiate_package=self._package_instance)
        self._package_cache: dict[str, InstanceNode] = {}

    # -- public ----------------------------------------------------------------

    def instantiate(self, class_name: str, modification: ast.Modification = ast.Modification(),
                    scope: str = "") -> InstanceTree:
        try:
            qname = resolve(self.tree, class_name, scope)
        except ResolveError as exc:
            raise InstantiationError(Diagnostic("<instantiate>", 0, 0, Severity.ERROR,
                                                exc.code, exc.message)) from exc
        entry = self.tree.get(qname)
        assert entry is not None
        if entry.ast is not None and entry.ast.partial:
            raise InstantiationError(Diagnostic(entry.uri, *entry.ast.span, Severity.ERROR,
                                                SEM_UNRESOLVED_NAME,
                                                f"cannot instantiate partial class '{qname}'"))
        if entry.restriction is ast.Restriction.FUNCTION:
            raise InstantiationError(Diagnostic(entry.uri, 0, 0, Severity.ERROR,
                                                SEM_UNRESOLVED_NAME,
                                                f"cannot instantiate function '{qname}'"))
        root = InstanceNode(name=qname.rsplit(".", 1)[-1], path="", class_ref=qname,
                            restriction=entry.restriction,
                            variability=ast.Variability.CONTINUOUS,
                            causality=ast.Causality.NONE,
                            modification=modification)
        self._expand(root, entry, modification, stack=())
        itree = InstanceTree(root=root, class_tree=self.tree, root_class=qname,
                             evaluator=self.evaluator)
        self._evaluate_tree(root)
        return itree

    # -- package constants on demand (for evaluator lookups) --------------------

    def _package_instance(self, qname: str) -> Optional[InstanceNode]:
        if qname in self._package_cache:
            return self._package_cache[qname]
        entry = self.tree.get(qname)
        if entry is None:
            return None
        node = InstanceNode(name=qname.rsplit(".", 1)[-1], path="", class_ref=qname,
                            restriction=entry.restriction,
                            variability=ast.Variability.CONTINUOUS,
                            causality=ast.Causality.NONE)
        self._package_cache[qname] = node
        if entry.ast is not None:
            self._expand(node, entry, ast.Modification(), stack=())
            self._evaluate_tree(node)
        return node

    # -- expansion ---------------------------------------------------------------

    def _expand(self, node: InstanceNode, entry: ClassEntry, outer_mod: ast.Modification,
                stack: tuple[str, ...]) -> None:
        if entry.qname in stack:
            cycle = " -> ".join(stack + (entry.qname,))
            self._error(entry.uri, entry.ast.span if entry.ast else (0, 0),
                        SEM_EXTENDS_CYCLE, f"extends cycle: {cycle}")
            return
        if entry.ast is None:
            return  # synthetic package: nothing to expand

        members = self._gather(entry, stack + (entry.qname,))
        mod = _merge(outer_mod, members.class_mod, self._final_violation(node, entry))

        # apply redeclarations before member expansion
        for redecl in mod.redeclarations:
            self._apply_redeclare(members, redecl, entry)

        # detect modifications of nonexistent elements
        known = {c.name for c in members.components} | set(members.classes)
        for key, sub in mod.submods:
            if key not in known and not sub.is_empty():
                self._error(entry.uri, sub.span if sub.span != (0, 0) else (entry.ast.span),
                            SEM_UNKNOWN_MODIFIED_ELEMENT,
                            f"'{entry.qname}' has no element '{key}' to modify")

        node.equations = tuple(members.equations)
        node.initial_equations = tuple(members.initial_equations)
        node.annotation = entry.ast.annotation

        if members.builtin_base is not None:
            # class derived from a predefined type (e.g. a signal connector)
            node.builtin = members.builtin_base
            if node.binding is None and mod.binding is not None:
                node.binding = mod.binding
            self._apply_builtin_attributes(node, members.builtin_base, mod,
                                           node.parent or node, entry)
            return

        for comp in members.components:
            comp_mod = mod.submod(comp.name) or ast.Modification()
            child = self._instantiate_component(node, entry, comp, comp_mod, stack,
                                                members.redeclared_classes)
            if child is not None:
                node.children.append(child)

    def _gather(self, entry: ClassEntry, stack: tuple[str, ...],
                gathered: Optional[set] = None) -> "_Members":
        """Collect own + inherited members; extends modifications fold in as
        inner-level modifications on the inherited elements."""
        if gathered is None:
            gathered = set()
        members = _Members()
        cls = entry.ast
        assert cls is not None

        # short class (alias): gather target, folding the alias modification
        if cls.is_short_class():
            try:
                target_qname = resolve(self.tree, cls.alias_target, entry.parent)
            except ResolveError as exc:
                self._error(entry.uri, cls.span, exc.code, exc.message)
                return members
            if target_qname in BUILTIN_TYPES:
                members.builtin_base = target_qname
                members.class_mod = cls.alias_modification
                members.alias_dims = cls.alias_subscripts
                return members
            target = self.tree.get(target_qname)
            if target_qname in stack:
                self._error(entry.uri, cls.span, SEM_EXTENDS_CYCLE,
                            f"alias cycle through '{target_qname}'")
                return members
            if target is None or target.ast is None:
                return members
            members = self._gather(target, stack + (target_qname,))
            members.class_mod = _merge(cls.alias_modification, members.class_mod,
                                       self._final_violation(None, entry))
            members.alias_dims = cls.alias_subscripts + members.alias_dims
            return members

        for ext in cls.extends_clauses:
            try:
                base_qname = resolve(self.tree, ext.base_name, entry.qname)
            except ResolveError as exc:
                self._error(entry.uri, ext.span, exc.code, exc.message)
                continue
            if base_qname in BUILTIN_TYPES:
                members.builtin_base = base_qname
                members.class_mod = _merge(members.class_mod, ext.modification,
                                           self._final_violation(None, entry))
                continue
            if base_qname in stack:
                cycle = " -> ".join(stack + (base_qname,))
                self._error(entry.uri, ext.span, SEM_EXTENDS_CYCLE, f"extends cycle: {cycle}")
                continue
            if base_qname in gathered:
                continue  # diamond inheritance: identical duplicates collapse
            gathered.add(base_qname)
            base = self.tree.get(base_qname)
            if base is None or base.ast is None:
                continue
            inherited = self._gather(base, stack + (base_qname,), gathered)
            # fold the extends modification onto inherited members
            ext_mod = ext.modification
            for redecl in ext_mod.redeclarations:
                self._apply_redeclare(inherited, redecl, entry)
            for key, sub in ext_mod.submods:
                if not inherited.modify(key, sub, self._final_violation(None, entry)):
                    self._error(entry.uri, ext.span, SEM_UNKNOWN_MODIFIED_ELEMENT,
                                f"'{base_qname}' has no element '{key}' to modify")
            members.absorb(inherited)

        for nested in cls.nested_classes:
            members.classes[nested.name] = nested
        for comp in cls.components:
            members.components.append(comp)
        members.equations.extend(cls.equations)
        members.initial_equations.extend(cls.initial_equations)
        return members

    def _apply_redeclare(self, members: "_Members", redecl: ast.Redeclaration,
                         entry: ClassEntry) -> None:
        if redecl.component is not None:
            for i, comp in enumerate(members.components):
                if comp.name == redecl.name:
                    if not comp.replaceable:
                        self._error(entry.uri, redecl.component.span,
                                    SEM_REDECLARE_NOT_REPLACEABLE,
                                    f"cannot redeclare non-replaceable component '{redecl.name}'")
                        return
                    new_comp = dataclasses.replace(
                        redecl.component,
                        modification=_merge(redecl.component.modification, comp.modification,
                                            self._final_violation(None, entry)),
                        replaceable=redecl.replaceable or comp.replaceable)
                    members.components[i] = new_comp
                    return
            self._error(entry.uri, redecl.component.span, SEM_UNKNOWN_MODIFIED_ELEMENT,
                        f"no component '{redecl.name}' to redeclare")
        elif redecl.short_class is not None:
            existing = members.classes.get(redecl.name)
            if existing is not None and not existing.replaceable:
                self._error(entry.uri, redecl.short_class.span, SEM_REDECLARE_NOT_REPLACEABLE,
                            f"cannot redeclare non-replaceable class '{redecl.name}'")
                return
            if existing is None:
                self._error(entry.uri, redecl.short_class.span, SEM_UNKNOWN_MODIFIED_ELEMENT,
                            f"no class '{redecl.name}' to redeclare")
                return
            members.redeclared_classes[redecl.name] = redecl.short_class

    def _instantiate_component(self, parent: InstanceNode, entry: ClassEntry,
                               comp: ast.Component, outer_mod: ast.Modification,
                               stack: tuple[str, ...],
                               redeclared_classes: Optional[dict] = None) -> Optional[InstanceNode]:
        # conditional components: a constant-false condition removes the component
        if comp.condition is not None:
            try:
                cond = self.evaluator.eval(comp.condition, Scope(node=parent, class_ctx=entry.qname))
                if cond is False:
                    return None
            except EvalError as exc:
                self._error(entry.uri, comp.span, SEM_EVAL_ERROR,
                            f"cannot evaluate condition of '{comp.name}': {exc}")
                return None

        mod = _merge(outer_mod, comp.modification, self._final_violation(parent, entry, comp))

        type_name = comp.type_name
        extra_dims: tuple = ()
        replacement = (redeclared_classes or {}).get(type_name)
        if replacement is not None and replacement.is_short_class():
            # a redeclared local class overrides the component's type
            type_name = replacement.alias_target
            extra_dims = replacement.alias_subscripts
            if not replacement.alias_modification.is_empty():
                mod = _merge(mod, replacement.alias_modification,
                             self._final_violation(parent, entry, comp))

        class_ctx = self._component_class_scope(parent, entry, comp.name)
        try:
            type_qname = resolve(self.tree, type_name, class_ctx)
        except ResolveError as exc:
            self._error(entry.uri, comp.span, exc.code,
                        f"component '{comp.name}': {exc.message}")
            return None

        variability = comp.variability or ast.Variability.CONTINUOUS
        rank = max(_VAR_RANK[variability], _VAR_RANK[parent.variability])
        variability = _RANK_VAR[rank]

        path = comp.name if parent.path == "" else f"{parent.path}.{comp.name}"
        node = InstanceNode(name=comp.name, path=path, class_ref=type_qname,
                            restriction=None,
                            variability=variability, causality=comp.causality,
                            flow_prefix=comp.flow_prefix, parent=parent,
                            binding=mod.binding, modification=mod)

        # resolve through aliases and builtins, folding alias modifications
        dims_exprs: list = list(comp.array_subscripts) + list(extra_dims)
        target_qname, alias_mod, alias_dims = self._peel_aliases(type_qname, entry)
        if alias_mod is not None:
            mod = _merge(mod, alias_mod, self._final_violation(parent, entry, comp))
            node.modification = mod
            if node.binding is None:
                node.binding = mod.binding
        dims_exprs.extend(alias_dims)

        dims = self._eval_dimensions(dims_exprs, parent, entry, comp, mod)
        if dims is None:
            return None

        enum_entry = None
        if target_qname in BUILTIN_TYPES:
            node.builtin = target_qname
            if not dims:
                self._apply_builtin_attributes(node, target_qname, mod, parent, entry)
        else:
            target = self.tree.get(target_qname)
            if target is None:
                return node
            node.restriction = target.restriction
            if target.ast is not None and target.ast.enum_literals:
                enum_entry = target
                node.builtin = target_qname

        if dims:
            node.is_array = True
            node.dimensions = dims
            self._expand_array_elements(node, target_qname, mod, dims, stack, entry)
        elif target_qname not in BUILTIN_TYPES and enum_entry is None:
            target = self.tree.get(target_qname)
            if target is not None:
                self._expand(node, target, mod, stack)
        return node

    def _expand_array_elements(self, node: InstanceNode, target_qname: str,
                               mod: ast.Modification, dims: tuple[int, ...],
                               stack: tuple[str, ...], entry: ClassEntry) -> None:
        # one element node per index tuple, each with the element-wise modification
        def build(prefix: tuple[int, ...], remaining: tuple[int, ...]) -> list[InstanceNode]:
            out = []
            if not remaining:
                return out
            for i in range(1, remaining[0] + 1):
                idx = prefix + (i,)
                if len(remaining) == 1:
                    suffix = "[" + ",".join(str(k) for k in idx) + "]"
                    elem_name = f"{node.name}{suffix}"
                    elem_path = f"{node.parent.path}.{elem_name}" if node.parent and node.parent.path \
                        else elem_name
                    elem_mod = _index_modification(mod, idx)
                    elem = InstanceNode(name=elem_name, path=elem_path,
                                        class_ref=node.class_ref,
                                        restriction=None if target_qname in BUILTIN_TYPES
                                        else node.restriction,
                                        variability=node.variability,
                                        causality=node.causality,
                                        flow_prefix=node.flow_prefix,
                                        parent=node,
                                        binding=elem_mod.binding,
                                        modification=elem_mod)
                    if target_qname in BUILTIN_TYPES:
                        elem.builtin = target_qname
                        self._apply_builtin_attributes(elem, target_qname, elem_mod,
                                                       node.parent or node, entry)
                    else:
                        target = self.tree.get(target_qname)
                        if target is not None:
                            elem.restriction = target.restriction
                            if target.ast is not None and target.ast.enum_literals:
                                elem.builtin = target_qname
                            else:
                                self._expand(elem, target, elem_mod, stack)
                    out.append(elem)
                else:
                    out.extend(build(idx, remaining[1:]))
            return out

        node.children.extend(build((), dims))

    def _peel_aliases(self, qname: str, entry: ClassEntry):
        """Follow short-class chains; returns (final qname, merged alias mod, dims)."""
        alias_mod: Optional[ast.Modification] = None
        dims: list = []
        seen = set()
        while qname not in BUILTIN_TYPES:
            target = self.tree.get(qname)
            if target is None or target.ast is None or not target.ast.is_short_class():
                break
            if qname in seen:
                break
            seen.add(qname)
            cls = target.ast
            alias_mod = cls.alias_modification if alias_mod is None else \
                _merge(alias_mod, cls.alias_modification, self._final_violation(None, entry))
            dims.extend(cls.alias_subscripts)
            try:
                qname = resolve(self.tree, cls.alias_target, target.parent)
            except ResolveError as exc:
                self._error(target.uri, cls.span, exc.code, exc.message)
                break
        return qname, alias_mod, tuple(dims)

    def _eval_dimensions(self, dims_exprs: list, parent: InstanceNode, entry: ClassEntry,
                         comp: ast.Component, mod: ast.Modification) -> Optional[tuple[int, ...]]:
        dims: list[int] = []
        scope = Scope(node=parent, class_ctx=entry.qname)
        for d in dims_exprs:
            if isinstance(d, ast.Colon):
                # size from binding
                binding = mod.binding
                if binding is None:
                    self._error(entry.uri, comp.span, SEM_NONCONSTANT_DIMENSION,
                                f"dimension of '{comp.name}' is ':' but there is no binding to size it")
                    return None
                try:
                    value = self.evaluator.eval(binding, scope)
                except EvalError as exc:
                    self._error(entry.uri, comp.span, SEM_NONCONSTANT_DIMENSION,
                                f"cannot size ':' dimension of '{comp.name}': {exc}")
                    return None
                vdims = dimensions_of(value)
                axis = len(dims)
                if axis >= len(vdims):
                    self._error(entry.uri, comp.span, SEM_NONCONSTANT_DIMENSION,
                                f"binding of '{comp.name}' has too few dimensions")
                    return None
                dims.append(vdims[axis])
                continue
            try:
                value = self.evaluator.eval(d, scope)
            except EvalError as exc:
                self._error(entry.uri, comp.span, SEM_NONCONSTANT_DIMENSION,
                            f"array dimension of '{comp.name}' is not constant: {exc}")
                return None
            if isinstance(value, bool) or not isinstance(value, int):
                self._error(entry.uri, comp.span, SEM_NONCONSTANT_DIMENSION,
                            f"array dimension of '{comp.name}' must be an Integer, got {value!r}")
                return None
            dims.append(value)
        return tuple(dims)

    def _apply_builtin_attributes(self, node: InstanceNode, builtin: str,
                                  mod: ast.Modification, scope_node: InstanceNode,
                                  entry: ClassEntry) -> None:
        node.restriction = None
        known = BUILTIN_ATTRIBUTES[builtin]
        scope = Scope(node=scope_node, class_ctx=entry.qname)
        for key, sub in mod.submods:
            if key not in known:
                self._error(entry.uri, sub.span, SEM_UNKNOWN_MODIFIED_ELEMENT,
                            f"'{builtin}' has no attribute '{key}'")
                continue
            if sub.binding is None:
                continue
            try:
                node.attributes[key] = self.evaluator.eval(sub.binding, scope)
            except EvalError as exc:
                self._error(entry.uri, sub.span, SEM_EVAL_ERROR,
                            f"cannot evaluate attribute '{key}': {exc}")

    def _component_class_scope(self, parent: InstanceNode, entry: ClassEntry, name: str) -> str:
        # components introduced by a base class resolve their type in that base
        for qname, cls in self._definition_sites(entry):
            if any(c.name == name for c in cls.components):
                return qname
        return entry.qname

    def _definition_sites(self, entry: ClassEntry, seen=None):
        if seen is None:
            seen = set()
        if entry.qname in seen or entry.ast is None:
            return
        seen.add(entry.qname)
        yield entry.qname, entry.ast
        for ext in entry.ast.extends_clauses:
            try:
                base_qname = resolve(self.tree, ext.base_name, entry.qname)
            except ResolveError:
                continue
            base = self.tree.get(base_qname)
            if base is not None:
                yield from self._definition_sites(base, seen)

    # -- evaluation ---------------------------------------------------------------

    def _evaluate_tree(self, root: InstanceNode) -> None:
        for node in root.walk():
            if node.evaluated is not None:
                continue
            if _VAR_RANK[node.variability] >= _VAR_RANK[ast.Variability.PARAMETER]:
                try:
                    self.evaluator.ensure_value(node)
                except EvalError as exc:
                    if node.variability is ast.Variability.CONSTANT and node.binding is not None:
                        self._error("<instantiate>", (0, 0), SEM_EVAL_ERROR,
                                    f"cannot evaluate constant '{node.path}': {exc}")
                    continue
                self._distribute_record_value(node)

    def _distribute_array_value(self, node: InstanceNode) -> None:
        if not node.is_array or not isinstance(node.evaluated, list):
            return
        for child in node.children:
            idx = _indices_of(child.name)
            value = node.evaluated
            try:
                for i in idx:
                    value = value[i - 1]
            except (IndexError, TypeError):
                continue
            if child.evaluated is None:
                child.evaluated = value
                self._distribute_record_value(child)

    def _distribute_record_value(self, node: InstanceNode) -> None:
        from .values import RecordValue

        if isinstance(node.evaluated, RecordValue):
            for child in node.children:
                if child.evaluated is None and child.name in node.evaluated.fields:
                    child.evaluated = node.evaluated.fields[child.name]
                    self._distribute_record_value(child)
        elif isinstance(node.evaluated, list) and node.is_array:
            self._distribute_array_value(node)

    # -- utilities ------------------------------------------------------------------

    def _final_violation(self, node, entry: ClassEntry, comp: Optional[ast.Component] = None):
        def report(key: str) -> None:
            where = comp.name if comp is not None else entry.qname
            span = comp.span if comp is not None else (entry.ast.span if entry.ast else (0, 0))
            self._error(entry.uri, span, SEM_FINAL_MODIFIED,
                        f"modification of final element '{key}' in '{where}'")

        return report

    def _error(self, uri: str, span, code: str, message: str) -> None:
        start, end = span if isinstance(span, tuple) else (0, 0)
        self.diags.append(Diagnostic(uri, start, end, Severity.ERROR, code, message))


@dataclass
class _Members:
    components: list = field(default_factory=list)
    classes: dict = field(default_factory=dict)
    redeclared_classes: dict = field(default_factory=dict)
    equations: list = field(default_factory=list)
    initial_equations: list = field(default_factory=list)
    class_mod: ast.Modification = ast.Modification()
    builtin_base: Optional[str] = None
    alias_dims: tuple = ()

    def absorb(self, other: "_Members") -> None:
        self.components.extend(other.components)
        self.classes.update(other.classes)
        self.redeclared_classes.update(other.redeclared_classes)
        self.equations.extend(other.equations)
        self.initial_equations.extend(other.initial_equations)
        if other.builtin_base is not None:
            self.builtin_base = other.builtin_base
        if not other.class_mod.is_empty():
            self.class_mod = _merge(self.class_mod, other.class_mod, lambda key: None)

    def modify(self, key: str, sub: ast.Modification, on_final) -> bool:
        """Attach ``sub`` as an outer modification on member ``key``."""
        for i, comp in enumerate(self.components):
            if comp.name == key:
                if comp.final and (sub.binding is not None or sub.submods):
                    on_final(key)
                    return True
                merged = _merge(sub, comp.modification, on_final)
                self.components[i] = dataclasses.replace(comp, modification=merged)
                return True
        if key in self.classes:
            return True  # class modifications via extends: accepted, rarely used
        return False


def _merge(outer: ast.Modification, inner: ast.Modification, on_final) -> ast.Modification:
    """Merge two modification levels; the outer one takes precedence."""
    if inner.is_empty():
        return outer
    if outer.is_empty():
        return inner
    if inner.final and (outer.binding is not None or outer.submods):
        on_final("<binding>")
        return inner
    binding = outer.binding if outer.binding is not None else inner.binding
    submods: list[tuple[str, ast.Modification]] = []
    outer_keys = {k for k, _ in outer.submods}
    for key, omod in outer.submods:
        imod = inner.submod(key)
        if imod is not None:
            if imod.final and (omod.binding is not None or omod.submods):
                on_final(key)
                submods.append((key, imod))
                continue
            submods.append((key, _merge(omod, imod, on_final)))
        else:
            submods.append((key, omod))
    for key, imod in inner.submods:
        if key not in outer_keys:
            submods.append((key, imod))
    redecls = tuple(outer.redeclarations) + tuple(
        r for r in inner.redeclarations
        if r.name not in {x.name for x in outer.redeclarations})
    return ast.Modification(submods=tuple(submods), redeclarations=redecls,
                            binding=binding, each=outer.each or inner.each,
                            final=outer.final or inner.final)


def _index_modification(mod: ast.Modification, idx: tuple[int, ...]) -> ast.Modification:
    """Per-element view of an array component's modification."""
    binding = mod.binding
    if binding is not None and not mod.each:
        binding = _indexed(mod.binding, idx)
    submods = []
    for key, sub in mod.submods:
        if sub.each:
            submods.append((key, dataclasses.replace(sub, each=False)))
        elif sub.binding is not None:
            submods.append((key, dataclasses.replace(sub, binding=_indexed(sub.binding, idx))))
        else:
            submods.append((key, sub))
    return ast.Modification(submods=tuple(submods), redeclarations=mod.redeclarations,
                            binding=binding, final=mod.final)


def _indexed(expr: ast.Expr, idx: tuple[int, ...]) -> ast.Expr:
    """expr -> expr[i1, i2, ...] without re-walking the expression."""
    subs = tuple(ast.IntLit(i) for i in idx)
    if isinstance(expr, ast.ArrayExpr) and not expr.iterators and len(idx) == 1 \
            and len(expr.elements) >= idx[0]:
        return expr.elements[idx[0] - 1]
    if isinstance(expr, ast.Ref):
        last = expr.parts[-1]
        new_last = ast.RefPart(last.name, last.subscripts + subs)
        return ast.Ref(parts=expr.parts[:-1] + (new_last,), global_=expr.global_, span=expr.span)
    # generic fallback: wrap in an indexing helper the evaluator understands
    return ast.Call(callee=ast.Ref(parts=(ast.RefPart("__index__", ()),)),
                    args=(expr,) + subs)


def _collect_array(node: InstanceNode) -> list:
    def build(prefix: tuple[int, ...], remaining: tuple[int, ...]):
        if len(remaining) == 1:
            out = []
            for i in range(1, remaining[0] + 1):
                suffix = "[" + ",".join(str(k) for k in prefix + (i,)) + "]"
                child = node.child(f"{node.name}{suffix}")
                out.append(child.evaluated if child is not None else None)
            return out
        return [build(prefix + (i,), remaining[1:]) for i in range(1, remaining[0] + 1)]

    return build((), node.dimensions)


def _indices_of(name: str) -> tuple[int, ...]:
    if "[" not in name:
        return ()
    inner = name.split("[", 1)[1].rstrip("]")
    return tuple(int(p) for p in inner.split(",") if p)
