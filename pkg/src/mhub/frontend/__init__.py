"""Semantic analysis: class tree, lookup, instantiation, evaluation, flattening."""
from __future__ import annotations

from .classtree import BUILTIN_TYPES, ClassEntry, ClassTree, build_class_tree
from .evaluate import EvalError, Evaluator, Scope
from .flatten import FlatEquation, FlatModel, FlatVariable, flatten
from .instantiate import InstanceNode, InstanceTree, InstantiationError, Instantiator
from .resolve import ResolveError, resolve, resolve_entry
from .values import EnumValue, RecordValue, Value, display_form

__all__ = [
    "BUILTIN_TYPES", "ClassEntry", "ClassTree", "build_class_tree",
    "EvalError", "Evaluator", "Scope",
    "FlatEquation", "FlatModel", "FlatVariable", "flatten",
    "InstanceNode", "InstanceTree", "InstantiationError", "Instantiator",
    "ResolveError", "resolve", "resolve_entry",
    "EnumValue", "RecordValue", "Value", "display_form",
]
