"""Runtime values for constant/parameter evaluation.

Reals are Python floats, Integers ints, Booleans bools, Strings str; arrays
are (rectangular) lists and records carry their type's qualified name.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class EnumValue:
    type_name: str
    literal: str
    index: int  # 1-based, Modelica ordering

    def __str__(self) -> str:
        return f"{self.type_name}.{self.literal}"


@dataclass
class RecordValue:
    type_name: str
    fields: dict[str, "Value"]

    def __eq__(self, other) -> bool:
        return (isinstance(other, RecordValue) and other.type_name == self.type_name
                and other.fields == self.fields)


Value = Union[float, int, bool, str, EnumValue, RecordValue, list]


def is_numeric(v: Value) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def base_type_of(v: Value) -> str:
    if isinstance(v, bool):
        return "Boolean"
    if isinstance(v, int):
        return "Integer"
    if isinstance(v, float):
        return "Real"
    if isinstance(v, str):
        return "String"
    if isinstance(v, EnumValue):
        return v.type_name
    if isinstance(v, RecordValue):
        return v.type_name
    if isinstance(v, list):
        return base_type_of(v[0]) if v else "Real"
    raise TypeError(f"not a value: {v!r}")


def check_rectangular(arr: list) -> bool:
    """True when nested lists form a rectangular (hyper-)array."""
    if not isinstance(arr, list):
        return True
    if not arr:
        return True
    if isinstance(arr[0], list):
        size = len(arr[0])
        return all(isinstance(el, list) and len(el) == size and check_rectangular(el)
                   for el in arr)
    return all(not isinstance(el, list) for el in arr)


def dimensions_of(v: Value) -> tuple[int, ...]:
    dims: list[int] = []
    cur = v
    while isinstance(cur, list):
        dims.append(len(cur))
        if not cur:
            break
        cur = cur[0]
    return tuple(dims)


def display_form(v: Value, *, drop_integral_fraction: bool = False) -> str:
    """Human-facing rendering; Reals use the shortest round-trip decimal."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if drop_integral_fraction and v == int(v) and abs(v) < 1e15:
            return str(int(v))
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return v
    if isinstance(v, EnumValue):
        return str(v)
    if isinstance(v, RecordValue):
        inner = ", ".join(f"{k} = {display_form(val, drop_integral_fraction=drop_integral_fraction)}"
                          for k, val in v.fields.items())
        return f"{v.type_name}({inner})"
    if isinstance(v, list):
        return "{" + ", ".join(display_form(el, drop_integral_fraction=drop_integral_fraction)
                               for el in v) + "}"
    raise TypeError(f"not a value: {v!r}")
