"""Minimal semantic-versioning support for the local package registry.

Covers the range syntax manifests actually use: exact versions, ``^`` and
``~`` shorthands, comparator sets (``>=1.2.0 <2.0.0``), wildcards
(``*``, ``1.x``, ``1.2.x``), and pre-release ordering per semver 2.0.0.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import total_ordering
from typing import Optional

_VERSION_RE = re.compile(
    r"^(?P<major>0|[1-9]\d*)\.(?P<minor>0|[1-9]\d*)\.(?P<patch>0|[1-9]\d*)"
    r"(?:-(?P<pre>[0-9A-Za-z.-]+))?(?:\+(?P<build>[0-9A-Za-z.-]+))?$"
)


class SemverError(ValueError):
    pass


@total_ordering
@dataclass(frozen=True)
class Version:
    major: int
    minor: int
    patch: int
    prerelease: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "Version":
        m = _VERSION_RE.match(text.strip())
        if not m:
            raise SemverError(f"invalid version {text!r}")
        pre = tuple(
            int(p) if p.isdigit() else p
            for p in (m.group("pre") or "").split(".")
            if p != ""
        )
        return cls(int(m.group("major")), int(m.group("minor")), int(m.group("patch")), pre)

    def _key(self):
        # releases sort after any of their pre-releases
        pre_key = tuple((0, p) if isinstance(p, int) else (1, p) for p in self.prerelease)
        return (self.major, self.minor, self.patch, self.prerelease == (), pre_key)

    def __lt__(self, other: "Version") -> bool:
        a, b = self._key(), other._key()
        if a[:4] != b[:4]:
            return a[:4] < b[:4]
        # both pre-releases of same core: compare identifiers pairwise
        for x, y in zip(a[4], b[4]):
            if x != y:
                if x[0] != y[0]:
                    return x[0] < y[0]  # numeric identifiers sort first
                return x[1] < y[1]
        return len(a[4]) < len(b[4])

    def __str__(self) -> str:
        text = f"{self.major}.{self.minor}.{self.patch}"
        if self.prerelease:
            text += "-" + ".".join(str(p) for p in self.prerelease)
        return text


@dataclass(frozen=True)
class _Comparator:
    op: str  # '>=', '>', '<=', '<', '=='
    version: Version

    def matches(self, v: Version) -> bool:
        if self.op == ">=":
            return v >= self.version
        if self.op == ">":
            return v > self.version
        if self.op == "<=":
            return v <= self.version
        if self.op == "<":
            return v < self.version
        return v == self.version


@dataclass(frozen=True)
class Range:
    text: str
    comparators: tuple[_Comparator, ...]

    @classmethod
    def parse(cls, text: str) -> "Range":
        stripped = text.strip()
        if stripped in ("", "*", "x", "X"):
            return cls(text=stripped or "*", comparators=())
        comparators: list[_Comparator] = []
        for token in stripped.split():
            comparators.extend(_parse_token(token))
        return cls(text=stripped, comparators=tuple(comparators))

    def matches(self, v: Version) -> bool:
        if v.prerelease and not any(c.version.prerelease and
                                    (c.version.major, c.version.minor, c.version.patch)
                                    == (v.major, v.minor, v.patch)
                                    for c in self.comparators):
            return False  # pre-releases only match ranges that mention one
        return all(c.matches(v) for c in self.comparators)


def _parse_token(token: str) -> list[_Comparator]:
    if token.startswith("^"):
        base = Version.parse(token[1:])
        if base.major > 0:
            upper = Version(base.major + 1, 0, 0)
        elif base.minor > 0:
            upper = Version(0, base.minor + 1, 0)
        else:
            upper = Version(0, 0, base.patch + 1)
        return [_Comparator(">=", base), _Comparator("<", upper)]
    if token.startswith("~"):
        base = Version.parse(token[1:])
        return [_Comparator(">=", base), _Comparator("<", Version(base.major, base.minor + 1, 0))]
    for op in (">=", "<=", ">", "<", "="):
        if token.startswith(op):
            v = Version.parse(token[len(op):])
            return [_Comparator("==" if op == "=" else op, v)]
    # x-ranges and exact versions
    parts = token.split(".")
    if len(parts) <= 3 and any(p in ("x", "X", "*") for p in parts):
        nums = []
        for p in parts:
            if p in ("x", "X", "*"):
                break
            nums.append(int(p))
        if not nums:
            return []
        if len(nums) == 1:
            return [_Comparator(">=", Version(nums[0], 0, 0)),
                    _Comparator("<", Version(nums[0] + 1, 0, 0))]
        return [_Comparator(">=", Version(nums[0], nums[1], 0)),
                _Comparator("<", Version(nums[0], nums[1] + 1, 0))]
    if len(parts) == 1 and parts[0].isdigit():
        n = int(parts[0])
        return [_Comparator(">=", Version(n, 0, 0)), _Comparator("<", Version(n + 1, 0, 0))]
    if len(parts) == 2 and all(p.isdigit() for p in parts):
        return [_Comparator(">=", Version(int(parts[0]), int(parts[1]), 0)),
                _Comparator("<", Version(int(parts[0]), int(parts[1]) + 1, 0))]
    return [_Comparator("==", Version.parse(token))]


def satisfies(version: str, range_text: str) -> bool:
    return Range.parse(range_text).matches(Version.parse(version))


def max_satisfying(versions: list[str], range_text: str) -> Optional[str]:
    rng = Range.parse(range_text)
    best: Optional[tuple[Version, str]] = None
    for text in versions:
        try:
            v = Version.parse(text)
        except SemverError:
            continue
        if rng.matches(v) and (best is None or v > best[0]):
            best = (v, text)
    return best[1] if best else None
