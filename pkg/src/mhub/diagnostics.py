"""Diagnostics shared by all compiler stages.

Codes are stable strings (SYN*, SEM*) so tests and tooling assert on codes,
never on message wording.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


# Syntax
SYN_PARSE_ERROR = "SYN001"
SYN_UNSUPPORTED = "SYN002"

# Semantics
SEM_DUPLICATE_CLASS = "SEM001"
SEM_UNRESOLVED_NAME = "SEM002"
SEM_AMBIGUOUS_IMPORT = "SEM003"
SEM_EXTENDS_CYCLE = "SEM004"
SEM_UNKNOWN_MODIFIED_ELEMENT = "SEM005"
SEM_REDECLARE_NOT_REPLACEABLE = "SEM006"
SEM_FINAL_MODIFIED = "SEM007"
SEM_NONCONSTANT_FOR_RANGE = "SEM008"
SEM_CONNECT_MISMATCH = "SEM009"
SEM_INNER_OUTER = "SEM010"
SEM_EVAL_ERROR = "SEM011"
SEM_NONCONSTANT_DIMENSION = "SEM012"


@dataclass(frozen=True)
class Diagnostic:
    uri: str
    start: int
    end: int
    severity: Severity
    code: str
    message: str

    def to_json(self) -> dict:
        return {
            "uri": self.uri,
            "start": self.start,
            "end": self.end,
            "severity": self.severity.value,
            "code": self.code,
            "message": self.message,
        }


def sort_key(d: Diagnostic):
    return (d.uri, d.start, d.end, d.code)


def has_errors(diags: list[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diags)
