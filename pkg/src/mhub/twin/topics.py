"""Unified-namespace topic scheme for twin variables."""
from __future__ import annotations

import re
from typing import Optional

_INDEX_RE = re.compile(r"\[([\d,]+)\]")


def value_topic(twin_id: str, flat_name: str) -> str:
    """uns/<id>/<name with '.' -> '/' and [i] or [i,j] -> '/i' or '/i/j'>."""
    path = _INDEX_RE.sub(lambda m: "/" + m.group(1).replace(",", "/"), flat_name)
    path = path.replace(".", "/")
    return f"uns/{twin_id}/{path}"


def write_topic(twin_id: str, flat_name: str) -> str:
    return value_topic(twin_id, flat_name) + "/set"


def status_topic(twin_id: str) -> str:
    return f"uns/{twin_id}/$status"


def flat_name_from_topic(twin_id: str, topic: str) -> Optional[str]:
    """Inverse of value_topic/write_topic; None when the topic is foreign."""
    prefix = f"uns/{twin_id}/"
    if not topic.startswith(prefix):
        return None
    rest = topic[len(prefix):]
    if rest.endswith("/set"):
        rest = rest[: -len("/set")]
    if rest.startswith("$"):
        return None
    segments = rest.split("/")
    out: list[str] = []
    for seg in segments:
        if seg.isdigit() and out:
            if out[-1].endswith("]"):
                out[-1] = out[-1][:-1] + f",{seg}]"
            else:
                out[-1] += f"[{seg}]"
        else:
            out.append(seg)
    return ".".join(out)
