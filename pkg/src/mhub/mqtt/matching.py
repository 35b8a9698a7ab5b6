"""MQTT topic-filter matching (protocol section 4.7 semantics)."""
from __future__ import annotations


class FilterError(ValueError):
    pass


def validate_filter(filter_text: str) -> None:
    if not filter_text or len(filter_text) > 65535:
        raise FilterError("filter must be 1..65535 characters")
    if "\u0000" in filter_text:
        raise FilterError("filter must not contain U+0000")
    levels = filter_text.split("/")
    for i, level in enumerate(levels):
        if level == "#":
            if i != len(levels) - 1:
                raise FilterError("'#' must be the last level")
            continue
        if "#" in level:
            raise FilterError("'#' must occupy a whole level")
        if level != "+" and "+" in level:
            raise FilterError("'+' must occupy a whole level")


def validate_topic(topic: str) -> None:
    if not topic or len(topic) > 65535:
        raise FilterError("topic must be 1..65535 characters")
    if any(ch in topic for ch in ("#", "+", "\u0000")):
        raise FilterError("topic must not contain wildcards or U+0000")


def topic_match(filter_text: str, topic: str) -> bool:
    """True when ``topic`` matches ``filter_text``.

    '+' matches exactly one level, '#' matches zero or more trailing levels,
    and topics starting with '$' never match filters starting with a wildcard.
    """
    validate_filter(filter_text)
    if topic.startswith("$") and filter_text[0] in ("#", "+"):
        return False
    f_levels = filter_text.split("/")
    t_levels = topic.split("/")
    i = 0
    for i, f in enumerate(f_levels):
        if f == "#":
            return True
        if i >= len(t_levels):
            return False
        if f == "+":
            continue
        if f != t_levels[i]:
            return False
    return len(t_levels) == len(f_levels)
