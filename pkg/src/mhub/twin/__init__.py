"""Real-time virtual twins over the MQTT unified namespace."""
from __future__ import annotations

from .causalize import CausalizeError, Schedule, causalize, compile_expr
from .engine import (
    IllegalTransition,
    Lifecycle,
    TwinError,
    TwinInstance,
    TwinManager,
    TwinSpec,
    outputs_at,
    rk4_step,
    simulate,
)
from .topics import flat_name_from_topic, status_topic, value_topic, write_topic

__all__ = [
    "CausalizeError", "Schedule", "causalize", "compile_expr",
    "IllegalTransition", "Lifecycle", "TwinError", "TwinInstance", "TwinManager",
    "TwinSpec", "outputs_at", "rk4_step", "simulate",
    "flat_name_from_topic", "status_topic", "value_topic", "write_topic",
]
