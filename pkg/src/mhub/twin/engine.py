"""Virtual twin engine: RK4 stepping, wall-clock pacing, UNS publication,
runtime writes, and lifecycle management."""
from __future__ import annotations

import json
import logging
import math
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from ..frontend import FlatModel
from ..mqtt.client import Message, MqttClient
from .causalize import CausalizeError, Env, Schedule, causalize
from .topics import flat_name_from_topic, status_topic, value_topic, write_topic

log = logging.getLogger("mhub.twin")


class TwinError(Exception):
    pass


class IllegalTransition(TwinError):
    pass


class Lifecycle(Enum):
    DEPLOYED = "deployed"
    RUNNING = "running"
    STOPPED = "stopped"


@dataclass
class TwinSpec:
    id: str
    root_class: str
    step_size: float = 0.01
    rt_factor: float = 1.0
    publish_every: int = 1
    broker_host: Optional[str] = None  # default: the manager's broker
    broker_port: Optional[int] = None

    def validate(self) -> None:
        import re

        if not re.fullmatch(r"[a-z0-9-]+", self.id):
            raise TwinError(f"twin id {self.id!r} must match [a-z0-9-]+")
        if not (self.step_size > 0):
            raise TwinError("step size must be > 0")
        if not (self.rt_factor > 0):
            raise TwinError("rtFactor must be > 0")
        if self.publish_every < 1:
            raise TwinError("publishEvery must be >= 1")
        if self.step_size * self.publish_every < 0.010:
            raise TwinError("publish period h*publishEvery must be at least 10 ms")


# ---------------------------------------------------------------------------
# integration core (pure; no clocks, no I/O)


def rk4_step(schedule: Schedule, env: Env, x: np.ndarray, t: float, h: float) -> np.ndarray:
    def f(tt: float, xx: np.ndarray) -> np.ndarray:
        _fill_env(schedule, env, xx, tt)
        return np.array([fn(env) for _, fn, _ in schedule.derivatives], dtype=float)

    k1 = f(t, x)
    k2 = f(t + h / 2.0, x + (h / 2.0) * k1)
    k3 = f(t + h / 2.0, x + (h / 2.0) * k2)
    k4 = f(t + h, x + h * k3)
    return x + h * ((k1 + 2.0 * (k2 + k3) + k4) / 6.0)


def _fill_env(schedule: Schedule, env: Env, x: np.ndarray, t: float) -> None:
    env["time"] = t
    for name, i in schedule.state_index.items():
        env[name] = float(x[i])
    for name, fn, _ in schedule.assignments:
        env[name] = fn(env)


def outputs_at(schedule: Schedule, env: Env, x: np.ndarray, t: float) -> dict[str, object]:
    _fill_env(schedule, env, x, t)
    return {name: env[name] for name in schedule.outputs}


def simulate(schedule: Schedule, n_steps: int, h: float,
             x0: Optional[np.ndarray] = None, t0: float = 0.0) -> list[dict[str, object]]:
    """Pacing-free run: n_steps of RK4, outputs sampled after each step.

    Deterministic: identical inputs give bit-identical output sequences.
    """
    env: Env = dict(schedule.parameters)
    x = np.array(schedule.initial_state if x0 is None else x0, dtype=float)
    t = t0
    frames: list[dict[str, object]] = []
    for _ in range(n_steps):
        x = rk4_step(schedule, env, x, t, h)
        t += h
        if not np.all(np.isfinite(x)):
            raise TwinError(f"non-finite state at t={t}")
        frames.append(outputs_at(schedule, env, x, t))
    return frames


# ---------------------------------------------------------------------------
# deployed twin


@dataclass
class _Write:
    name: str
    value: object


class TwinInstance:
    def __init__(self, spec: TwinSpec, schedule: Schedule):
        self.spec = spec
        self.schedule = schedule
        self.lifecycle = Lifecycle.DEPLOYED
        self.fault = False
        self.sim_time = 0.0
        self.overruns = 0
        self.state_vector = np.array(schedule.initial_state, dtype=float)
        self.env: Env = dict(schedule.parameters)
        self.pending_writes: list[_Write] = []
        self.rejected_writes: list[str] = []
        self._writes_lock = threading.Lock()
        self._stop_event = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._client: Optional[MqttClient] = None
        self.topic_map = {name: value_topic(spec.id, name) for name in schedule.outputs}

    # -- MQTT ------------------------------------------------------------------

    def attach(self) -> None:
        client = MqttClient(self.spec.broker_host, self.spec.broker_port,
                            client_id=f"twin-{self.spec.id}",
                            on_message=self._on_message)
        client.connect()
        # one wildcard filter per write-topic depth: uns/<id>/+/.../set
        level_counts = {write_topic(self.spec.id, n).count("/") + 1
                        for n in self.schedule.outputs}
        for levels in sorted(level_counts):
            pattern = "/".join(["uns", self.spec.id] + ["+"] * (levels - 3) + ["set"])
            client.subscribe(pattern, qos=1)
        self._client = client

    def detach(self) -> None:
        if self._client is not None:
            self._client.disconnect()
            self._client = None

    def _on_message(self, message: Message) -> None:
        if not message.topic.endswith("/set"):
            return
        name = flat_name_from_topic(self.spec.id, message.topic)
        if name is None:
            return
        try:
            doc = json.loads(message.payload.decode("utf-8"))
            value = doc["v"] if isinstance(doc, dict) else doc
        except (ValueError, KeyError):
            self._publish_status(error=f"unparseable write to {message.topic}")
            return
        kind = self.schedule.variable_kinds.get(name)
        if kind is None:
            self._publish_status(error=f"write to unknown variable '{name}'")
            return
        if kind == "algebraic":
            # would be overwritten by its assignment in the same step
            with self._writes_lock:
                self.rejected_writes.append(name)
            self._publish_status(error=f"write to algebraic variable '{name}' rejected")
            return
        with self._writes_lock:
            self.pending_writes.append(_Write(name=name, value=value))

    def _publish(self, topic: str, payload: bytes, retain: bool = True) -> None:
        if self._client is None:
            return
        try:
            self._client.publish(topic, payload, qos=0, retain=retain)
        except Exception:  # noqa: BLE001 - publish failures must not kill the loop
            log.warning("publish to %s failed", topic, exc_info=True)

    def _publish_outputs(self) -> None:
        frame = outputs_at(self.schedule, self.env, self.state_vector, self.sim_time)
        for name, value in frame.items():
            payload = json.dumps({"t": self.sim_time, "v": _jsonable(value)}).encode()
            self._publish(self.topic_map[name], payload)

    def _publish_status(self, error: Optional[str] = None) -> None:
        state = "fault" if self.fault else (
            "running" if self.lifecycle is Lifecycle.RUNNING else "stopped")
        doc = {"state": state, "overruns": self.overruns, "t": self.sim_time}
        if error:
            doc["error"] = error
        self._publish(status_topic(self.spec.id), json.dumps(doc).encode())

    def clear_retained(self) -> None:
        if self._client is None:
            return
        for topic in self.topic_map.values():
            self._publish(topic, b"")
        self._publish(status_topic(self.spec.id), b"")

    # -- the paced loop -----------------------------------------------------------

    def run_loop(self) -> None:
        spec = self.spec
        h = spec.step_size
        period = h / spec.rt_factor
        self._apply_writes()
        self._publish_outputs()
        self._publish_status()
        start_wall = time.monotonic()
        n = 0
        while not self._stop_event.is_set():
            deadline = start_wall + (n + 1) * period
            now = time.monotonic()
            if now < deadline:
                if self._stop_event.wait(deadline - now):
                    break
            else:
                self.overruns += 1
            self._apply_writes()
            try:
                new_state = rk4_step(self.schedule, self.env, self.state_vector,
                                     self.sim_time, h)
            except (ArithmeticError, ValueError, OverflowError) as exc:
                self.fault = True
                self._publish_status(error=f"step failed: {exc}")
                break
            if not np.all(np.isfinite(new_state)):
                self.fault = True
                self._publish_status(error="non-finite state")
                break
            self.state_vector = new_state
            self.sim_time = round((n + 1) * h, 12)
            n += 1
            if n % spec.publish_every == 0:
                self._publish_outputs()
                self._publish_status()
        self.lifecycle = Lifecycle.STOPPED
        self._publish_outputs()
        self._publish_status()

    def _apply_writes(self) -> None:
        with self._writes_lock:
            writes = self.pending_writes
            self.pending_writes = []
        for w in writes:
            kind = self.schedule.variable_kinds.get(w.name)
            if kind == "state":
                self.state_vector[self.schedule.state_index[w.name]] = float(w.value)
            elif kind == "parameter":
                self.env[w.name] = w.value
                self.schedule.parameters[w.name] = w.value

    # -- lifecycle ------------------------------------------------------------------

    def start(self) -> None:
        if self.lifecycle is Lifecycle.RUNNING:
            raise IllegalTransition(f"twin '{self.spec.id}' is already running")
        self.fault = False
        self._stop_event.clear()
        self.lifecycle = Lifecycle.RUNNING
        self._thread = threading.Thread(target=self.run_loop,
                                        name=f"twin-{self.spec.id}", daemon=True)
        self._thread.start()

    def stop(self, timeout: float = 5.0) -> None:
        if self.lifecycle is not Lifecycle.RUNNING:
            raise IllegalTransition(f"twin '{self.spec.id}' is not running")
        self._stop_event.set()
        if self._thread is not None:
            self._thread.join(timeout)
        self.lifecycle = Lifecycle.STOPPED

    def info(self) -> dict:
        return {
            "id": self.spec.id,
            "rootClass": self.spec.root_class,
            "state": "fault" if self.fault else self.lifecycle.value,
            "simTime": self.sim_time,
            "overruns": self.overruns,
        }


def _jsonable(value):
    if isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, np.floating):
        return float(value)
    return str(value)


# ---------------------------------------------------------------------------
# manager


class TwinManager:
    """Owns deployed twins; thread-safe lifecycle calls serialized per twin."""

    def __init__(self, flatten_class: Callable[[str], FlatModel],
                 broker_host: str = "127.0.0.1", broker_port: int = 1883):
        self.flatten_class = flatten_class
        self.broker_host = broker_host
        self.broker_port = broker_port
        self.twins: dict[str, TwinInstance] = {}
        self._lock = threading.RLock()
        self._twin_locks: dict[str, threading.Lock] = {}

    def _twin_lock(self, twin_id: str) -> threading.Lock:
        with self._lock:
            return self._twin_locks.setdefault(twin_id, threading.Lock())

    def deploy(self, spec: TwinSpec) -> TwinInstance:
        spec.validate()
        with self._twin_lock(spec.id):
            with self._lock:
                if spec.id in self.twins:
                    raise TwinError(f"twin id '{spec.id}' is already deployed")
            flat = self.flatten_class(spec.root_class)
            try:
                schedule = causalize(flat)
            except CausalizeError:
                raise
            spec.broker_host = spec.broker_host or self.broker_host
            spec.broker_port = spec.broker_port or self.broker_port
            twin = TwinInstance(spec, schedule)
            twin.attach()
            with self._lock:
                self.twins[spec.id] = twin
            return twin

    def get(self, twin_id: str) -> TwinInstance:
        with self._lock:
            twin = self.twins.get(twin_id)
        if twin is None:
            raise TwinError(f"unknown twin '{twin_id}'")
        return twin

    def start(self, twin_id: str) -> dict:
        with self._twin_lock(twin_id):
            twin = self.get(twin_id)
            twin.start()
            return twin.info()

    def stop(self, twin_id: str) -> dict:
        with self._twin_lock(twin_id):
            twin = self.get(twin_id)
            if twin.lifecycle is Lifecycle.STOPPED:
                return twin.info()  # idempotent repeat stop
            twin.stop()
            return twin.info()

    def undeploy(self, twin_id: str) -> None:
        with self._twin_lock(twin_id):
            twin = self.get(twin_id)
            if twin.lifecycle is Lifecycle.RUNNING:
                raise IllegalTransition(f"stop twin '{twin_id}' before undeploying")
            twin.clear_retained()
            time.sleep(0.05)  # let the clears flush before dropping the connection
            twin.detach()
            with self._lock:
                self.twins.pop(twin_id, None)

    def list(self) -> list[dict]:
        with self._lock:
            return [self.twins[k].info() for k in sorted(self.twins)]

    def shutdown(self) -> None:
        for twin_id in [t["id"] for t in self.list()]:
            try:
                twin = self.get(twin_id)
                if twin.lifecycle is Lifecycle.RUNNING:
                    twin.stop()
                self.undeploy(twin_id)
            except TwinError:
                continue
