"""Small blocking MQTT 3.1.1 client (TCP), used by the twin engine and tests."""
from __future__ import annotations

import queue
import socket
import threading
import time
import uuid
from dataclasses import dataclass
from typing import Callable, Optional

from . import codec


class MqttError(Exception):
    pass


@dataclass
class Message:
    topic: str
    payload: bytes
    qos: int
    retain: bool


class MqttClient:
    def __init__(self, host: str, port: int, client_id: Optional[str] = None,
                 keep_alive: int = 0,
                 on_message: Optional[Callable[[Message], None]] = None):
        self.host = host
        self.port = port
        self.client_id = client_id or f"mh-{uuid.uuid4().hex[:12]}"
        self.keep_alive = keep_alive
        self.on_message = on_message
        self.messages: "queue.Queue[Message]" = queue.Queue()
        self._sock: Optional[socket.socket] = None
        self._send_lock = threading.Lock()
        self._acks: dict[tuple[str, int], threading.Event] = {}
        self._acks_lock = threading.Lock()
        self._next_id = 0
        self._connected = threading.Event()
        self._closed = threading.Event()
        self._reader: Optional[threading.Thread] = None
        self._pinger: Optional[threading.Thread] = None

    # -- connection --------------------------------------------------------------

    def connect(self, timeout: float = 5.0) -> "MqttClient":
        sock = socket.create_connection((self.host, self.port), timeout=timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        sock.settimeout(None)
        self._sock = sock
        self._send(codec.Connect(client_id=self.client_id, keep_alive=self.keep_alive,
                                 clean_session=True))
        self._reader = threading.Thread(target=self._reader_loop, name="mqtt-client-reader",
                                        daemon=True)
        self._reader.start()
        if not self._connected.wait(timeout):
            self.close()
            raise MqttError("CONNACK timeout")
        if self.keep_alive > 0:
            self._pinger = threading.Thread(target=self._ping_loop, name="mqtt-client-ping",
                                            daemon=True)
            self._pinger.start()
        return self

    def disconnect(self) -> None:
        if self._sock is not None and not self._closed.is_set():
            try:
                self._send(codec.Disconnect())
            except OSError:
                pass
        self.close()

    def close(self) -> None:
        self._closed.set()
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass

    def __enter__(self) -> "MqttClient":
        return self.connect()

    def __exit__(self, *exc) -> None:
        self.disconnect()

    # -- operations ----------------------------------------------------------------

    def subscribe(self, topic_filter: str, qos: int = 0, timeout: float = 5.0) -> int:
        pid = self._claim_id()
        event = self._register_ack("suback", pid)
        self._send(codec.Subscribe(packet_id=pid, topics=[(topic_filter, qos)]))
        if not event.wait(timeout):
            raise MqttError(f"SUBACK timeout for {topic_filter!r}")
        return pid

    def unsubscribe(self, topic_filter: str, timeout: float = 5.0) -> None:
        pid = self._claim_id()
        event = self._register_ack("unsuback", pid)
        self._send(codec.Unsubscribe(packet_id=pid, topics=[topic_filter]))
        if not event.wait(timeout):
            raise MqttError(f"UNSUBACK timeout for {topic_filter!r}")

    def publish(self, topic: str, payload: bytes | str, qos: int = 0,
                retain: bool = False, timeout: float = 5.0) -> None:
        if isinstance(payload, str):
            payload = payload.encode("utf-8")
        if qos == 0:
            self._send(codec.Publish(topic=topic, payload=payload, qos=0, retain=retain))
            return
        if qos != 1:
            raise MqttError("only QoS 0 and 1 are supported")
        pid = self._claim_id()
        event = self._register_ack("puback", pid)
        self._send(codec.Publish(topic=topic, payload=payload, qos=1, retain=retain,
                                 packet_id=pid))
        if not event.wait(timeout):
            raise MqttError(f"PUBACK timeout for {topic!r}")

    def ping(self) -> None:
        self._send(codec.Pingreq())

    def drain(self, duration: float = 0.3) -> list[Message]:
        """Collect messages arriving within ``duration`` seconds (test helper)."""
        out: list[Message] = []
        deadline = time.monotonic() + duration
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return out
            try:
                out.append(self.messages.get(timeout=remaining))
            except queue.Empty:
                return out

    # -- internals -------------------------------------------------------------------

    def _claim_id(self) -> int:
        with self._acks_lock:
            self._next_id = self._next_id % 0xFFFF + 1
            return self._next_id

    def _register_ack(self, kind: str, pid: int) -> threading.Event:
        event = threading.Event()
        with self._acks_lock:
            self._acks[(kind, pid)] = event
        return event

    def _resolve_ack(self, kind: str, pid: int) -> None:
        with self._acks_lock:
            event = self._acks.pop((kind, pid), None)
        if event is not None:
            event.set()

    def _send(self, packet) -> None:
        if self._sock is None:
            raise MqttError("not connected")
        data = codec.encode(packet)
        with self._send_lock:
            self._sock.sendall(data)

    def _reader_loop(self) -> None:
        buffer = b""
        sock = self._sock
        assert sock is not None
        while not self._closed.is_set():
            try:
                packet, consumed = codec.decode(buffer)
                buffer = buffer[consumed:]
            except codec.NeedMoreData:
                try:
                    chunk = sock.recv(65536)
                except OSError:
                    break
                if not chunk:
                    break
                buffer += chunk
                continue
            except codec.ProtocolError:
                break
            self._handle(packet)
        self._closed.set()

    def _handle(self, packet) -> None:
        if isinstance(packet, codec.Connack):
            if packet.return_code == codec.CONNACK_ACCEPTED:
                self._connected.set()
            return
        if isinstance(packet, codec.Publish):
            if packet.qos == 1 and packet.packet_id is not None:
                try:
                    self._send(codec.Puback(packet.packet_id))
                except (OSError, MqttError):
                    pass
            message = Message(topic=packet.topic, payload=packet.payload,
                              qos=packet.qos, retain=packet.retain)
            self.messages.put(message)
            if self.on_message is not None:
                try:
                    self.on_message(message)
                except Exception:  # noqa: BLE001 - user callback must not kill the reader
                    pass
            return
        if isinstance(packet, codec.Suback):
            self._resolve_ack("suback", packet.packet_id)
            return
        if isinstance(packet, codec.Unsuback):
            self._resolve_ack("unsuback", packet.packet_id)
            return
        if isinstance(packet, codec.Puback):
            self._resolve_ack("puback", packet.packet_id)
            return
        # PINGRESP and anything else needs no action

    def _ping_loop(self) -> None:
        interval = max(self.keep_alive * 0.5, 1.0)
        while not self._closed.wait(interval):
            try:
                self.ping()
            except (OSError, MqttError):
                return
