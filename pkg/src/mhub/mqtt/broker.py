"""Embedded MQTT 3.1.1 broker: retained messages, QoS 0/1, wildcard
subscriptions, session takeover, keep-alive enforcement; TCP and
MQTT-over-WebSocket transports.

Scope is the documented 3.1.1 subset: clean sessions only, QoS 2 and
authentication unsupported. An external standard broker can be used instead;
this one exists so the system is self-contained.
"""
from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from . import codec
from .matching import FilterError, topic_match, validate_filter

log = logging.getLogger("mhub.mqtt.broker")

CONNECT_TIMEOUT = 10.0


@dataclass
class BrokerConfig:
    host: str = "127.0.0.1"
    tcp_port: int = 1883
    ws_port: Optional[int] = None  # None disables the WebSocket listener
    max_packet_bytes: int = 1 << 20
    max_queue: int = 10000


@dataclass
class _Session:
    client_id: str
    transport: "_Transport"
    broker: "Broker"
    keep_alive: int = 0
    subscriptions: list[tuple[str, int]] = field(default_factory=list)
    outbound: "queue.Queue[Optional[bytes]]" = field(default_factory=lambda: queue.Queue())
    will: Optional[codec.Publish] = None
    alive: bool = True
    _next_packet_id: int = 0

    def next_packet_id(self) -> int:
        self._next_packet_id = self._next_packet_id % 0xFFFF + 1
        return self._next_packet_id

    def send_packet(self, packet) -> None:
        self.enqueue(codec.encode(packet))

    def enqueue(self, data: bytes) -> None:
        if not self.alive:
            return
        if self.outbound.qsize() >= self.broker.config.max_queue:
            log.warning("client %s outbound queue overflow; disconnecting", self.client_id)
            self.broker._drop_session(self, abnormal=True)
            return
        self.outbound.put(data)

    def granted_qos_for(self, topic: str) -> Optional[int]:
        best: Optional[int] = None
        for filt, qos in self.subscriptions:
            try:
                if topic_match(filt, topic):
                    best = qos if best is None else max(best, qos)
            except FilterError:
                continue
        return best


class Broker:
    def __init__(self, config: Optional[BrokerConfig] = None):
        self.config = config or BrokerConfig()
        self.sessions: dict[str, _Session] = {}
        self.retained: dict[str, tuple[bytes, int]] = {}
        self._lock = threading.RLock()
        self._tcp_sock: Optional[socket.socket] = None
        self._ws_server = None
        self._threads: list[threading.Thread] = []
        self._running = False
        self.tcp_port: Optional[int] = None
        self.ws_port: Optional[int] = None

    # -- lifecycle ---------------------------------------------------------------

    def start(self) -> "Broker":
        self._running = True
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((self.config.host, self.config.tcp_port))
        sock.listen(64)
        self._tcp_sock = sock
        self.tcp_port = sock.getsockname()[1]
        accept_thread = threading.Thread(target=self._accept_loop, name="mqtt-accept",
                                         daemon=True)
        accept_thread.start()
        self._threads.append(accept_thread)

        if self.config.ws_port is not None:
            self._start_ws()
        log.info("MQTT broker on %s:%s (ws: %s)", self.config.host, self.tcp_port, self.ws_port)
        return self

    def _start_ws(self) -> None:
        from websockets.sync.server import serve

        def handler(connection) -> None:
            transport = _WsTransport(connection)
            self._serve_connection(transport, "websocket")

        def select_subprotocol(connection, subprotocols):
            return "mqtt" if "mqtt" in subprotocols else None

        self._ws_server = serve(handler, self.config.host, self.config.ws_port,
                                subprotocols=["mqtt"],
                                select_subprotocol=select_subprotocol)
        self.ws_port = self._ws_server.socket.getsockname()[1]
        ws_thread = threading.Thread(target=self._ws_server.serve_forever,
                                     name="mqtt-ws", daemon=True)
        ws_thread.start()
        self._threads.append(ws_thread)

    def stop(self) -> None:
        self._running = False
        with self._lock:
            sessions = list(self.sessions.values())
        for session in sessions:
            self._drop_session(session, abnormal=False)
        if self._tcp_sock is not None:
            try:
                self._tcp_sock.close()
            except OSError:
                pass
        if self._ws_server is not None:
            self._ws_server.shutdown()

    # -- TCP accept/serve -----------------------------------------------------------

    def _accept_loop(self) -> None:
        assert self._tcp_sock is not None
        while self._running:
            try:
                conn, _addr = self._tcp_sock.accept()
            except OSError:
                return
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            thread = threading.Thread(target=self._serve_connection,
                                      args=(_TcpTransport(conn), "tcp"),
                                      name="mqtt-conn", daemon=True)
            thread.start()

    def _serve_connection(self, transport: "_Transport", kind: str) -> None:
        session: Optional[_Session] = None
        abnormal = True
        buffer = b""
        try:
            transport.settimeout(CONNECT_TIMEOUT)
            packet, buffer = self._read_packet(transport, buffer)
            if not isinstance(packet, codec.Connect):
                return
            if not packet.clean_session:
                # persistent sessions are out of scope; accept but treat as clean
                log.debug("client %s requested a persistent session; treating as clean",
                          packet.client_id)
            client_id = packet.client_id
            if client_id == "":
                client_id = f"anon-{id(transport) & 0xFFFFFF:x}"
            session = _Session(client_id=client_id, transport=transport, broker=self,
                               keep_alive=packet.keep_alive)
            if packet.will_topic is not None:
                session.will = codec.Publish(topic=packet.will_topic,
                                             payload=packet.will_payload,
                                             qos=packet.will_qos,
                                             retain=packet.will_retain)
            self._register(session)
            writer = threading.Thread(target=self._writer_loop, args=(session,),
                                      name=f"mqtt-out-{client_id}", daemon=True)
            writer.start()
            session.send_packet(codec.Connack(session_present=False,
                                              return_code=codec.CONNACK_ACCEPTED))
            timeout = session.keep_alive * 1.5 if session.keep_alive > 0 else None
            transport.settimeout(timeout)
            while session.alive:
                packet, buffer = self._read_packet(transport, buffer)
                if packet is None:
                    return
                if isinstance(packet, codec.Disconnect):
                    abnormal = False
                    return
                self._dispatch(session, packet)
        except (codec.ProtocolError, OSError, TimeoutError, _ClosedTransport):
            pass
        except Exception:  # pragma: no cover - safety net for fuzzed input
            log.exception("connection handler failed")
        finally:
            if session is not None:
                self._drop_session(session, abnormal=abnormal)
            else:
                transport.close()

    def _read_packet(self, transport: "_Transport", buffer: bytes):
        while True:
            try:
                packet, consumed = codec.decode(buffer)
                if consumed > self.config.max_packet_bytes:
                    raise codec.ProtocolError("packet exceeds the size limit")
                return packet, buffer[consumed:]
            except codec.NeedMoreData:
                pass
            if len(buffer) > self.config.max_packet_bytes:
                raise codec.ProtocolError("packet exceeds the size limit")
            chunk = transport.recv()
            if not chunk:
                raise _ClosedTransport()
            buffer += chunk

    def _writer_loop(self, session: _Session) -> None:
        while True:
            data = session.outbound.get()
            if data is None:
                return
            try:
                session.transport.sendall(data)
            except (OSError, _ClosedTransport):
                self._drop_session(session, abnormal=True)
                return

    # -- registration / teardown ------------------------------------------------------

    def _register(self, session: _Session) -> None:
        with self._lock:
            existing = self.sessions.get(session.client_id)
            if existing is not None:
                log.info("session takeover for client %s", session.client_id)
                self._drop_session(existing, abnormal=False, takeover=True)
            self.sessions[session.client_id] = session

    def _drop_session(self, session: _Session, abnormal: bool, takeover: bool = False) -> None:
        with self._lock:
            if not session.alive:
                return
            session.alive = False
            if self.sessions.get(session.client_id) is session:
                del self.sessions[session.client_id]
        session.outbound.put(None)
        session.transport.close()
        if abnormal and session.will is not None and not takeover:
            self._route_publish(session.will)

    # -- packet dispatch ------------------------------------------------------------

    def _dispatch(self, session: _Session, packet) -> None:
        if isinstance(packet, codec.Publish):
            if packet.qos > 1:
                raise codec.ProtocolError("QoS 2 is not supported")
            self._route_publish(packet)
            if packet.qos == 1 and packet.packet_id is not None:
                session.send_packet(codec.Puback(packet.packet_id))
            return
        if isinstance(packet, codec.Subscribe):
            codes: list[int] = []
            valid: list[tuple[str, int]] = []
            for topic_filter, requested in packet.topics:
                try:
                    validate_filter(topic_filter)
                except FilterError:
                    codes.append(0x80)
                    continue
                granted = min(requested, 1)  # QoS 2 downgraded
                codes.append(granted)
                valid.append((topic_filter, granted))
            with self._lock:
                existing = [f for f, _ in session.subscriptions]
                for topic_filter, granted in valid:
                    if topic_filter in existing:
                        session.subscriptions = [
                            (f, q) if f != topic_filter else (f, granted)
                            for f, q in session.subscriptions]
                    else:
                        session.subscriptions.append((topic_filter, granted))
            session.send_packet(codec.Suback(packet_id=packet.packet_id, return_codes=codes))
            # retained delivery happens after SUBACK, per subscription
            for topic_filter, granted in valid:
                self._deliver_retained(session, topic_filter, granted)
            return
        if isinstance(packet, codec.Unsubscribe):
            with self._lock:
                session.subscriptions = [
                    (f, q) for f, q in session.subscriptions if f not in packet.topics]
            session.send_packet(codec.Unsuback(packet.packet_id))
            return
        if isinstance(packet, codec.Pingreq):
            session.send_packet(codec.Pingresp())
            return
        if isinstance(packet, codec.Puback):
            return  # QoS 1 delivery bookkeeping is not tracked for clean sessions
        if isinstance(packet, codec.Connect):
            raise codec.ProtocolError("duplicate CONNECT")
        raise codec.ProtocolError(f"unexpected packet {type(packet).__name__}")

    def _route_publish(self, publish: codec.Publish) -> None:
        if publish.retain:
            with self._lock:
                if len(publish.payload) == 0:
                    self.retained.pop(publish.topic, None)
                else:
                    self.retained[publish.topic] = (publish.payload, publish.qos)
        with self._lock:
            targets = list(self.sessions.values())
        for target in targets:
            granted = target.granted_qos_for(publish.topic)
            if granted is None:
                continue
            qos = min(publish.qos, granted)
            out = codec.Publish(topic=publish.topic, payload=publish.payload, qos=qos,
                                retain=False,
                                packet_id=target.next_packet_id() if qos > 0 else None)
            target.send_packet(out)

    def _deliver_retained(self, session: _Session, topic_filter: str, granted: int) -> None:
        with self._lock:
            snapshot = list(self.retained.items())
        for topic, (payload, qos) in sorted(snapshot):
            try:
                if not topic_match(topic_filter, topic):
                    continue
            except FilterError:
                continue
            out_qos = min(qos, granted)
            session.send_packet(codec.Publish(
                topic=topic, payload=payload, qos=out_qos, retain=True,
                packet_id=session.next_packet_id() if out_qos > 0 else None))

    # -- introspection (tests, service) -----------------------------------------------

    def retained_snapshot(self) -> dict[str, bytes]:
        with self._lock:
            return {t: p for t, (p, _q) in self.retained.items()}

    def session_count(self) -> int:
        with self._lock:
            return len(self.sessions)


class _ClosedTransport(Exception):
    pass


class _Transport:
    def recv(self) -> bytes:  # pragma: no cover - interface
        raise NotImplementedError

    def sendall(self, data: bytes) -> None:  # pragma: no cover - interface
        raise NotImplementedError

    def settimeout(self, timeout: Optional[float]) -> None:  # pragma: no cover
        raise NotImplementedError

    def close(self) -> None:  # pragma: no cover - interface
        raise NotImplementedError


class _TcpTransport(_Transport):
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._send_lock = threading.Lock()

    def recv(self) -> bytes:
        try:
            return self.sock.recv(65536)
        except socket.timeout as exc:
            raise TimeoutError() from exc

    def sendall(self, data: bytes) -> None:
        with self._send_lock:
            self.sock.sendall(data)

    def settimeout(self, timeout: Optional[float]) -> None:
        self.sock.settimeout(timeout)

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


class _WsTransport(_Transport):
    """MQTT control packets carried in binary WebSocket messages."""

    def __init__(self, connection):
        self.connection = connection
        self._timeout: Optional[float] = None
        self._send_lock = threading.Lock()

    def recv(self) -> bytes:
        from websockets.exceptions import ConnectionClosed

        try:
            message = self.connection.recv(timeout=self._timeout)
        except ConnectionClosed as exc:
            raise _ClosedTransport() from exc
        except TimeoutError:
            raise
        if isinstance(message, str):
            raise codec.ProtocolError("MQTT-over-WebSocket requires binary frames")
        return message

    def sendall(self, data: bytes) -> None:
        from websockets.exceptions import ConnectionClosed

        with self._send_lock:
            try:
                self.connection.send(data)
            except ConnectionClosed as exc:
                raise _ClosedTransport() from exc

    def settimeout(self, timeout: Optional[float]) -> None:
        self._timeout = timeout

    def close(self) -> None:
        try:
            self.connection.close()
        except Exception:  # noqa: BLE001 - closing a dead socket must not raise
            pass


def start_broker(host: str = "127.0.0.1", tcp_port: int = 0,
                 ws_port: Optional[int] = 0) -> Broker:
    """Convenience: start a broker on ephemeral ports (for tests/tools)."""
    return Broker(BrokerConfig(host=host, tcp_port=tcp_port, ws_port=ws_port)).start()
