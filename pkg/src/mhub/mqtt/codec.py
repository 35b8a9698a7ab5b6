"""MQTT 3.1.1 packet encoding/decoding.

Covers the packet set the unified namespace needs: CONNECT/CONNACK,
PUBLISH/PUBACK (QoS 0/1), SUBSCRIBE/SUBACK, UNSUBSCRIBE/UNSUBACK,
PINGREQ/PINGRESP, DISCONNECT. Decoding is defensive: malformed input
raises ProtocolError, never crashes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

CONNECT = 1
CONNACK = 2
PUBLISH = 3
PUBACK = 4
PUBREC = 5
PUBREL = 6
PUBCOMP = 7
SUBSCRIBE = 8
SUBACK = 9
UNSUBSCRIBE = 10
UNSUBACK = 11
PINGREQ = 12
PINGRESP = 13
DISCONNECT = 14

CONNACK_ACCEPTED = 0x00
CONNACK_BAD_PROTOCOL = 0x01
CONNACK_IDENTIFIER_REJECTED = 0x02

MAX_REMAINING_LENGTH = 268_435_455


class ProtocolError(Exception):
    pass


class NeedMoreData(Exception):
    pass


@dataclass
class Connect:
    client_id: str
    keep_alive: int = 0
    clean_session: bool = True
    will_topic: Optional[str] = None
    will_payload: bytes = b""
    will_qos: int = 0
    will_retain: bool = False
    username: Optional[str] = None
    password: Optional[bytes] = None


@dataclass
class Connack:
    session_present: bool = False
    return_code: int = CONNACK_ACCEPTED


@dataclass
class Publish:
    topic: str
    payload: bytes = b""
    qos: int = 0
    retain: bool = False
    dup: bool = False
    packet_id: Optional[int] = None


@dataclass
class Puback:
    packet_id: int


@dataclass
class Subscribe:
    packet_id: int
    topics: list[tuple[str, int]] = field(default_factory=list)


@dataclass
class Suback:
    packet_id: int
    return_codes: list[int] = field(default_factory=list)


@dataclass
class Unsubscribe:
    packet_id: int
    topics: list[str] = field(default_factory=list)


@dataclass
class Unsuback:
    packet_id: int


@dataclass
class Pingreq:
    pass


@dataclass
class Pingresp:
    pass


@dataclass
class Disconnect:
    pass


Packet = object


# ---------------------------------------------------------------------------
# primitives


def _encode_remaining_length(n: int) -> bytes:
    if not 0 <= n <= MAX_REMAINING_LENGTH:
        raise ProtocolError(f"remaining length {n} out of range")
    out = bytearray()
    while True:
        digit = n % 128
        n //= 128
        if n > 0:
            digit |= 0x80
        out.append(digit)
        if n == 0:
            return bytes(out)


def _decode_remaining_length(data: bytes, offset: int) -> tuple[int, int]:
    multiplier = 1
    value = 0
    consumed = 0
    while True:
        if offset + consumed >= len(data):
            raise NeedMoreData()
        digit = data[offset + consumed]
        consumed += 1
        value += (digit & 0x7F) * multiplier
        if (digit & 0x80) == 0:
            return value, consumed
        multiplier *= 128
        if consumed >= 4:
            raise ProtocolError("malformed remaining length")


def _string(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolError("string too long")
    return len(raw).to_bytes(2, "big") + raw


def _read_string(data: bytes, offset: int) -> tuple[str, int]:
    raw, offset = _read_bytes(data, offset)
    try:
        return raw.decode("utf-8"), offset
    except UnicodeDecodeError as exc:
        raise ProtocolError("invalid UTF-8 string") from exc


def _read_bytes(data: bytes, offset: int) -> tuple[bytes, int]:
    if offset + 2 > len(data):
        raise ProtocolError("truncated length prefix")
    n = int.from_bytes(data[offset:offset + 2], "big")
    offset += 2
    if offset + n > len(data):
        raise ProtocolError("truncated field")
    return data[offset:offset + n], offset + n


def _read_u16(data: bytes, offset: int) -> tuple[int, int]:
    if offset + 2 > len(data):
        raise ProtocolError("truncated integer")
    return int.from_bytes(data[offset:offset + 2], "big"), offset + 2


# ---------------------------------------------------------------------------
# encoding


def encode(packet: Packet) -> bytes:
    if isinstance(packet, Connect):
        return _encode_connect(packet)
    if isinstance(packet, Connack):
        body = bytes([1 if packet.session_present else 0, packet.return_code])
        return _with_header(CONNACK, 0, body)
    if isinstance(packet, Publish):
        flags = (0x08 if packet.dup else 0) | (packet.qos << 1) | (0x01 if packet.retain else 0)
        body = _string(packet.topic)
        if packet.qos > 0:
            if packet.packet_id is None:
                raise ProtocolError("QoS > 0 PUBLISH needs a packet id")
            body += packet.packet_id.to_bytes(2, "big")
        body += packet.payload
        return _with_header(PUBLISH, flags, body)
    if isinstance(packet, Puback):
        return _with_header(PUBACK, 0, packet.packet_id.to_bytes(2, "big"))
    if isinstance(packet, Subscribe):
        body = packet.packet_id.to_bytes(2, "big")
        for topic, qos in packet.topics:
            body += _string(topic) + bytes([qos])
        return _with_header(SUBSCRIBE, 0x02, body)
    if isinstance(packet, Suback):
        body = packet.packet_id.to_bytes(2, "big") + bytes(packet.return_codes)
        return _with_header(SUBACK, 0, body)
    if isinstance(packet, Unsubscribe):
        body = packet.packet_id.to_bytes(2, "big")
        for topic in packet.topics:
            body += _string(topic)
        return _with_header(UNSUBSCRIBE, 0x02, body)
    if isinstance(packet, Unsuback):
        return _with_header(UNSUBACK, 0, packet.packet_id.to_bytes(2, "big"))
    if isinstance(packet, Pingreq):
        return _with_header(PINGREQ, 0, b"")
    if isinstance(packet, Pingresp):
        return _with_header(PINGRESP, 0, b"")
    if isinstance(packet, Disconnect):
        return _with_header(DISCONNECT, 0, b"")
    raise ProtocolError(f"cannot encode {type(packet).__name__}")


def _with_header(ptype: int, flags: int, body: bytes) -> bytes:
    return bytes([(ptype << 4) | flags]) + _encode_remaining_length(len(body)) + body


def _encode_connect(p: Connect) -> bytes:
    flags = 0
    if p.clean_session:
        flags |= 0x02
    if p.will_topic is not None:
        flags |= 0x04 | (p.will_qos << 3)
        if p.will_retain:
            flags |= 0x20
    if p.password is not None:
        flags |= 0x40
    if p.username is not None:
        flags |= 0x80
    body = _string("MQTT") + bytes([4, flags]) + p.keep_alive.to_bytes(2, "big")
    body += _string(p.client_id)
    if p.will_topic is not None:
        body += _string(p.will_topic)
        body += len(p.will_payload).to_bytes(2, "big") + p.will_payload
    if p.username is not None:
        body += _string(p.username)
    if p.password is not None:
        body += len(p.password).to_bytes(2, "big") + p.password
    return _with_header(CONNECT, 0, body)


# ---------------------------------------------------------------------------
# decoding


def decode(buffer: bytes) -> tuple[Packet, int]:
    """Decode one packet from the head of ``buffer``.

    Returns (packet, bytes consumed). Raises NeedMoreData when the buffer
    holds only part of a packet, ProtocolError when it can never parse.
    """
    if len(buffer) < 1:
        raise NeedMoreData()
    first = buffer[0]
    ptype = first >> 4
    flags = first & 0x0F
    length, header_len = _decode_remaining_length(buffer, 1)
    total = 1 + header_len + length
    if len(buffer) < total:
        raise NeedMoreData()
    body = buffer[1 + header_len: total]
    packet = _decode_body(ptype, flags, body)
    return packet, total


def _decode_body(ptype: int, flags: int, body: bytes) -> Packet:
    if ptype == CONNECT:
        return _decode_connect(body)
    if ptype == CONNACK:
        if len(body) != 2:
            raise ProtocolError("bad CONNACK length")
        return Connack(session_present=bool(body[0] & 0x01), return_code=body[1])
    if ptype == PUBLISH:
        qos = (flags >> 1) & 0x03
        if qos == 3:
            raise ProtocolError("invalid QoS 3")
        topic, offset = _read_string(body, 0)
        if "\u0000" in topic or "#" in topic or "+" in topic:
            raise ProtocolError(f"invalid publish topic {topic!r}")
        packet_id = None
        if qos > 0:
            packet_id, offset = _read_u16(body, offset)
            if packet_id == 0:
                raise ProtocolError("packet id must be nonzero")
        return Publish(topic=topic, payload=body[offset:], qos=qos,
                       retain=bool(flags & 0x01), dup=bool(flags & 0x08),
                       packet_id=packet_id)
    if ptype == PUBACK:
        pid, _ = _read_u16(body, 0)
        return Puback(pid)
    if ptype == SUBSCRIBE:
        if flags != 0x02:
            raise ProtocolError("SUBSCRIBE flags must be 0b0010")
        pid, offset = _read_u16(body, 0)
        topics: list[tuple[str, int]] = []
        while offset < len(body):
            topic, offset = _read_string(body, offset)
            if offset >= len(body):
                raise ProtocolError("SUBSCRIBE missing QoS byte")
            qos = body[offset]
            offset += 1
            if qos > 2:
                raise ProtocolError("invalid requested QoS")
            topics.append((topic, qos))
        if not topics:
            raise ProtocolError("SUBSCRIBE needs at least one filter")
        return Subscribe(packet_id=pid, topics=topics)
    if ptype == SUBACK:
        pid, offset = _read_u16(body, 0)
        return Suback(packet_id=pid, return_codes=list(body[offset:]))
    if ptype == UNSUBSCRIBE:
        if flags != 0x02:
            raise ProtocolError("UNSUBSCRIBE flags must be 0b0010")
        pid, offset = _read_u16(body, 0)
        topics = []
        while offset < len(body):
            topic, offset = _read_string(body, offset)
            topics.append(topic)
        if not topics:
            raise ProtocolError("UNSUBSCRIBE needs at least one filter")
        return Unsubscribe(packet_id=pid, topics=topics)
    if ptype == UNSUBACK:
        pid, _ = _read_u16(body, 0)
        return Unsuback(pid)
    if ptype == PINGREQ:
        return Pingreq()
    if ptype == PINGRESP:
        return Pingresp()
    if ptype == DISCONNECT:
        return Disconnect()
    raise ProtocolError(f"unsupported packet type {ptype}")


def _decode_connect(body: bytes) -> Connect:
    name, offset = _read_string(body, 0)
    if offset >= len(body):
        raise ProtocolError("truncated CONNECT")
    level = body[offset]
    offset += 1
    if name != "MQTT" or level != 4:
        raise ProtocolError(f"unsupported protocol {name!r} level {level}")
    if offset >= len(body):
        raise ProtocolError("truncated CONNECT flags")
    flags = body[offset]
    offset += 1
    if flags & 0x01:
        raise ProtocolError("CONNECT reserved flag set")
    keep_alive, offset = _read_u16(body, offset)
    client_id, offset = _read_string(body, offset)
    connect = Connect(client_id=client_id, keep_alive=keep_alive,
                      clean_session=bool(flags & 0x02))
    if flags & 0x04:
        connect.will_topic, offset = _read_string(body, offset)
        payload, offset = _read_bytes(body, offset)
        connect.will_payload = payload
        connect.will_qos = (flags >> 3) & 0x03
        connect.will_retain = bool(flags & 0x20)
        if connect.will_qos > 1:
            raise ProtocolError("will QoS 2 unsupported")
    elif flags & 0x38:
        raise ProtocolError("will flags set without will flag")
    if flags & 0x80:
        connect.username, offset = _read_string(body, offset)
    if flags & 0x40:
        connect.password, offset = _read_bytes(body, offset)
    return connect
