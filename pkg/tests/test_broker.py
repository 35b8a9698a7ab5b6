from __future__ import annotations

import os
import socket
import threading
import time

import pytest

from mhub.mqtt import MqttClient, MqttError, codec, start_broker


@pytest.fixture()
def fresh_broker():
    b = start_broker()
    yield b
    b.stop()


def client(broker, client_id, **kwargs) -> MqttClient:
    return MqttClient("127.0.0.1", broker.tcp_port, client_id=client_id, **kwargs).connect()


def test_retained_delivery_on_subscribe(fresh_broker):
    pub = client(fresh_broker, "pub")
    pub.publish("t", b"26.0", retain=True)
    time.sleep(0.1)
    sub = client(fresh_broker, "sub")
    sub.subscribe("t")
    msgs = sub.drain(0.5)
    assert [(m.topic, m.payload, m.retain) for m in msgs] == [("t", b"26.0", True)]
    pub.disconnect()
    sub.disconnect()


def test_live_delivery_not_marked_retained(fresh_broker):
    sub = client(fresh_broker, "sub")
    sub.subscribe("live")
    pub = client(fresh_broker, "pub")
    pub.publish("live", b"x", retain=True)
    msgs = sub.drain(0.5)
    assert [(m.topic, m.retain) for m in msgs] == [("live", False)]


def test_qos1_puback_handshake(fresh_broker):
    pub = client(fresh_broker, "pub")
    pub.publish("q", b"x", qos=1, timeout=2.0)  # raises on missing PUBACK


def test_qos_downgrade_to_subscription(fresh_broker):
    sub = client(fresh_broker, "sub")
    sub.subscribe("d", qos=0)
    pub = client(fresh_broker, "pub")
    pub.publish("d", b"x", qos=1)
    msgs = sub.drain(0.5)
    assert [m.qos for m in msgs] == [0]


def test_retained_clear_with_empty_payload(fresh_broker):
    pub = client(fresh_broker, "pub")
    pub.publish("gone", b"1", retain=True)
    pub.publish("gone", b"", retain=True)
    time.sleep(0.1)
    sub = client(fresh_broker, "sub")
    sub.subscribe("#")
    assert sub.drain(0.3) == []
    assert fresh_broker.retained_snapshot() == {}


def test_retained_store_matches_final_state(fresh_broker):
    pub = client(fresh_broker, "pub")
    operations = [("a", b"1"), ("b", b"2"), ("a", b"3"), ("b", b""), ("c", b"4")]
    for topic, payload in operations:
        pub.publish(topic, payload, retain=True)
    time.sleep(0.15)
    sub = client(fresh_broker, "sub")
    sub.subscribe("#")
    msgs = sub.drain(0.5)
    assert {m.topic: m.payload for m in msgs} == {"a": b"3", "c": b"4"}


def test_wildcard_subscriptions(fresh_broker):
    sub = client(fresh_broker, "sub")
    sub.subscribe("uns/+/x")
    sub.subscribe("deep/#")
    pub = client(fresh_broker, "pub")
    pub.publish("uns/t1/x", b"a")
    pub.publish("uns/t1/y", b"b")
    pub.publish("deep/1/2/3", b"c")
    topics = {m.topic for m in sub.drain(0.5)}
    assert topics == {"uns/t1/x", "deep/1/2/3"}


def test_session_takeover_disconnects_old(fresh_broker):
    first = client(fresh_broker, "same-id")
    second = client(fresh_broker, "same-id")
    time.sleep(0.3)
    assert first._closed.is_set()
    assert not second._closed.is_set()
    assert fresh_broker.session_count() == 1


def test_per_publisher_ordering(fresh_broker):
    sub = client(fresh_broker, "sub")
    sub.subscribe("seq")
    pub = client(fresh_broker, "pub")
    for i in range(50):
        pub.publish("seq", str(i).encode())
    msgs = sub.drain(1.0)
    assert [int(m.payload) for m in msgs] == list(range(50))


def test_keep_alive_timeout_disconnects():
    broker = start_broker()
    try:
        c = MqttClient("127.0.0.1", broker.tcp_port, client_id="lazy", keep_alive=1)
        c.connect()
        c._closed.set()  # silence the ping loop so the client goes quiet
        deadline = time.monotonic() + 4.0
        while time.monotonic() < deadline and broker.session_count() > 0:
            time.sleep(0.1)
        assert broker.session_count() == 0  # dropped at 1.5x keep-alive
    finally:
        broker.stop()


def test_will_published_on_abnormal_disconnect(fresh_broker):
    sub = client(fresh_broker, "watcher")
    sub.subscribe("wills/#")
    doomed = MqttClient("127.0.0.1", fresh_broker.tcp_port, client_id="doomed")
    doomed._sock = socket.create_connection(("127.0.0.1", fresh_broker.tcp_port))
    doomed._sock.sendall(codec.encode(codec.Connect(
        client_id="doomed", will_topic="wills/doomed", will_payload=b"bye")))
    time.sleep(0.2)
    doomed._sock.close()  # no DISCONNECT: abnormal
    msgs = sub.drain(1.0)
    assert [(m.topic, m.payload) for m in msgs] == [("wills/doomed", b"bye")]


def test_graceful_disconnect_suppresses_will(fresh_broker):
    sub = client(fresh_broker, "watcher")
    sub.subscribe("wills/#")
    sock = socket.create_connection(("127.0.0.1", fresh_broker.tcp_port))
    sock.sendall(codec.encode(codec.Connect(client_id="polite", will_topic="wills/polite",
                                            will_payload=b"bye")))
    time.sleep(0.2)
    sock.sendall(codec.encode(codec.Disconnect()))
    sock.close()
    assert sub.drain(0.5) == []


def test_random_bytes_do_not_crash_broker(fresh_broker):
    rng_bytes = os.urandom
    for _ in range(100):
        s = socket.create_connection(("127.0.0.1", fresh_broker.tcp_port))
        try:
            s.sendall(rng_bytes(128))
        finally:
            s.close()
    # broker still serves
    c = client(fresh_broker, "survivor")
    c.publish("alive", b"1", qos=1)


def test_oversized_packet_closes_only_its_connection(fresh_broker):
    fresh_broker.config.max_packet_bytes = 1024
    s = socket.create_connection(("127.0.0.1", fresh_broker.tcp_port))
    s.sendall(codec.encode(codec.Connect(client_id="big")))
    time.sleep(0.1)
    huge = codec.encode(codec.Publish(topic="t", payload=b"z" * 10_000))
    s.sendall(huge)
    time.sleep(0.3)
    assert fresh_broker.session_count() == 0
    c = client(fresh_broker, "ok")
    c.publish("t", b"small", qos=1)


def test_second_connect_is_protocol_violation(fresh_broker):
    s = socket.create_connection(("127.0.0.1", fresh_broker.tcp_port))
    s.sendall(codec.encode(codec.Connect(client_id="dup")))
    time.sleep(0.1)
    s.sendall(codec.encode(codec.Connect(client_id="dup")))
    time.sleep(0.3)
    assert fresh_broker.session_count() == 0


def test_unsubscribe_stops_delivery(fresh_broker):
    sub = client(fresh_broker, "sub")
    sub.subscribe("u")
    sub.unsubscribe("u")
    pub = client(fresh_broker, "pub")
    pub.publish("u", b"x")
    assert sub.drain(0.4) == []


def test_invalid_filter_gets_failure_code(fresh_broker):
    s = socket.create_connection(("127.0.0.1", fresh_broker.tcp_port))
    s.sendall(codec.encode(codec.Connect(client_id="subber")))
    time.sleep(0.1)
    s.sendall(codec.encode(codec.Subscribe(packet_id=1, topics=[("bad/#/filter", 0), ("ok", 1)])))
    time.sleep(0.3)
    buf = s.recv(4096)
    packets = []
    while buf:
        pkt, n = codec.decode(buf)
        packets.append(pkt)
        buf = buf[n:]
    suback = [p for p in packets if isinstance(p, codec.Suback)][0]
    assert suback.return_codes == [0x80, 1]
    s.close()


# -- WebSocket transport --------------------------------------------------------


def test_websocket_transport_mqtt_subprotocol(fresh_broker):
    from websockets.sync.client import connect as ws_connect

    ws = ws_connect(f"ws://127.0.0.1:{fresh_broker.ws_port}/", subprotocols=["mqtt"])
    assert ws.subprotocol == "mqtt"
    ws.send(codec.encode(codec.Connect(client_id="wsc")))
    pkt, _ = codec.decode(ws.recv(timeout=3))
    assert isinstance(pkt, codec.Connack) and pkt.return_code == 0
    # subscribe over ws, publish over tcp, receive over ws
    ws.send(codec.encode(codec.Subscribe(packet_id=1, topics=[("wst", 0)])))
    pkt, _ = codec.decode(ws.recv(timeout=3))
    assert isinstance(pkt, codec.Suback)
    tcp = client(fresh_broker, "tcp-pub")
    tcp.publish("wst", b"over-ws")
    pkt, _ = codec.decode(ws.recv(timeout=3))
    assert isinstance(pkt, codec.Publish) and pkt.payload == b"over-ws"
    ws.close()


def test_concurrent_publishers_all_delivered(fresh_broker):
    sub = client(fresh_broker, "sub")
    sub.subscribe("main/#")

    def blast(name):
        c = client(fresh_broker, name)
        for i in range(20):
            c.publish(f"main/{name}", str(i).encode())
        c.disconnect()

    threads = [threading.Thread(target=blast, args=(f"p{i}",)) for i in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    msgs = sub.drain(1.5)
    assert len(msgs) == 80
    # per-publisher ordering holds even under concurrency
    for name in ("p0", "p1", "p2", "p3"):
        seq = [int(m.payload) for m in msgs if m.topic == f"main/{name}"]
        assert seq == sorted(seq)
