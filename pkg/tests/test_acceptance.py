"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines
as they complete; tolerances are fixed here, not configurable.
"""
from __future__ import annotations

import io
import json
import math
import os
import random
import socket
import time
import urllib.request
from contextlib import redirect_stdout

import pytest

from conftest import LISTING1_CSV, LISTING2_JSON, corpus_paths, flatten_class


def report(number: int, description: str):
    """Prints the criterion verdict; FAIL prints before the assertion surfaces."""

    class _Reporter:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            verdict = "PASS" if exc_type is None else "FAIL"
            print(f"[{verdict}] criterion {number}: {description}", flush=True)
            return False

    return _Reporter()


# -- 1 ---------------------------------------------------------------------------


def test_criterion_1_listing_round_trip():
    with report(1, "listing round-trip: CSV/JSON -> Modelica -> instance values, < 1 s"):
        from mhub.adapters import adapt_csv, adapt_json
        from mhub.frontend import Instantiator, build_class_tree
        from mhub.syntax import parse

        started = time.monotonic()
        frag = adapt_csv(LISTING1_CSV, "acme/engine/MassBudget.csv")
        _tree, diags = parse(frag.modelica_text, frag.provenance_uri)
        assert diags == []

        ctree, cdiags = build_class_tree([(frag.ast, frag.provenance_uri)])
        assert not cdiags
        inst = Instantiator(ctree)
        itree = inst.instantiate("acme.engine.MassBudget")
        assert not inst.diags
        root = itree.root.child("root")
        assert root.dimensions == (2,)
        rows = [tuple(c.evaluated for c in root.child(f"root[{i}]").children)
                for i in (1, 2)]
        assert rows[0] == ("Payload", 18.2, 7.8, 26.0)
        assert rows[1] == ("Structure", 16.1, 6.9, 23.0)

        frag_json = adapt_json(LISTING2_JSON, "acme/engine/MassBudget.json")
        jtree, _ = build_class_tree([(frag_json.ast, frag_json.provenance_uri)])
        j_itree = Instantiator(jtree).instantiate("acme.engine.MassBudget")

        def shape(node):
            # equality up to Integer-vs-Real typing of integral columns
            value = node.evaluated
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                value = float(value)
            return (node.name, value if node.is_leaf() else None,
                    [shape(c) for c in node.children])

        assert shape(itree.root) == shape(j_itree.root)
        assert time.monotonic() - started < 1.0


# -- 2 ---------------------------------------------------------------------------


def test_criterion_2_parser_totality_and_round_trip():
    with report(2, "parser totality on 10^4 fuzz inputs + corpus round-trip, < 2 min"):
        from mhub.syntax import lower, parse, print_stored_definition

        started = time.monotonic()
        corpus = []
        for path in corpus_paths():
            with open(path, encoding="utf-8") as fh:
                corpus.append(fh.read())
        assert len(corpus) >= 40, "corpus must hold at least 40 Modelica files"

        # round-trip identity over the corpus
        for i, src in enumerate(corpus):
            tree, diags = parse(src, f"c{i}")
            assert not diags, (corpus_paths()[i], diags)
            stored, lds = lower(tree, f"c{i}")
            assert not lds
            printed = print_stored_definition(stored)
            tree2, d2 = parse(printed, f"c{i}r")
            stored2, ld2 = lower(tree2, f"c{i}r")
            assert not d2 and not ld2
            assert stored2 == stored, corpus_paths()[i]

        # fuzz: random bytes, token soup, and corpus mutations; parse never raises
        rng = random.Random(0xACCE97)
        tokens = ["model", "end", "Real", "parameter", "equation", "der", "(", ")",
                  "{", "}", "[", "]", ";", ",", "=", ":=", "+", "-", "*", "/", "^",
                  "if", "then", "else", "for", "loop", "when", "connect", "x", "y",
                  "1", "2.5", '"s"', "'q'", "//c", "/*b*/", "\n", " ", "annotation"]
        checked = 0
        while checked < 10_000:
            mode = checked % 3
            if mode == 0:
                n = rng.randint(0, 512) if checked % 50 else rng.randint(0, 65_536)
                text = bytes(rng.getrandbits(8) for _ in range(n)).decode(
                    "utf-8", errors="replace")
            elif mode == 1:
                text = " ".join(rng.choice(tokens)
                                for _ in range(rng.randint(0, 200)))
            else:
                base = rng.choice(corpus)
                a = rng.randrange(0, len(base) + 1)
                b = rng.randrange(a, min(len(base), a + 80) + 1)
                insert = rng.choice(tokens) * rng.randint(0, 3)
                text = base[:a] + insert + base[b:]
            text = text[:65_536]
            tree, _diags = parse(text, "fuzz")
            assert tree.reconstructed_text() == text
            checked += 1
        elapsed = time.monotonic() - started
        assert elapsed < 120, f"criterion 2 took {elapsed:.1f}s"


# -- 3 ---------------------------------------------------------------------------


def test_criterion_3_flattening_oracle():
    with report(3, ">=20 hand-derived flat results match; connect sets n-1 + 1 zero-sum"):
        from test_flatten import ORACLE_CASES, test_connect_set_shape_property, test_flatten_oracle

        assert len(ORACLE_CASES) >= 20
        for index in range(len(ORACLE_CASES)):
            test_flatten_oracle(index)
        test_connect_set_shape_property()


# -- 4 ---------------------------------------------------------------------------


def test_criterion_4_entailment_closure():
    with report(4, "closure equals brute-force oracle on 100 random DAGs; idempotent, < 30 s"):
        from mhub.kgraph import ENTAILED, GraphStore, Triple, materialize_entailments, vocab
        from test_kgraph import brute_force_reachability, random_dag

        started = time.monotonic()
        rng = random.Random(20260808)
        for case in range(100):
            n = rng.randint(2, 100)
            density = rng.choice([0.01, 0.03, 0.1, 0.2])
            edges = random_dag(rng, n, density)
            store = GraphStore()
            for src, targets in edges.items():
                for dst in targets:
                    store.add(Triple(vocab.class_iri(f"N{src}"), vocab.EXTENDS,
                                     vocab.class_iri(f"N{dst}")))
            materialize_entailments(store)
            got = {(int(t.subject.value.rsplit("/N", 1)[-1]),
                    int(t.object.value.rsplit("/N", 1)[-1]))
                   for t in store.graph(ENTAILED)
                   if t.predicate == vocab.EXTENDS_TRANSITIVE}
            assert got == brute_force_reachability(edges, n), f"case {case}"
            assert materialize_entailments(store) == 0, "second run must add nothing"
        elapsed = time.monotonic() - started
        assert elapsed < 30, f"criterion 4 took {elapsed:.1f}s"


# -- 5 ---------------------------------------------------------------------------


def test_criterion_5_sparql_fixture():
    with report(5, "mass-budget query: 2 rows, Payload first under DESC; superclasses {B, C}"):
        from mhub.kgraph import materialize_entailments, query
        from test_kgraph import chain_store, listing_graph
        from test_sparql import MASS_BUDGET_QUERY, MO

        store = listing_graph()
        result = query(store, MASS_BUDGET_QUERY)
        assert len(result.rows) == 2
        assert result.rows[0]["subsystem"].lexical == "Payload"
        assert float(result.rows[0]["budgetMass"].lexical) == 26.0

        chain = chain_store()
        materialize_entailments(chain)
        supers = query(chain, MO + "SELECT ?sup WHERE { <https://modelihub.example/c/M> "
                       "mo:extendsTransitive ?sup }")
        names = {row["sup"].value.rsplit("/", 1)[-1] for row in supers.rows}
        assert names == {"B", "C"}


# -- 6 ---------------------------------------------------------------------------


def test_criterion_6_twin_numerics():
    with report(6, "RK4: |x(1)-e^-1| < 1e-6; halving h improves by 12-20x; bit-identical"):
        from mhub.twin import causalize, simulate

        sched = causalize(flatten_class(
            "model Decay Real x(start = 1); equation der(x) = -x; end Decay;", "Decay"))
        x_h = simulate(sched, 100, 0.01)[-1]["x"]
        assert abs(x_h - math.exp(-1)) < 1e-6

        x_h2 = simulate(sched, 200, 0.005)[-1]["x"]
        ratio = abs(x_h - math.exp(-1)) / abs(x_h2 - math.exp(-1))
        assert 12 <= ratio <= 20, f"convergence ratio {ratio:.2f}"

        run_a = simulate(sched, 500, 0.01)
        run_b = simulate(sched, 500, 0.01)
        assert all(a == b for a, b in zip(run_a, run_b)), "runs must be bit-identical"


# -- 7 ---------------------------------------------------------------------------


def test_criterion_7_real_time_pacing():
    with report(7, "rtFactor=1: 5 s of sim time in 5.0 +/- 0.25 s wall; overruns published"):
        from mhub.mqtt import MqttClient, start_broker
        from mhub.twin import TwinManager, TwinSpec

        broker = start_broker()
        try:
            manager = TwinManager(
                lambda rc: flatten_class(
                    "model Decay Real x(start = 1); equation der(x) = -x; end Decay;", rc),
                broker_host="127.0.0.1", broker_port=broker.tcp_port)
            spec = TwinSpec(id="paced", root_class="Decay", step_size=0.01,
                            rt_factor=1.0, publish_every=10,
                            broker_host="127.0.0.1", broker_port=broker.tcp_port)
            twin = manager.deploy(spec)
            started = time.monotonic()
            manager.start("paced")
            observed_sim = 0.0
            while time.monotonic() - started < 7.0:
                observed_sim = twin.sim_time
                if observed_sim >= 5.0:
                    break
                time.sleep(0.001)
            elapsed = time.monotonic() - started
            manager.stop("paced")
            assert observed_sim >= 5.0, f"only reached t={observed_sim}"
            assert observed_sim <= 5.0 + 0.01 + 1e-9, \
                f"simTime {observed_sim} more than one step past 5.0"
            assert 4.75 <= elapsed <= 5.25, f"wall time {elapsed:.3f}s outside 5.0 +/- 0.25"

            obs = MqttClient("127.0.0.1", broker.tcp_port).connect()
            obs.subscribe("uns/paced/$status")
            status = [json.loads(m.payload) for m in obs.drain(0.5)]
            assert status and "overruns" in status[0]
            manager.undeploy("paced")
        finally:
            broker.stop()


# -- 8 ---------------------------------------------------------------------------


def test_criterion_8_uns_contract():
    with report(8, "retained completeness; QoS1 write lands in the next sample; "
                   "undeploy clears retained topics"):
        from mhub.mqtt import MqttClient, start_broker
        from mhub.twin import TwinManager, TwinSpec

        broker = start_broker()
        try:
            src = ("model Pair parameter Real k = 1; Real x(start = 5); Real y; "
                   "equation der(x) = 0; y = k * x; end Pair;")
            manager = TwinManager(lambda rc: flatten_class(src, rc),
                                  broker_host="127.0.0.1", broker_port=broker.tcp_port)
            spec = TwinSpec(id="uns-t", root_class="Pair", step_size=0.01,
                            rt_factor=20.0, publish_every=2,
                            broker_host="127.0.0.1", broker_port=broker.tcp_port)
            manager.deploy(spec)
            manager.start("uns-t")
            time.sleep(0.3)  # at least one publish cycle

            fresh = MqttClient("127.0.0.1", broker.tcp_port).connect()
            fresh.subscribe("uns/uns-t/#")
            retained = [m for m in fresh.drain(0.6) if m.retain]
            assert {m.topic for m in retained} == {
                "uns/uns-t/x", "uns/uns-t/y", "uns/uns-t/k", "uns/uns-t/$status"}
            assert len(retained) == 4, "exactly one retained message per topic"

            # QoS 1 write: reflected in the very next published sample
            watcher = MqttClient("127.0.0.1", broker.tcp_port).connect()
            watcher.subscribe("uns/uns-t/x")
            watcher.drain(0.3)
            writer = MqttClient("127.0.0.1", broker.tcp_port).connect()
            writer.publish("uns/uns-t/x/set", json.dumps({"v": 10}), qos=1)
            samples = []
            deadline = time.monotonic() + 3.0
            while time.monotonic() < deadline and len(samples) < 12:
                samples.extend(json.loads(m.payload)["v"]
                               for m in watcher.drain(0.2) if not m.retain)
                if 10.0 in samples:
                    break
            assert 10.0 in samples, f"write never visible; saw {samples[:8]}"
            first_ten = samples.index(10.0)
            assert all(v == 10.0 for v in samples[first_ten:]), \
                "write must apply atomically at a step boundary"

            manager.stop("uns-t")
            manager.undeploy("uns-t")
            time.sleep(0.3)
            post = MqttClient("127.0.0.1", broker.tcp_port).connect()
            post.subscribe("uns/uns-t/#")
            assert post.drain(0.5) == [], "undeploy must clear all retained topics"
        finally:
            broker.stop()


# -- 9 ---------------------------------------------------------------------------


def test_criterion_9_broker_conformance():
    with report(9, "topicMatch 10^5 random cases; retained/PUBACK/takeover/keep-alive; "
                   "fuzz safe, < 1 min"):
        from mhub.mqtt import MqttClient, codec, start_broker, topic_match
        from test_topic_match import reference_match, _random_levels
        from mhub.mqtt.matching import FilterError, validate_filter, validate_topic

        started = time.monotonic()
        rng = random.Random(0xB20CE2)
        checked = 0
        while checked < 100_000:
            f = _random_levels(rng, wildcards=True)
            t = _random_levels(rng, wildcards=False)
            try:
                validate_filter(f)
                validate_topic(t)
            except FilterError:
                continue
            assert topic_match(f, t) == reference_match(f, t), (f, t)
            checked += 1

        broker = start_broker()
        try:
            # retained delivery
            pub = MqttClient("127.0.0.1", broker.tcp_port, client_id="p").connect()
            pub.publish("conf/t", b"26.0", retain=True)
            sub = MqttClient("127.0.0.1", broker.tcp_port, client_id="s").connect()
            sub.subscribe("conf/t")
            msgs = sub.drain(0.5)
            assert [(m.payload, m.retain) for m in msgs] == [(b"26.0", True)]

            # PUBACK handshake (publish() raises on a missing ack)
            pub.publish("conf/q", b"x", qos=1, timeout=2.0)

            # session takeover
            first = MqttClient("127.0.0.1", broker.tcp_port, client_id="same").connect()
            second = MqttClient("127.0.0.1", broker.tcp_port, client_id="same").connect()
            time.sleep(0.3)
            assert first._closed.is_set() and not second._closed.is_set()

            # keep-alive timeout at 1.5x silence
            quiet = MqttClient("127.0.0.1", broker.tcp_port, client_id="quiet",
                               keep_alive=1)
            quiet.connect()
            quiet._closed.set()  # suppress pings
            deadline = time.monotonic() + 4.0
            while time.monotonic() < deadline:
                with broker._lock:
                    if "quiet" not in broker.sessions:
                        break
                time.sleep(0.05)
            with broker._lock:
                assert "quiet" not in broker.sessions

            # random-byte fuzz on the TCP port never crashes the broker
            for _ in range(200):
                s = socket.create_connection(("127.0.0.1", broker.tcp_port))
                s.sendall(bytes(rng.getrandbits(8) for _ in range(rng.randint(1, 256))))
                s.close()
            survivor = MqttClient("127.0.0.1", broker.tcp_port, client_id="alive").connect()
            survivor.publish("conf/alive", b"1", qos=1)
        finally:
            broker.stop()
        elapsed = time.monotonic() - started
        assert elapsed < 60, f"criterion 9 took {elapsed:.1f}s"


# -- 10 --------------------------------------------------------------------------


def test_criterion_10_api_cli_parity(tmp_path):
    with report(10, "every /api endpoint matches the corresponding CLI output"):
        from mhub.cli import main as cli_main
        from mhub.service import ServerConfig, Service

        root = tmp_path / "ws"
        (root / "acme" / "engine").mkdir(parents=True)
        (root / "acme" / "engine" / "MassBudget.csv").write_bytes(LISTING1_CSV)
        (root / "Decay.mo").write_text(
            "model Decay Real x(start = 1);\nequation\n  der(x) = -x;\nend Decay;\n")
        (root / "docs").mkdir()
        (root / "docs" / "page.md").write_text(
            "Total {{ acme.engine.MassBudget:sum(root.budgetMass) }}\n")
        query_file = root / "q.rq"
        query_file.write_text(
            "PREFIX mo: <https://modelihub.example/mo#>\n"
            "SELECT ?n WHERE { ?s mo:name ?n } ORDER BY ?n LIMIT 4\n")

        def cli(argv) -> dict:
            out = io.StringIO()
            with redirect_stdout(out):
                code = cli_main([str(a) for a in argv])
            assert code == 0, out.getvalue()
            return json.loads(out.getvalue())

        svc = Service(ServerConfig(http_port=0, workspace_root=str(root),
                                   mqtt_port=0, ws_port=0))
        svc.start()
        try:
            svc.hub.rescan()
            base = f"http://127.0.0.1:{svc.http_port}"

            def api(method, path, body=None):
                data = json.dumps(body).encode() if body is not None else None
                req = urllib.request.Request(base + path, data=data, method=method,
                                             headers={"Content-Type": "application/json"})
                with urllib.request.urlopen(req, timeout=10) as resp:
                    raw = resp.read()
                    return json.loads(raw) if raw else None

            assert cli(["check", root]) == api("POST", "/api/scan")
            assert cli(["graph", "query", query_file, "--dir", root]) == \
                api("POST", "/api/query", {"sparql": query_file.read_text()})
            assert cli(["view", "composition", "acme.engine.MassBudget",
                        "--depth", "2", "--dir", root]) == \
                api("GET", "/api/views/composition?root=acme.engine.MassBudget&depth=2")
            assert cli(["view", "specialization", "Decay", "--dir", root]) == \
                api("GET", "/api/views/specialization?class=Decay")
            assert cli(["view", "table", query_file, "--dir", root]) == \
                api("POST", "/api/views/table", {"sparql": query_file.read_text()})
            assert cli(["view", "kb", "docs/page.md", "--dir", root]) == \
                api("GET", "/api/kb/docs/page.md")

            # twin endpoints: the CLI is a client of the API; outputs must agree
            assert cli(["twin", "deploy", "--id", "par", "--class", "Decay",
                        "--rt-factor", "20", "--publish-every", "2",
                        "--api", base]) == {"id": "par"}
            assert cli(["twin", "list", "--api", base]) == api("GET", "/api/twins")
            assert cli(["twin", "start", "par", "--api", base]) == {"state": "running"}
            time.sleep(0.1)
            # simTime advances between calls while running: compare stable fields
            stable = lambda rows: [  # noqa: E731
                {k: v for k, v in row.items() if k not in ("simTime", "overruns")}
                for row in rows]
            assert stable(cli(["twin", "list", "--api", base])) == \
                stable(api("GET", "/api/twins"))
            assert cli(["twin", "stop", "par", "--api", base]) == {"state": "stopped"}
            assert cli(["twin", "list", "--api", base]) == api("GET", "/api/twins")
            assert cli(["twin", "undeploy", "par", "--api", base]) == \
                {"id": "par", "undeployed": True}
            assert api("GET", "/api/twins") == []
        finally:
            svc.stop()
