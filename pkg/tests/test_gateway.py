from __future__ import annotations

import json
import socket
import threading

import pytest

from ringside import analytics
from ringside.audit import verify_file
from ringside.core import Interval
from ringside.errors import (
    NotPending,
    SessionClosed,
    UnknownEvent,
    UnknownMatch,
    UnknownScope,
    ValidationFailed,
)
from ringside.gateway import GatewayCore, serve
from ringside.replay import SimConfig, generate_synthetic
from ringside.wire import event_to_dict


@pytest.fixture
def core(engine_config, tmp_path) -> GatewayCore:
    return GatewayCore(engine_config, audit_dir=tmp_path / "audit")


def make_events(gen4_config, count=10, borderline=0.4, seed=11, match_id="M1"):
    return generate_synthetic(
        SimConfig(seed=seed),
        duration_s=120.0,
        fusion=gen4_config,
        borderline_fraction=borderline,
        count=count,
        match_id=match_id,
    )


class TestIngest:
    def test_ack_carries_event_id(self, core, gen4_config):
        core.open_match("M1")
        event = make_events(gen4_config, count=1)[0]
        ack = core.ingest("M1", event_to_dict(event))
        assert ack["event_id"] == event.event_id
        assert ack["verdict"]["action"] in ("auto_award", "review_required")

    def test_unknown_match(self, core, gen4_config):
        event = make_events(gen4_config, count=1)[0]
        with pytest.raises(SessionClosed):
            core.ingest("NOPE", event_to_dict(event))

    def test_duplicate_event_id(self, core, gen4_config):
        core.open_match("M1")
        event = make_events(gen4_config, count=1)[0]
        core.ingest("M1", event_to_dict(event))
        with pytest.raises(ValidationFailed):
            core.ingest("M1", event_to_dict(event))


class TestReviewQueue:
    def test_empty_queue(self, core):
        core.open_match("M1")
        assert core.review_queue("M1") == []

    def test_unknown_match(self, core):
        with pytest.raises(UnknownMatch):
            core.review_queue("M1")

    def test_borderline_event_carries_explanation(self, core, gen4_config):
        core.open_match("M1")
        for event in make_events(gen4_config, count=8, borderline=1.0):
            core.ingest("M1", event_to_dict(event))
        items = core.review_queue("M1")
        assert items, "borderline events must queue for review"
        for item in items:
            assert "impact lower bound" in item["explanation"]
            assert "below threshold" in item["explanation"]
            assert item["impact_lo"] < 65.0 <= item["impact_hi"]
            assert item["t_w"] == 65.0

    def test_ordered_by_event_time(self, core, gen4_config):
        core.open_match("M1")
        for event in make_events(gen4_config, count=10, borderline=1.0):
            core.ingest("M1", event_to_dict(event))
        items = core.review_queue("M1")
        times = [item["t_event"] for item in items]
        assert times == sorted(times)

    def test_override_removes_item(self, core, gen4_config):
        core.open_match("M1")
        for event in make_events(gen4_config, count=5, borderline=1.0):
            core.ingest("M1", event_to_dict(event))
        items = core.review_queue("M1")
        target = items[0]["event_id"]
        core.submit_override(target, "confirm", reviewer="jury1")
        remaining = {item["event_id"] for item in core.review_queue("M1")}
        assert target not in remaining
        assert len(remaining) == len(items) - 1


class TestSubmitOverride:
    def setup_queue(self, core, gen4_config, n=4):
        core.open_match("M1")
        for event in make_events(gen4_config, count=n, borderline=1.0):
            core.ingest("M1", event_to_dict(event))
        return [item["event_id"] for item in core.review_queue("M1")]

    def test_confirm_flow(self, core, gen4_config):
        ids = self.setup_queue(core, gen4_config)
        result = core.submit_override(ids[0], "confirm", reviewer="jury1")
        assert result["decision_flow"] == "human_confirm"
        assert result["final_label"] == "no_award"

    def test_override_flow(self, core, gen4_config):
        ids = self.setup_queue(core, gen4_config)
        result = core.submit_override(ids[0], "override", reviewer="ref2", label="no_point")
        assert result["decision_flow"] == "human_override"
        assert result["final_label"] == "no_point"

    def test_override_to_point_updates_scores(self, core, gen4_config):
        ids = self.setup_queue(core, gen4_config)
        before = core.metrics_snapshot("M1")["scores"]
        core.submit_override(ids[0], "override", reviewer="ref2", label="point_awarded")
        after = core.metrics_snapshot("M1")["scores"]
        assert sum(after.values()) > sum(before.values())

    def test_double_submission_rejected(self, core, gen4_config):
        ids = self.setup_queue(core, gen4_config)
        core.submit_override(ids[0], "confirm", reviewer="jury1")
        with pytest.raises(NotPending):
            core.submit_override(ids[0], "confirm", reviewer="jury1")
        with pytest.raises(NotPending):
            core.submit_override(ids[0], "override", reviewer="ref", label="no_point")

    def test_unknown_event(self, core):
        core.open_match("M1")
        with pytest.raises(UnknownEvent):
            core.submit_override("ghost", "confirm", reviewer="jury1")

    def test_exactly_once_under_concurrency(self, core, gen4_config):
        ids = self.setup_queue(core, gen4_config, n=3)
        target = ids[0]
        outcomes = []

        def submit():
            try:
                outcomes.append(core.submit_override(target, "confirm", reviewer="x"))
            except NotPending:
                outcomes.append(None)

        threads = [threading.Thread(target=submit) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert sum(1 for o in outcomes if o is not None) == 1


class TestMetricsSnapshot:
    def test_fresh_match_nulls(self, core):
        core.open_match("M1")
        snapshot = core.metrics_snapshot("M1")
        assert snapshot["agreement"] is None
        assert snapshot["kappa"] is None
        assert snapshot["latency_mean_ms"] is None
        assert snapshot["event_distribution"] is None
        assert snapshot["events_total"] == 0

    def test_unknown_scope(self, core):
        with pytest.raises(UnknownScope):
            core.metrics_snapshot("nope")

    def test_values_equal_analytics_outputs(self, core, gen4_config, engine_config):
        core.open_match("M1")
        for event in make_events(gen4_config, count=30, borderline=0.3, seed=5):
            core.ingest("M1", event_to_dict(event))
        for item in core.review_queue("M1"):
            core.submit_override(item["event_id"], "confirm", reviewer="jury")
        snapshot = core.metrics_snapshot("M1")

        log = core._matches["M1"].engine.match_log()
        pairs = [
            (r.y_true, "point_awarded" if r.y_hat.startswith("award:") else "no_action")
            for r in log.records
        ]
        assert snapshot["agreement"] == pytest.approx(analytics.agreement_rate(pairs))
        assert snapshot["kappa"] == pytest.approx(analytics.cohens_kappa(pairs))
        labels, probs = analytics.event_distribution(log)
        assert snapshot["event_distribution"]["labels"] == list(labels)
        assert snapshot["event_distribution"]["probs"] == pytest.approx(list(probs))
        kicks = [k for k, _ in core._matches["M1"].engine.latency_pairs()]
        scores = [s for _, s in core._matches["M1"].engine.latency_pairs()]
        _, mean_latency = analytics.scoring_latency(kicks, scores)
        assert snapshot["latency_mean_ms"] == pytest.approx(mean_latency)

    def test_event_filter_restricts_distribution(self, core, gen4_config):
        core.open_match("M1")
        for event in make_events(gen4_config, count=30, seed=6, borderline=0.0):
            core.ingest("M1", event_to_dict(event))
        snapshot = core.metrics_snapshot("M1", filters={"event": "head_kick"})
        dist = snapshot["event_distribution"]
        assert dist["labels"] == ["head_kick"]
        assert dist["probs"] == [1.0]

    def test_global_scope_merges(self, core, gen4_config):
        core.open_match("M1")
        core.open_match("M2")
        for event in make_events(gen4_config, count=5, seed=7, match_id="A"):
            core.ingest("M1", event_to_dict(event))
        for event in make_events(gen4_config, count=5, seed=8, match_id="B"):
            core.ingest("M2", event_to_dict(event))
        snapshot = core.metrics_snapshot("global")
        assert snapshot["events_total"] == 10


class TestRestart:
    def test_restore_reproduces_queue_and_scores(self, engine_config, gen4_config, tmp_path):
        audit_dir = tmp_path / "audit"
        core1 = GatewayCore(engine_config, audit_dir=audit_dir)
        core1.open_match("M1")
        for event in make_events(gen4_config, count=20, borderline=0.5, seed=13):
            core1.ingest("M1", event_to_dict(event))
        queue1 = core1.review_queue("M1")
        core1.submit_override(queue1[0]["event_id"], "confirm", reviewer="jury")
        queue1 = core1.review_queue("M1")
        scores1 = core1.metrics_snapshot("M1")["scores"]

        core2 = GatewayCore(engine_config, audit_dir=audit_dir)
        core2.open_match("M1")
        queue2 = core2.review_queue("M1")
        scores2 = core2.metrics_snapshot("M1")["scores"]

        assert scores2 == scores1
        assert [i["event_id"] for i in queue2] == [i["event_id"] for i in queue1]
        for a, b in zip(queue1, queue2):
            assert b["explanation"] == a["explanation"]
            assert b["impact_lo"] == a["impact_lo"]
            assert b["impact_hi"] == a["impact_hi"]
            assert b["p_lo"] == a["p_lo"]
            assert b["p_hi"] == a["p_hi"]
            assert b["band"] == a["band"]

    def test_audit_export_verifies(self, core, gen4_config):
        core.open_match("M1")
        for event in make_events(gen4_config, count=10, borderline=0.3, seed=14):
            core.ingest("M1", event_to_dict(event))
        export = core.audit_export("M1")
        assert export["verified"] is True
        assert len(export["lines"]) >= 10

    def test_audit_export_detects_tampering(self, core, gen4_config, tmp_path):
        core.open_match("M1")
        for event in make_events(gen4_config, count=6, seed=15):
            core.ingest("M1", event_to_dict(event))
        path = core._matches["M1"].audit_path
        lines = path.read_text().splitlines()
        forged = json.loads(lines[-1])
        forged["y_hat"] = "award:EVIL:99"
        lines[-1] = json.dumps(forged, separators=(",", ":"))
        path.write_text("\n".join(lines) + "\n")
        export = core.audit_export("M1")
        assert export["verified"] is False
        assert verify_file(path).ok is False


class NdjsonClient:
    def __init__(self, host, port):
        self.sock = socket.create_connection((host, port))
        self.fh = self.sock.makefile("rwb")
        self.seq = 0
        self.last_server_seq = 0

    def call(self, kind, payload):
        self.seq += 1
        self.fh.write(json.dumps({"kind": kind, "payload": payload, "seq": self.seq}).encode() + b"\n")
        self.fh.flush()
        return self.read()

    def read(self):
        message = json.loads(self.fh.readline())
        assert message["seq"] > self.last_server_seq, "server seq must strictly increase"
        self.last_server_seq = message["seq"]
        return message

    def close(self):
        self.sock.close()


class TestNdjsonServer:
    def test_full_session_over_tcp(self, engine_config, gen4_config, tmp_path):
        core = GatewayCore(
            engine_config,
            audit_dir=tmp_path / "audit",
            tokens={"tok-jury": "jury", "tok-obs": "observer"},
        )
        server = serve(core, port=0)
        try:
            client = NdjsonClient("127.0.0.1", server.port)
            hello = client.call("hello", {"token": "tok-jury"})
            assert hello["payload"]["role"] == "jury"
            assert client.call("open_match", {"match_id": "M1"})["kind"] == "ack"

            events = make_events(gen4_config, count=6, borderline=1.0, seed=19)
            for event in events:
                ack = client.call("ingest", {"match_id": "M1", "event": event_to_dict(event)})
                assert ack["kind"] == "ack"

            queue = client.call("review_queue", {"match_id": "M1"})
            items = queue["payload"]["items"]
            assert len(items) == 6

            result = client.call(
                "submit_override",
                {"event_id": items[0]["event_id"], "action": "confirm", "reviewer": "j1"},
            )
            assert result["payload"]["final_label"] == "no_award"

            metrics = client.call("metrics_snapshot", {"scope": "M1"})
            assert metrics["payload"]["pending_reviews"] == 5

            export = client.call("audit_export", {"match_id": "M1"})
            assert export["payload"]["verified"] is True
            client.close()
        finally:
            server.shutdown()

    def test_observer_cannot_override(self, engine_config, gen4_config, tmp_path):
        core = GatewayCore(
            engine_config, audit_dir=tmp_path / "audit", tokens={"tok-obs": "observer"}
        )
        server = serve(core, port=0)
        try:
            client = NdjsonClient("127.0.0.1", server.port)
            client.call("hello", {"token": "tok-obs"})
            client.call("open_match", {"match_id": "M1"})
            response = client.call(
                "submit_override", {"event_id": "x", "action": "confirm", "reviewer": "o"}
            )
            assert response["kind"] == "error"
            assert response["payload"]["code"] == "Forbidden"
            client.close()
        finally:
            server.shutdown()

    def test_feed_broadcasts_review_items(self, engine_config, gen4_config, tmp_path):
        core = GatewayCore(engine_config, audit_dir=tmp_path / "audit")
        server = serve(core, port=0)
        try:
            watcher = NdjsonClient("127.0.0.1", server.port)
            watcher.call("subscribe", {})

            actor = NdjsonClient("127.0.0.1", server.port)
            actor.call("open_match", {"match_id": "M1"})
            event = make_events(gen4_config, count=1, borderline=1.0, seed=23)[0]
            actor.call("ingest", {"match_id": "M1", "event": event_to_dict(event)})

            pushed = watcher.read()
            assert pushed["kind"] == "review_item"
            assert pushed["payload"]["event_id"] == event.event_id
            watcher.close()
            actor.close()
        finally:
            server.shutdown()

    def test_stale_client_seq_rejected(self, engine_config, tmp_path):
        core = GatewayCore(engine_config, audit_dir=tmp_path / "audit")
        server = serve(core, port=0)
        try:
            client = NdjsonClient("127.0.0.1", server.port)
            client.call("open_match", {"match_id": "M1"})
            client.seq = 0  # rewind: next message reuses seq 1
            response = client.call("open_match", {"match_id": "M2"})
            assert response["kind"] == "error"
            client.close()
        finally:
            server.shutdown()
