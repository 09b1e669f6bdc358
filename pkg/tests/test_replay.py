from __future__ import annotations

import json

import pytest

from ringside.core import frames_to_ms
from ringside.errors import InvalidArgument, ParseError
from ringside.fusion import fuse_interval
from ringside.replay import NoiseModel, SimConfig, generate_synthetic, replay
from ringside.wire import event_to_dict, stream_digest

SAMPLE_LINE = (
    '{"match_id":"WT2025_Cadet_042","athlete_id":"KOR_A123","event":"head_kick",'
    '"start_frame":110,"end_frame":135,"hit_valid":true,"ref_verdict":"point_awarded"}'
)


class TestReplay:
    def test_single_record_file(self, tmp_path):
        path = tmp_path / "match.jsonl"
        path.write_text(SAMPLE_LINE + "\n")
        events = []
        summary = replay(path, SimConfig(seed=1), events.append)
        assert summary.total_events == 1
        assert summary.counts == {"head_kick": 1}
        assert len(events) == 1
        assert events[0].t_event == frames_to_ms(110, 30) == 3667
        assert events[0].annotation.athlete_id == "KOR_A123"

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        summary = replay(path, SimConfig(seed=1), lambda e: None)
        assert summary.total_events == 0
        assert summary.counts == {}

    def test_determinism_same_seed(self, tmp_path):
        path = tmp_path / "match.jsonl"
        lines = []
        record = json.loads(SAMPLE_LINE)
        for i in range(6):
            record["start_frame"] = 100 + 30 * i
            record["end_frame"] = record["start_frame"] + 20
            record["hit_valid"] = i % 2 == 0
            lines.append(json.dumps(record))
        path.write_text("\n".join(lines) + "\n")

        streams = []
        for _ in range(2):
            events = []
            summary = replay(path, SimConfig(seed=42), events.append)
            streams.append((summary.stream_sha256, [event_to_dict(e) for e in events]))
        assert streams[0][0] == streams[1][0]
        assert streams[0][1] == streams[1][1]

    def test_different_seed_changes_sensors(self, tmp_path):
        path = tmp_path / "match.jsonl"
        path.write_text(SAMPLE_LINE + "\n")
        s1 = replay(path, SimConfig(seed=1), lambda e: None).stream_sha256
        s2 = replay(path, SimConfig(seed=2), lambda e: None).stream_sha256
        assert s1 != s2

    def test_events_emitted_in_frame_order(self, tmp_path):
        path = tmp_path / "match.jsonl"
        record = json.loads(SAMPLE_LINE)
        out = []
        for frame in (300, 100, 200):
            record["start_frame"] = frame
            record["end_frame"] = frame + 10
            out.append(json.dumps(record))
        path.write_text("\n".join(out) + "\n")
        events = []
        replay(path, SimConfig(seed=0), events.append)
        times = [e.t_event for e in events]
        assert times == sorted(times)

    def test_parse_error_carries_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(SAMPLE_LINE + "\n{broken\n")
        with pytest.raises(ParseError, match=":2:"):
            replay(path, SimConfig(seed=0), lambda e: None)

    def test_one_event_per_record(self, tmp_path):
        path = tmp_path / "match.jsonl"
        record = json.loads(SAMPLE_LINE)
        lines = []
        for i in range(10):
            record["start_frame"] = i * 10
            record["end_frame"] = i * 10 + 5
            lines.append(json.dumps(record))
        path.write_text("\n".join(lines) + "\n")
        events = []
        summary = replay(path, SimConfig(seed=0), events.append)
        assert summary.total_events == len(events) == 10
        assert len({e.event_id for e in events}) == 10


class TestGenerateSynthetic:
    def test_rate_zero_empty(self, gen4_config):
        events = generate_synthetic(SimConfig(seed=1, event_rate=0.0), 60.0, gen4_config)
        assert events == []

    def test_seeded_reproducible(self, gen4_config):
        a = generate_synthetic(SimConfig(seed=7), 120.0, gen4_config, borderline_fraction=0.3)
        b = generate_synthetic(SimConfig(seed=7), 120.0, gen4_config, borderline_fraction=0.3)
        assert stream_digest([event_to_dict(e) for e in a]) == stream_digest(
            [event_to_dict(e) for e in b]
        )
        assert len(a) > 0

    def test_borderline_fraction_one_straddles_threshold(self, gen4_config):
        events = generate_synthetic(
            SimConfig(seed=3), 120.0, gen4_config, borderline_fraction=1.0, count=40
        )
        assert len(events) == 40
        for event in events:
            fused = fuse_interval(event.sensors, gen4_config)
            assert fused.lo < 65.0 <= fused.hi, f"{fused} does not straddle 65"

    def test_exact_count(self, gen4_config):
        events = generate_synthetic(SimConfig(seed=5), 60.0, gen4_config, count=60)
        assert len(events) == 60
        times = [e.t_event for e in events]
        assert times == sorted(times)
        assert len({e.event_id for e in events}) == 60

    def test_invalid_args(self, gen4_config):
        with pytest.raises(InvalidArgument):
            generate_synthetic(SimConfig(seed=1), 0.0, gen4_config)
        with pytest.raises(InvalidArgument):
            generate_synthetic(SimConfig(seed=1), 10.0, gen4_config, borderline_fraction=1.5)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(InvalidArgument):
            SimConfig(speed=0.0)
        with pytest.raises(InvalidArgument):
            SimConfig(event_rate=-1.0)
        with pytest.raises(InvalidArgument):
            NoiseModel(pressure=-0.1)
