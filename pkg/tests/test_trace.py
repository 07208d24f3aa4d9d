"""Canonical trace files: structure, byte stability, round-tripping."""

from __future__ import annotations

import json

import pytest

from relaynav.trace import Trace, TraceFormatError, emit_trace, load_trace


def sample_trace() -> Trace:
    trace = Trace(header={"episode_id": "ep1", "t_max": 5, "seed": 0})
    trace.append({"tick": 0, "robots": {"FH": {"action": "stop"}}, "item": {"phase": "AtPickup"}})
    trace.append({"tick": 1, "robots": {"FH": {"action": "move_forward"}}, "item": {"phase": "AtPickup"}})
    trace.result = {"episode_id": "ep1", "both_success": False, "ticks": 2}
    return trace


class TestSerialization:
    def test_line_structure(self):
        lines = sample_trace().lines()
        kinds = [json.loads(line)["kind"] for line in lines]
        assert kinds == ["header", "tick", "tick", "result"]

    def test_bytes_are_canonical_and_stable(self):
        a, b = sample_trace(), sample_trace()
        b.header = dict(reversed(list(b.header.items())))  # key order irrelevant
        assert a.to_bytes() == b.to_bytes()
        assert a.to_bytes().endswith(b"\n")
        for line in a.lines():
            assert ": " not in line and ", " not in line  # compact separators

    def test_result_line_optional(self):
        trace = sample_trace()
        trace.result = None
        kinds = [json.loads(line)["kind"] for line in trace.lines()]
        assert kinds == ["header", "tick", "tick"]


class TestRoundTrip:
    def test_emit_load_identity(self, tmp_path):
        path = tmp_path / "ep1.trace.jsonl"
        original = sample_trace()
        emit_trace(original, path)
        loaded = load_trace(path)
        assert loaded.header == original.header
        assert loaded.records == original.records
        assert loaded.result == original.result
        assert loaded.to_bytes() == original.to_bytes()

    def test_blank_lines_tolerated(self, tmp_path):
        path = tmp_path / "ep1.trace.jsonl"
        emit_trace(sample_trace(), path)
        padded = tmp_path / "padded.trace.jsonl"
        padded.write_text(path.read_text().replace("\n", "\n\n"))
        assert load_trace(padded).to_bytes() == sample_trace().to_bytes()


class TestFormatErrors:
    def test_duplicate_header_rejected(self, tmp_path):
        path = tmp_path / "bad.trace.jsonl"
        header = json.dumps({"kind": "header", "episode_id": "x"})
        path.write_text(header + "\n" + header + "\n")
        with pytest.raises(TraceFormatError):
            load_trace(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "bad.trace.jsonl"
        path.write_text(json.dumps({"kind": "tick", "tick": 0}) + "\n")
        with pytest.raises(TraceFormatError):
            load_trace(path)

    def test_unknown_kind_rejected(self, tmp_path):
        path = tmp_path / "bad.trace.jsonl"
        path.write_text(json.dumps({"kind": "prophecy"}) + "\n")
        with pytest.raises(TraceFormatError):
            load_trace(path)
