import pytest

from panelsim.runlog import (
    ChannelError,
    available_channels,
    export_csv,
    extract_channel,
    phase_transitions,
    read_runlog,
    write_runlog,
)


def _record(t, phase, fy=0.0):
    arm = {
        "pose": [0.45, 0.37 + t, 0.26, 0.01],
        "twist": [0.0, 0.05, 0.0, 0.0, 0.0, 0.0],
        "wrench_S": [0.0, fy, 0.0, 0.0, 0.0, 0.0],
        "command": [0.0, 0.05, 0.0, 0.0, 0.0, 0.0],
    }
    return {
        "t": t,
        "phase": phase,
        "arms": {"driving": arm, "yielding": dict(arm)},
        "contacts": {"count": 0, "max_force_n": 0.0},
    }


@pytest.fixture
def records():
    return [
        _record(0.00, "Approach"),
        _record(0.01, "Approach"),
        _record(0.02, "Insert", fy=-12.5),
        _record(0.03, "Insert", fy=-35.0),
        _record(0.04, "Done", fy=-35.0),
    ]


class TestRoundTrip:
    def test_write_read_identity(self, records, tmp_path):
        path = tmp_path / "run.jsonl"
        write_runlog(records, path)
        assert read_runlog(path) == records

    def test_rewrite_is_byte_identical(self, records, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        write_runlog(records, a)
        write_runlog(read_runlog(a), b)
        assert a.read_bytes() == b.read_bytes()

    def test_blank_lines_skipped(self, records, tmp_path):
        path = tmp_path / "run.jsonl"
        write_runlog(records, path)
        path.write_text(path.read_text() + "\n\n")
        assert len(read_runlog(path)) == len(records)

    def test_corrupt_line_reports_line_number(self, tmp_path):
        path = tmp_path / "run.jsonl"
        path.write_text('{"t": 0.0, "phase": "Init"}\nnot json{\n')
        with pytest.raises(ValueError, match=":2:"):
            read_runlog(path)


class TestChannels:
    def test_available_channels(self, records):
        names = available_channels(records)
        assert names[:2] == ["t", "phase"]
        assert "driving.pose.yaw" in names
        assert "yielding.wrench_S.fy" in names
        # 2 globals + 2 roles x 4 fields x (4 + 6 + 6 + 6) axes
        assert len(names) == 2 + 2 * (4 + 6 + 6 + 6)

    def test_extract_time_and_phase(self, records):
        assert extract_channel(records, "t") == [0.00, 0.01, 0.02, 0.03, 0.04]
        assert extract_channel(records, "phase")[2] == "Insert"

    def test_extract_vector_axis(self, records):
        fy = extract_channel(records, "driving.wrench_S.fy")
        assert fy == [0.0, 0.0, -12.5, -35.0, -35.0]
        y = extract_channel(records, "driving.pose.y")
        assert y == pytest.approx([0.37, 0.38, 0.39, 0.40, 0.41])

    def test_unknown_channel_lists_available(self, records):
        with pytest.raises(ChannelError, match="driving.pose.x"):
            extract_channel(records, "driving.pose.w")
        with pytest.raises(ChannelError):
            extract_channel(records, "nobody.pose.x")
        with pytest.raises(ChannelError):
            extract_channel(records, "driving.pose")


class TestCsvExport:
    def test_export_shape_and_header(self, records, tmp_path):
        path = tmp_path / "out.csv"
        export_csv(records, ["driving.pose.y", "driving.wrench_S.fy"], path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,driving.pose.y,driving.wrench_S.fy"
        assert len(lines) == 1 + len(records)
        row = lines[4].split(",")
        assert row[0] == "0.03"
        assert row[2] == "-35.0"

    def test_time_column_not_duplicated(self, records, tmp_path):
        path = tmp_path / "out.csv"
        export_csv(records, ["t", "phase"], path)
        assert path.read_text().splitlines()[0] == "t,phase"

    def test_empty_log_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            export_csv([], ["t"], tmp_path / "out.csv")


def test_phase_transitions(records):
    assert phase_transitions(records) == [
        ("Approach", 0.00),
        ("Insert", 0.02),
        ("Done", 0.04),
    ]
