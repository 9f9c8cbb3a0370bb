from csv import DictReader
from json import loads

from pytest import raises

from planeable.metrics import EvaluationReport
from planeable.views.report import (
    TIMING_FIELDS,
    TimingLog,
    append_report_csv,
    create_report_json,
    export_report_json,
)


def report(chamfer=1.5):
    return EvaluationReport(chamfer, 0.9, 1.0, 2.0, 0.5, 0.95, 0.8, 3.0, 4.0, 3.5)


def test_create_report_json():
    data = loads(create_report_json(report()))
    assert data["chamfer"] == 1.5
    assert data["planar_chamfer"] == 3.5
    assert list(data) == list(report().to_dict())


def test_infinite_distances():
    text = create_report_json(report(chamfer=float("inf")))
    assert '"chamfer": Infinity' in text
    assert loads(text)["chamfer"] == float("inf")


def test_export_report_json(tmp_path):
    path = tmp_path / "report.json"
    export_report_json(report(), path)
    assert loads(path.read_text())["ri"] == 0.95


def test_append_report_csv(tmp_path):
    path = tmp_path / "scores.csv"
    append_report_csv(report(), path, scene="a")
    append_report_csv(report(2.5), path, scene="b")
    rows = list(DictReader(path.open()))
    assert [row["scene"] for row in rows] == ["a", "b"]
    assert [float(row["chamfer"]) for row in rows] == [1.5, 2.5]
    assert path.read_text().count("scene,") == 1


class TestTimingLog:
    def record(self, frame_id):
        return dict(zip(TIMING_FIELDS, (frame_id, 0.001, 0.02, 0.3, 0.04, 5)))

    def test_writes_json_lines(self, tmp_path):
        path = tmp_path / "timings.jsonl"
        log = TimingLog(path)
        log.append(self.record(0))
        log.append(self.record(1))
        lines = path.read_text().splitlines()
        assert [loads(line)["frame_id"] for line in lines] == [0, 1]
        assert len(log.records) == 2

    def test_truncates_existing_file(self, tmp_path):
        path = tmp_path / "timings.jsonl"
        path.write_text("stale\n")
        TimingLog(path)
        assert path.read_text() == ""

    def test_rejects_incomplete_record(self, tmp_path):
        log = TimingLog(tmp_path / "timings.jsonl")
        with raises(ValueError, match="mlp"):
            log.append({"frame_id": 0, "depth_ingest": 0.0, "fusion": 0.0, "clustering": 0.0, "n_planes": 1})
