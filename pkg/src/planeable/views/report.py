from csv import DictWriter
from json import dumps
from logging import getLogger
from pathlib import Path
from typing import Any

from ..metrics import EvaluationReport

logger = getLogger(__name__)

TIMING_FIELDS = ("frame_id", "depth_ingest", "fusion", "mlp", "clustering", "n_planes")


def create_report_json(report: EvaluationReport, indent: int | None = 2) -> str:
    """
    Serialize an evaluation report.

    Infinite distances (empty predictions) are written as `Infinity`.
    """
    return dumps(report.to_dict(), indent=indent)


def export_report_json(report: EvaluationReport, output: Path) -> None:
    logger.info(f"Exporting evaluation report to: {output}")
    with open(output, "w+") as f:
        f.write(create_report_json(report))


def append_report_csv(report: EvaluationReport, output: Path, scene: str = "") -> None:
    """
    Append one report as a CSV row, writing the header first if the file is new.

    Args:
        report: The report to append.
        output: The CSV file path.
        scene: Scene name for the first column.
    """
    row = {"scene": scene, **report.to_dict()}
    output = Path(output)
    new_file = not output.exists() or output.stat().st_size == 0
    logger.info(f"Appending evaluation row for '{scene}' to: {output}")
    with open(output, "a", newline="") as f:
        writer = DictWriter(f, fieldnames=list(row))
        if new_file:
            writer.writeheader()
        writer.writerow(row)


class TimingLog:
    """
    Writes one JSON object per keyframe to a `timings.jsonl` file.

    Stage times are in seconds.
    """

    def __init__(self, output: Path):
        self.output = Path(output)
        self.records: list[dict[str, Any]] = []
        self.output.write_text("")

    def append(self, record: dict[str, Any]) -> None:
        missing = set(TIMING_FIELDS) - set(record)
        if missing:
            raise ValueError(f"Timing record lacks fields: {sorted(missing)}")
        self.records.append(record)
        with open(self.output, "a") as f:
            f.write(dumps(record) + "\n")
        logger.debug(f"Timing for frame {record['frame_id']}: {record}")
