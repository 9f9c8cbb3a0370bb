from collections.abc import Sequence
from json import dumps
from logging import getLogger
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from ..grouping import PlaneInstance

logger = getLogger(__name__)


def create_labels_txt(labels: ArrayLike) -> str:
    """One plane id per line, in vertex order; -1 marks unassigned vertices."""
    lab = np.asarray(labels, dtype=np.int64)
    return "".join(f"{v}\n" for v in lab.tolist())


def export_labels_txt(labels: ArrayLike, output: Path) -> None:
    logger.info(f"Exporting labels to: {output}")
    with open(output, "w+") as f:
        f.write(create_labels_txt(labels))


def load_labels_txt(source: Path) -> np.ndarray:
    """Read a labels file written by `export_labels_txt`."""
    text = Path(source).read_text().split()
    return np.array([int(v) for v in text], dtype=np.int64)


def create_instances_json(instances: Sequence[PlaneInstance], indent: int | None = 2) -> str:
    """
    Generate the instances sidecar.

    Args:
        instances: The final plane instances.
        indent: JSON indentation level.

    Returns:
        str: A JSON object with the plane count and one entry per instance.
    """
    data = {
        "n_planes": len(instances),
        "instances": [inst.to_dict() for inst in sorted(instances, key=lambda i: i.id)],
    }
    return dumps(data, indent=indent)


def export_instances_json(instances: Sequence[PlaneInstance], output: Path) -> None:
    logger.info(f"Exporting {len(instances)} plane instances to: {output}")
    with open(output, "w+") as f:
        f.write(create_instances_json(instances))
