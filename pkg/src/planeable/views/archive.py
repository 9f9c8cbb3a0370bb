from collections.abc import Sequence
from logging import getLogger
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from ..parsers.archive import IMAGE_MAGIC
from ..tsdf import FRAME_RATE, Keyframe

logger = getLogger(__name__)


def create_image(data: ArrayLike) -> bytes:
    """Encode an (H, W) or (H, W, C) image as a `PDEP` file."""
    arr = np.asarray(data)
    h, w = arr.shape[:2]
    header = IMAGE_MAGIC + np.array([h, w], dtype="<u4").tobytes()
    return header + np.ascontiguousarray(arr, dtype="<f4").tobytes()


def _format_row(values: ArrayLike) -> str:
    return " ".join(f"{float(v):.17g}" for v in np.asarray(values).ravel())


def write_scene_archive(keyframes: Sequence[Keyframe], out_dir: Path | str) -> Path:
    """
    Write keyframes as a scene archive directory.

    Frames are written as `frames/NNNNNN.{depth,prob,emb}.bin`, poses to
    `poses.txt` and the intrinsics of the first frame to `intrinsics.txt`.
    A timestamp column is added only for frames whose timestamp is not
    `frame_id / 30`. The output is byte-identical for identical keyframes.

    Args:
        keyframes: Keyframes sharing one set of intrinsics.
        out_dir: The archive directory, created if needed.

    Returns:
        Path: The archive directory.

    Raises:
        ValueError: If there are no keyframes or the intrinsics differ between frames.
    """
    if not keyframes:
        raise ValueError("A scene archive needs at least one keyframe")
    intrinsics = keyframes[0].pose.intrinsics
    if any(not np.array_equal(kf.pose.intrinsics, intrinsics) for kf in keyframes):
        raise ValueError("All keyframes of an archive must share their intrinsics")

    root = Path(out_dir)
    frames_dir = root / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)

    pose_lines = []
    for kf in keyframes:
        stem = f"{kf.frame_id:06d}"
        (frames_dir / f"{stem}.depth.bin").write_bytes(create_image(kf.depth))
        (frames_dir / f"{stem}.prob.bin").write_bytes(create_image(kf.planar_prob))
        (frames_dir / f"{stem}.emb.bin").write_bytes(create_image(kf.pixel_embedding))
        line = f"{kf.frame_id} {_format_row(kf.pose.camera_to_world)}"
        if kf.timestamp != kf.frame_id / FRAME_RATE:
            line += f" {kf.timestamp:.17g}"
        pose_lines.append(line)

    (root / "poses.txt").write_text("\n".join(pose_lines) + "\n")
    (root / "intrinsics.txt").write_text(_format_row(intrinsics) + "\n")
    logger.info(f"Wrote scene archive with {len(keyframes)} frames to: {root}")
    return root
