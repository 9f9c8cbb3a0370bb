from collections.abc import Iterator
from logging import getLogger
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from ..errors import ArchiveFormatError
from ..geometry import CameraPose
from ..tsdf import Keyframe

logger = getLogger(__name__)

IMAGE_MAGIC = b"PDEP"
_HEADER_SIZE = len(IMAGE_MAGIC) + 8


def read_image(path: Path | str, channels: int | None = None) -> NDArray[np.float32]:
    """
    Read one `PDEP` image file.

    The file holds the magic, `u32 H`, `u32 W` and `H * W * C` little-endian
    f32 values in row-major order with channels interleaved. The channel count
    is inferred from the payload size.

    Args:
        path: The `.bin` file.
        channels: Expected channel count, or None to accept any.

    Returns:
        NDArray: (H, W) for single-channel files, (H, W, C) otherwise.

    Raises:
        ArchiveFormatError: If the file is missing, has a bad header or a payload
            that does not match its size.
    """
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as e:
        raise ArchiveFormatError(p, f"cannot read file ({e.strerror})") from e

    if len(raw) < _HEADER_SIZE or raw[:4] != IMAGE_MAGIC:
        raise ArchiveFormatError(p, "missing PDEP header")
    h, w = (int(v) for v in np.frombuffer(raw, dtype="<u4", count=2, offset=4))
    payload = len(raw) - _HEADER_SIZE
    if h == 0 or w == 0 or payload % (4 * h * w):
        raise ArchiveFormatError(p, f"payload of {payload} bytes does not fit a {h}x{w} image")

    c = payload // (4 * h * w)
    if channels is not None and c != channels:
        raise ArchiveFormatError(p, f"expected {channels} channel(s), found {c}")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER_SIZE).reshape(h, w, c)
    return data[..., 0] if c == 1 else data


def read_intrinsics(path: Path | str) -> NDArray[np.float64]:
    p = Path(path)
    values = _read_numbers(p)
    if values.size != 9:
        raise ArchiveFormatError(p, f"expected 9 values, found {values.size}")
    return values.reshape(3, 3)


def read_poses(path: Path | str) -> dict[int, tuple[NDArray[np.float64], float | None]]:
    """
    Read `poses.txt`.

    Each line holds a frame id, 16 row-major values of the camera-to-world
    matrix and optionally a timestamp in seconds.

    Returns:
        dict: Maps frame id to its (4, 4) matrix and timestamp (or None).
    """
    p = Path(path)
    try:
        lines = p.read_text().splitlines()
    except OSError as e:
        raise ArchiveFormatError(p, f"cannot read file ({e.strerror})") from e

    poses: dict[int, tuple[NDArray[np.float64], float | None]] = {}
    for number, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        if len(fields) not in (17, 18):
            raise ArchiveFormatError(p, f"line {number}: expected 17 or 18 fields, found {len(fields)}")
        try:
            frame_id = int(fields[0])
            values = np.array([float(v) for v in fields[1:17]])
            timestamp = float(fields[17]) if len(fields) == 18 else None
        except ValueError as e:
            raise ArchiveFormatError(p, f"line {number}: {e}") from e
        poses[frame_id] = (values.reshape(4, 4), timestamp)
    return poses


def _read_numbers(path: Path) -> NDArray[np.float64]:
    try:
        return np.array([float(v) for v in path.read_text().split()])
    except OSError as e:
        raise ArchiveFormatError(path, f"cannot read file ({e.strerror})") from e
    except ValueError as e:
        raise ArchiveFormatError(path, str(e)) from e


def iter_scene_archive(source: Path | str) -> Iterator[Keyframe]:
    """
    Yield the keyframes of a scene archive directory one at a time.

    The archive holds `frames/NNNNNN.depth.bin`, `.prob.bin` and `.emb.bin` per
    frame, `poses.txt` and a shared `intrinsics.txt`. Frame files are read only
    when their keyframe is requested.

    Args:
        source: The archive directory.

    Yields:
        Keyframe: Keyframes ordered by frame id.

    Raises:
        ArchiveFormatError: Naming the offending file when anything is missing,
            malformed or inconsistent.
    """
    root = Path(source)
    frames_dir = root / "frames"
    if not frames_dir.is_dir():
        raise ArchiveFormatError(frames_dir, "frames directory not found")

    frames: list[tuple[int, Path]] = []
    for depth_file in frames_dir.glob("*.depth.bin"):
        try:
            frames.append((int(depth_file.name.removesuffix(".depth.bin")), depth_file))
        except ValueError:
            raise ArchiveFormatError(depth_file, "frame name is not a number")
    if not frames:
        raise ArchiveFormatError(frames_dir, "no frames found")

    intrinsics = read_intrinsics(root / "intrinsics.txt")
    poses = read_poses(root / "poses.txt")
    for frame_id, _ in frames:
        if frame_id not in poses:
            raise ArchiveFormatError(root / "poses.txt", f"no pose for frame {frame_id}")

    for frame_id, depth_file in sorted(frames):
        yield _read_keyframe(root, depth_file, frame_id, intrinsics, poses[frame_id])


def _read_keyframe(
    root: Path,
    depth_file: Path,
    frame_id: int,
    intrinsics: NDArray[np.float64],
    pose_entry: tuple[NDArray[np.float64], float | None],
) -> Keyframe:
    stem = depth_file.name.removesuffix(".depth.bin")
    depth = read_image(depth_file, channels=1)
    prob_file = depth_file.with_name(f"{stem}.prob.bin")
    emb_file = depth_file.with_name(f"{stem}.emb.bin")
    prob = read_image(prob_file, channels=1)
    emb = read_image(emb_file)
    if emb.ndim == 2:
        emb = emb[..., None]
    for f, img in ((prob_file, prob), (emb_file, emb)):
        if img.shape[:2] != depth.shape:
            raise ArchiveFormatError(f, f"size {img.shape[:2]} differs from depth {depth.shape}")

    matrix, timestamp = pose_entry
    try:
        pose = CameraPose(intrinsics, matrix)
    except ValueError as e:
        raise ArchiveFormatError(root / "poses.txt", f"frame {frame_id}: {e}") from e
    try:
        return Keyframe(
            depth=depth,
            planar_prob=prob,
            pixel_embedding=emb,
            pose=pose,
            frame_id=frame_id,
            timestamp=timestamp,
        )
    except ValueError as e:
        raise ArchiveFormatError(prob_file, str(e)) from e


def load_scene_archive(source: Path | str) -> list[Keyframe]:
    """
    Load every keyframe of a scene archive directory.

    Args:
        source: The archive directory.

    Returns:
        list[Keyframe]: Keyframes ordered by frame id.

    Raises:
        ArchiveFormatError: Naming the offending file when anything is missing,
            malformed or inconsistent.
    """
    keyframes = list(iter_scene_archive(source))
    logger.info(f"Loaded {len(keyframes)} keyframes from archive: {source}")
    return keyframes
