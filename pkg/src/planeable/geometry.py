from __future__ import annotations

from dataclasses import dataclass, field
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DegenerateGeometryError

logger = getLogger(__name__)


def normalize_rows(
    vectors: ArrayLike, fallback: ArrayLike = (0.0, 0.0, 1.0)
) -> NDArray[np.float64]:
    """Scale every row to unit length; rows of (near) zero length become `fallback`."""
    v = np.asarray(vectors, dtype=np.float64)
    length = np.linalg.norm(v, axis=-1)
    ok = length > 1e-12
    out = np.empty_like(v)
    out[ok] = v[ok] / length[ok][..., None]
    out[~ok] = np.asarray(fallback, dtype=np.float64)
    return out


@dataclass(frozen=True)
class Plane:
    """
    An infinite plane `normal . p = offset`.

    Attributes:
        normal: Unit normal vector.
        offset: Signed distance of the plane from the origin along the normal (meters).
    """

    normal: NDArray[np.float64]
    offset: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(normal) - 1.0) > 1e-9:
            raise ValueError(f"Plane normal must be unit length, got {normal}")
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    @classmethod
    def from_point_normal(cls, point: ArrayLike, normal: ArrayLike) -> Plane:
        """
        Build a plane through a point with the given (not necessarily unit) normal.

        Raises:
            DegenerateGeometryError: If the normal has zero length.
        """
        n = np.asarray(normal, dtype=np.float64)
        length = np.linalg.norm(n)
        if length == 0:
            raise DegenerateGeometryError("Cannot build a plane from a zero normal")
        n = n / length
        return cls(n, float(n @ np.asarray(point, dtype=np.float64)))

    def signed_distance(self, points: ArrayLike) -> NDArray[np.float64]:
        """Signed distance of each point to the plane."""
        return np.asarray(points, dtype=np.float64) @ self.normal - self.offset

    def project(self, points: ArrayLike) -> NDArray[np.float64]:
        """Move each point along the normal onto the plane."""
        p = np.asarray(points, dtype=np.float64)
        return p - np.multiply.outer(self.signed_distance(p), self.normal)

    def flipped(self) -> Plane:
        """The same plane with the opposite orientation."""
        return Plane(-self.normal, -self.offset)


@dataclass(frozen=True)
class CameraPose:
    """
    A pinhole camera with a rigid camera-to-world transform.

    The camera frame has x to the right, y down and z along the viewing direction.

    Attributes:
        intrinsics: 3x3 pinhole matrix in pixels.
        camera_to_world: 4x4 rigid transform.
    """

    intrinsics: NDArray[np.float64]
    camera_to_world: NDArray[np.float64]

    def __post_init__(self):
        k = np.asarray(self.intrinsics, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.camera_to_world, dtype=np.float64).reshape(4, 4)
        r = t[:3, :3]
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-6):
            raise ValueError("camera_to_world rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("camera_to_world rotation must have determinant +1")
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "camera_to_world", t)

    @property
    def rotation(self) -> NDArray[np.float64]:
        return self.camera_to_world[:3, :3]

    @property
    def translation(self) -> NDArray[np.float64]:
        return self.camera_to_world[:3, 3]

    @property
    def world_to_camera(self) -> NDArray[np.float64]:
        """Inverse of the rigid camera-to-world transform."""
        inv = np.eye(4)
        inv[:3, :3] = self.rotation.T
        inv[:3, 3] = -self.rotation.T @ self.translation
        return inv

    @classmethod
    def look_at(
        cls,
        intrinsics: ArrayLike,
        eye: ArrayLike,
        target: ArrayLike,
        up: ArrayLike = (0.0, 0.0, 1.0),
    ) -> CameraPose:
        """
        Build a pose at `eye` looking towards `target`.

        Args:
            intrinsics: 3x3 pinhole matrix.
            eye: Camera centre in world coordinates.
            target: A world point on the optical axis.
            up: Approximate world up direction; image rows run against it.

        Returns:
            CameraPose: The pose.
        """
        eye = np.asarray(eye, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - eye
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-9:
            raise DegenerateGeometryError("look_at direction is parallel to up")
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        c2w = np.eye(4)
        c2w[:3, 0] = right
        c2w[:3, 1] = down
        c2w[:3, 2] = forward
        c2w[:3, 3] = eye
        return cls(np.asarray(intrinsics, dtype=np.float64), c2w)


@dataclass
class PointCloud:
    """
    A set of 3D points with optional per-point plane labels.

    Attributes:
        points: (N, 3) positions in meters.
        labels: Optional (N,) integer labels, -1 for unassigned.
    """

    points: NDArray[np.float64]
    labels: NDArray[np.int64] | None = field(default=None)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ValueError("PointCloud coordinates must be finite")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            if len(self.labels) != len(self.points):
                raise ValueError("PointCloud labels must match the point count")

    def __len__(self) -> int:
        return len(self.points)

    def select(self, mask: NDArray[np.bool_]) -> PointCloud:
        """Return the sub-cloud where `mask` is True."""
        labels = self.labels[mask] if self.labels is not None else None
        return PointCloud(self.points[mask], labels)

    def by_label(self) -> dict[int, NDArray[np.float64]]:
        """Group points by label, skipping unassigned points."""
        if self.labels is None:
            return {}
        return {
            int(label): self.points[self.labels == label]
            for label in np.unique(self.labels)
            if label >= 0
        }


def backproject(depth: ArrayLike, intrinsics: ArrayLike) -> NDArray[np.float64]:
    """
    Lift every pixel of a depth image to a camera-frame 3D point.

    Args:
        depth: (H, W) depth along the optical axis in meters.
        intrinsics: 3x3 pinhole matrix.

    Returns:
        NDArray: (H, W, 3) camera-frame points; invalid pixels map to the origin.
    """
    d = np.asarray(depth, dtype=np.float64)
    k = np.asarray(intrinsics, dtype=np.float64)
    h, w = d.shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    x = (u - k[0, 2]) / k[0, 0] * d
    y = (v - k[1, 2]) / k[1, 1] * d
    return np.stack([x, y, d], axis=-1)


def normals_from_depth(
    depth: ArrayLike, intrinsics: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    """
    Estimate camera-frame surface normals from a depth image.

    Normals are the cross product of central differences of the back-projected
    points and face the camera. A pixel is invalid when any pixel of its 3x3
    neighbourhood is invalid (depth <= 0) or lies outside the image.

    Args:
        depth: (H, W) depth in meters, 0 where invalid.
        intrinsics: 3x3 pinhole matrix.

    Returns:
        tuple: (H, W, 3) unit normals (zero where invalid) and the (H, W) validity mask.

    Raises:
        DegenerateGeometryError: If the image is smaller than 3x3.
    """
    d = np.asarray(depth, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] < 3 or d.shape[1] < 3:
        raise DegenerateGeometryError(
            f"Normal estimation needs at least a 3x3 image, got {d.shape}"
        )

    points = backproject(d, intrinsics)
    valid_px = d > 0

    valid = np.zeros_like(valid_px)
    inner = np.ones((d.shape[0] - 2, d.shape[1] - 2), dtype=bool)
    for dv in range(3):
        for du in range(3):
            inner &= valid_px[dv : dv + inner.shape[0], du : du + inner.shape[1]]
    valid[1:-1, 1:-1] = inner

    normals = np.zeros_like(points)
    dx = points[1:-1, 2:] - points[1:-1, :-2]
    dy = points[2:, 1:-1] - points[:-2, 1:-1]
    n = np.cross(dx, dy)
    length = np.linalg.norm(n, axis=-1)
    inner_valid = inner & (length > 0)
    n[inner_valid] /= length[inner_valid][:, None]

    # Face the camera centre
    facing = np.einsum("ijk,ijk->ij", n, points[1:-1, 1:-1])
    n[facing > 0] *= -1
    n[~inner_valid] = 0.0

    normals[1:-1, 1:-1] = n
    valid[1:-1, 1:-1] = inner_valid
    return normals, valid


def unproject(depth: ArrayLike, pose: CameraPose) -> PointCloud:
    """
    Lift the valid pixels of a depth image to world coordinates.

    Args:
        depth: (H, W) depth in meters, 0 where invalid.
        pose: Camera intrinsics and camera-to-world transform.

    Returns:
        PointCloud: One point per valid pixel, in row-major pixel order.
    """
    d = np.asarray(depth, dtype=np.float64)
    cam = backproject(d, pose.intrinsics)[d > 0]
    return PointCloud(cam @ pose.rotation.T + pose.translation)


def project(
    points: ArrayLike, pose: CameraPose
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Project world points into the image of a camera.

    Args:
        points: (N, 3) world points.
        pose: Camera intrinsics and camera-to-world transform.

    Returns:
        tuple: (N, 2) pixel coordinates (u, v) and (N,) depths along the optical axis.
            Points at or behind the camera get NaN pixel coordinates.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    w2c = pose.world_to_camera
    cam = p @ w2c[:3, :3].T + w2c[:3, 3]
    z = cam[:, 2]
    k = pose.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(z > 0, k[0, 0] * cam[:, 0] / z + k[0, 2], np.nan)
        v = np.where(z > 0, k[1, 1] * cam[:, 1] / z + k[1, 2], np.nan)
    return np.stack([u, v], axis=-1), z
