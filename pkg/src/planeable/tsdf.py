from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.ndimage import map_coordinates

from .errors import DegenerateGeometryError, ResolutionMismatchError
from .geometry import CameraPose, normalize_rows, project, unproject
from .mesh import TriMesh

logger = getLogger(__name__)

FRAME_RATE = 30.0


@dataclass
class Keyframe:
    """
    A posed depth image with per-pixel planar probability and plane embedding.

    Attributes:
        depth: (H, W) depth in meters, 0 where invalid.
        planar_prob: (H, W) probability in [0, 1] that a pixel lies on a plane.
        pixel_embedding: (H, W, D) single-image plane embeddings.
        pose: Camera intrinsics and camera-to-world transform.
        frame_id: Index of the frame in its sequence.
        timestamp: Capture time in seconds; defaults to `frame_id / 30`.
    """

    depth: NDArray[np.float64]
    planar_prob: NDArray[np.float64]
    pixel_embedding: NDArray[np.float64]
    pose: CameraPose
    frame_id: int = 0
    timestamp: float | None = None

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        self.planar_prob = np.asarray(self.planar_prob, dtype=np.float64)
        self.pixel_embedding = np.asarray(self.pixel_embedding, dtype=np.float64)
        if self.depth.ndim != 2:
            raise ValueError("depth must be a 2D image")
        if self.planar_prob.shape != self.depth.shape:
            raise ValueError("planar_prob must have the depth image's shape")
        if self.pixel_embedding.ndim != 3 or self.pixel_embedding.shape[:2] != self.depth.shape:
            raise ValueError("pixel_embedding must be (H, W, D) with the depth image's size")
        if np.any((self.planar_prob < 0) | (self.planar_prob > 1)):
            raise ValueError("planar_prob must lie in [0, 1]")
        if self.timestamp is None:
            self.timestamp = self.frame_id / FRAME_RATE

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @property
    def n_valid(self) -> int:
        """Number of pixels with a depth measurement."""
        return int(np.count_nonzero(self.depth > 0))


@dataclass
class TsdfVolume:
    """
    A dense voxel grid of truncated signed distance and fused per-pixel channels.

    Voxel `(i, j, k)` is centred at `origin + (i, j, k) * voxel_size`. The signed
    distance is positive in front of the observed surface and normalized by the
    truncation distance. Unobserved voxels have weight 0 and tsdf 1.

    Attributes:
        origin: World position of voxel (0, 0, 0).
        voxel_size: Voxel edge length in meters.
        dims: Number of voxels along x, y and z.
        tsdf: Normalized truncated signed distance in [-1, 1].
        weight: Number of observations per voxel.
        planar_prob: Running mean of the observed planar probability.
        embedding: Running mean of the observed pixel embedding (fused channel).
        resolution: Image size shared by all fused keyframes, set by the first one.
    """

    origin: NDArray[np.float64]
    voxel_size: float
    dims: tuple[int, int, int]
    tsdf: NDArray[np.float64] = field(repr=False)
    weight: NDArray[np.float64] = field(repr=False)
    planar_prob: NDArray[np.float64] = field(repr=False)
    embedding: NDArray[np.float64] = field(repr=False)
    resolution: tuple[int, int] | None = None
    _centers: NDArray[np.float64] | None = field(default=None, init=False, repr=False)

    @classmethod
    def create(
        cls,
        origin: ArrayLike,
        voxel_size: float,
        dims: Iterable[int],
        embedding_dim: int = 3,
    ) -> TsdfVolume:
        """Create an empty volume."""
        if voxel_size <= 0:
            raise ValueError(f"voxel_size must be positive, got {voxel_size}")
        shape = tuple(int(d) for d in dims)
        if len(shape) != 3 or min(shape) < 1:
            raise ValueError(f"dims must be three positive integers, got {shape}")
        return cls(
            origin=np.asarray(origin, dtype=np.float64).reshape(3),
            voxel_size=float(voxel_size),
            dims=shape,
            tsdf=np.ones(shape),
            weight=np.zeros(shape),
            planar_prob=np.zeros(shape),
            embedding=np.zeros((*shape, embedding_dim)),
        )

    @classmethod
    def from_bounds(
        cls,
        lower: ArrayLike,
        upper: ArrayLike,
        voxel_size: float,
        embedding_dim: int = 3,
    ) -> TsdfVolume:
        """Create an empty volume whose voxel centres cover the box [lower, upper]."""
        lo = np.asarray(lower, dtype=np.float64)
        hi = np.asarray(upper, dtype=np.float64)
        if np.any(hi <= lo):
            raise DegenerateGeometryError(f"Empty volume bounds: {lo} .. {hi}")
        dims = np.ceil((hi - lo) / voxel_size).astype(int) + 1
        logger.debug(f"Allocating a TSDF volume of {tuple(dims)} voxels.")
        return cls.create(lo, voxel_size, dims, embedding_dim)

    @property
    def bounds(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Centres of the first and last voxel."""
        return self.origin, self.origin + (np.asarray(self.dims) - 1) * self.voxel_size

    def voxel_centers(self) -> NDArray[np.float64]:
        """(X*Y*Z, 3) world positions of all voxel centres in C order."""
        if self._centers is None:
            idx = np.indices(self.dims).reshape(3, -1).T
            self._centers = self.origin + idx * self.voxel_size
        return self._centers

    def integrate(
        self,
        frame: Keyframe,
        truncation: float,
        use_planar_probability: bool = True,
    ) -> TsdfVolume:
        """
        Fuse one keyframe into the volume in place.

        Every voxel is projected to its nearest pixel. Voxels in front of the
        observed surface, and behind it by at most `truncation`, receive one more
        observation: the tsdf channel averages `min(1, (depth - z) / truncation)`,
        the planar and embedding channels average the pixel's values. Voxels
        further behind the surface are left unchanged.

        Args:
            frame: The keyframe.
            truncation: Truncation distance in meters.
            use_planar_probability: If False, pixels are fused as fully planar.

        Returns:
            TsdfVolume: This volume.

        Raises:
            ValueError: If truncation is below twice the voxel size.
            ResolutionMismatchError: If the frame size differs from earlier frames.
        """
        if truncation < 2 * self.voxel_size:
            raise ValueError(
                f"truncation {truncation} must be at least twice the voxel size {self.voxel_size}"
            )
        if self.resolution is None:
            self.resolution = frame.shape
        elif frame.shape != self.resolution:
            raise ResolutionMismatchError(self.resolution, frame.shape)

        h, w = frame.shape
        uv, z = project(self.voxel_centers(), frame.pose)
        u = np.rint(np.nan_to_num(uv[:, 0], nan=-1.0))
        v = np.rint(np.nan_to_num(uv[:, 1], nan=-1.0))
        inside = (z > 0) & (u >= 0) & (u < w) & (v >= 0) & (v < h)

        idx = np.flatnonzero(inside)
        ui = u[idx].astype(np.int64)
        vi = v[idx].astype(np.int64)
        depth = frame.depth[vi, ui]
        sdf = depth - z[idx]
        keep = (depth > 0) & (sdf >= -truncation)
        idx, ui, vi, sdf = idx[keep], ui[keep], vi[keep], sdf[keep]

        obs = np.minimum(1.0, sdf / truncation)
        prob = frame.planar_prob[vi, ui] if use_planar_probability else np.ones(len(idx))
        emb = frame.pixel_embedding[vi, ui]

        tsdf = self.tsdf.reshape(-1)
        weight = self.weight.reshape(-1)
        planar = self.planar_prob.reshape(-1)
        embedding = self.embedding.reshape(-1, self.embedding.shape[-1])

        w_old = weight[idx]
        w_new = w_old + 1.0
        tsdf[idx] = (tsdf[idx] * w_old + obs) / w_new
        planar[idx] = (planar[idx] * w_old + prob) / w_new
        embedding[idx] = (embedding[idx] * w_old[:, None] + emb) / w_new[:, None]
        weight[idx] = w_new

        logger.debug(f"Integrated frame {frame.frame_id}: {len(idx)} voxels updated.")
        return self


def integrate(
    volume: TsdfVolume,
    frame: Keyframe,
    truncation: float,
    use_planar_probability: bool = True,
) -> TsdfVolume:
    """Fuse a keyframe into a volume. See `TsdfVolume.integrate`."""
    return volume.integrate(frame, truncation, use_planar_probability)


def scene_bounds(
    keyframes: Iterable[Keyframe], margin: float = 0.2
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Axis-aligned box around every observed point, grown by a margin.

    Raises:
        DegenerateGeometryError: If no keyframe has valid depth.
    """
    lo = np.full(3, np.inf)
    hi = np.full(3, -np.inf)
    for frame in keyframes:
        points = unproject(frame.depth, frame.pose).points
        if len(points):
            lo = np.minimum(lo, points.min(axis=0))
            hi = np.maximum(hi, points.max(axis=0))
    if not np.all(np.isfinite(lo)):
        raise DegenerateGeometryError("No keyframe contains valid depth")
    return lo - margin, hi + margin


def _sample_trilinear(grid: NDArray, coords: NDArray) -> NDArray[np.float64]:
    return map_coordinates(grid, coords.T, order=1, mode="nearest")


def extract_mesh(
    volume: TsdfVolume,
    planar_threshold: float = 0.25,
    with_fused_embeddings: bool = False,
) -> TriMesh:
    """
    Extract the zero level set of the volume restricted to planar regions.

    A cube produces geometry only when all eight of its corner voxels were observed
    and have an aggregated planar probability of at least `planar_threshold`.
    Vertex normals follow the normalized tsdf gradient and point into free space.

    Args:
        volume: The fused volume.
        planar_threshold: Minimum aggregated planar probability of a corner voxel.
        with_fused_embeddings: If True, vertex embeddings are sampled from the
            volume's fused embedding channel.

    Returns:
        TriMesh: The extracted mesh; empty when there is no zero crossing.
    """
    from skimage.measure import marching_cubes

    if min(volume.dims) < 2:
        return TriMesh.empty()

    valid = (volume.weight > 0) & (volume.planar_prob >= planar_threshold)
    cube = valid[:-1, :-1, :-1].copy()
    for di, dj, dk in np.ndindex(2, 2, 2):
        cube &= valid[di : di + cube.shape[0], dj : dj + cube.shape[1], dk : dk + cube.shape[2]]
    mask = np.zeros(volume.dims, dtype=bool)
    mask[:-1, :-1, :-1] = cube
    if not mask.any():
        logger.info("No cube passes the planar threshold; the extracted mesh is empty.")
        return TriMesh.empty()

    try:
        verts, faces, mc_normals, _ = marching_cubes(volume.tsdf, level=0.0, mask=mask)
    except (RuntimeError, ValueError) as e:
        logger.info(f"No zero crossing in the volume: {e}")
        return TriMesh.empty()
    if not len(faces):
        return TriMesh.empty()

    gradient = np.stack(
        [_sample_trilinear(g, verts) for g in np.gradient(volume.tsdf)], axis=-1
    )
    bad = np.linalg.norm(gradient, axis=1) <= 1e-12
    gradient[bad] = mc_normals[bad]
    normals = normalize_rows(gradient)

    embeddings = None
    if with_fused_embeddings:
        embeddings = np.stack(
            [
                _sample_trilinear(volume.embedding[..., c], verts)
                for c in range(volume.embedding.shape[-1])
            ],
            axis=-1,
        )

    mesh = TriMesh(
        vertices=volume.origin + verts * volume.voxel_size,
        faces=faces,
        vertex_normals=normals,
        vertex_embeddings=embeddings,
    )
    logger.info(f"Extracted mesh with {len(mesh.vertices)} vertices and {len(mesh.faces)} faces.")
    return mesh
