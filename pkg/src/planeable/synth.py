"""
Synthetic planar scenes with ground truth.

Scenes are built from rectangles. Rendering ray-casts them into posed keyframes
whose planar probabilities and pixel embeddings stand in for the output of a
single-image plane network: every instance has an anchor embedding, pixels get
their instance's anchor plus noise, and each frame may rotate all of its
embeddings by a random orthogonal matrix so that embeddings disagree across
frames while staying consistent within one.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.transform import Rotation

from .enums import Preset
from .geometry import CameraPose, Plane
from .mesh import UNASSIGNED, TriMesh
from .tsdf import Keyframe

logger = getLogger(__name__)

ANCHOR_RADIUS = 1.5
ANCHOR_MIN_DISTANCE = 1.0
CLUTTER_PROBABILITY = 0.1
DEFAULT_RESOLUTION = (80, 60)
DEFAULT_FOCAL = 56.0
_OVERLAY_BIAS = 1e-9


@dataclass(frozen=True)
class ScenePiece:
    """
    A rectangle `origin + s * axis_u + t * axis_v` with `s` in [0, width] and
    `t` in [0, height]. Its normal `axis_u x axis_v` faces the visible side.
    """

    instance_id: int
    origin: tuple[float, float, float]
    axis_u: tuple[float, float, float]
    axis_v: tuple[float, float, float]
    width: float
    height: float

    @property
    def normal(self) -> NDArray[np.float64]:
        n = np.cross(self.axis_u, self.axis_v)
        return n / np.linalg.norm(n)

    @property
    def plane(self) -> Plane:
        return Plane.from_point_normal(self.origin, self.normal)

    def local(self, points: ArrayLike) -> NDArray[np.float64]:
        """(N, 2) in-plane coordinates of points."""
        rel = np.asarray(points, dtype=np.float64) - np.asarray(self.origin)
        return np.stack([rel @ np.asarray(self.axis_u), rel @ np.asarray(self.axis_v)], axis=-1)

    def contains(self, points: ArrayLike, tol: float = 1e-9) -> NDArray[np.bool_]:
        st = self.local(points)
        return (
            (st[..., 0] >= -tol)
            & (st[..., 0] <= self.width + tol)
            & (st[..., 1] >= -tol)
            & (st[..., 1] <= self.height + tol)
        )


@dataclass(frozen=True)
class Overlay(ScenePiece):
    """A coplanar instance on top of a host surface, such as a picture on a wall."""

    host_id: int


@dataclass(frozen=True)
class Clutter(ScenePiece):
    """Non-planar stuff: real geometry rendered with a low planar probability."""


@dataclass(frozen=True)
class NoiseModel:
    """
    Attributes:
        depth_sigma: Standard deviation of additive depth noise (meters).
        embedding_sigma: Standard deviation of pixel embedding noise.
        rotate_embeddings: Apply a random rotation to each frame's embeddings.
    """

    depth_sigma: float = 0.01
    embedding_sigma: float = 0.05
    rotate_embeddings: bool = True


@dataclass
class SyntheticScene:
    """
    A synthetic scene with its camera trajectory.

    Attributes:
        pieces: Every rectangle, including overlays and clutter.
        anchors: Anchor embedding per instance id (clutter uses id -1).
        trajectory: Camera poses, one per keyframe.
        noise: Rendering noise.
        resolution: Image (width, height).
        seed: Seed used to build the scene and render its frames.
    """

    pieces: list[ScenePiece]
    anchors: dict[int, NDArray[np.float64]]
    trajectory: list[CameraPose] = field(default_factory=list)
    noise: NoiseModel = field(default_factory=NoiseModel)
    resolution: tuple[int, int] = DEFAULT_RESOLUTION
    seed: int = 0

    @property
    def instance_ids(self) -> list[int]:
        return sorted({p.instance_id for p in self.pieces if not isinstance(p, Clutter)})

    @property
    def planes(self) -> dict[int, Plane]:
        """Plane of every instance."""
        return {
            p.instance_id: p.plane for p in self.pieces if not isinstance(p, Clutter)
        }

    @property
    def overlays(self) -> list[Overlay]:
        return [p for p in self.pieces if isinstance(p, Overlay)]


def default_intrinsics(resolution: tuple[int, int] = DEFAULT_RESOLUTION) -> NDArray[np.float64]:
    w, h = resolution
    return np.array(
        [[DEFAULT_FOCAL, 0.0, (w - 1) / 2], [0.0, DEFAULT_FOCAL, (h - 1) / 2], [0.0, 0.0, 1.0]]
    )


def sample_anchors(
    ids: Sequence[int], rng: np.random.Generator, max_tries: int = 100_000
) -> dict[int, NDArray[np.float64]]:
    """
    Anchor embeddings on a sphere of radius 1.5, pairwise further apart than 1.0.

    Raises:
        RuntimeError: If rejection sampling cannot place all anchors.
    """
    anchors: list[NDArray] = []
    for _ in range(max_tries):
        if len(anchors) == len(ids):
            break
        v = rng.normal(size=3)
        v *= ANCHOR_RADIUS / np.linalg.norm(v)
        if all(np.linalg.norm(v - a) > ANCHOR_MIN_DISTANCE for a in anchors):
            anchors.append(v)
    if len(anchors) < len(ids):
        raise RuntimeError(f"Could not place {len(ids)} separated anchor embeddings")
    return dict(zip(ids, anchors))


def _rect(instance_id: int, origin, u, v, cls: type[ScenePiece] = ScenePiece, **extra):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return cls(
        instance_id,
        tuple(float(c) for c in origin),
        tuple(float(c) for c in u / np.linalg.norm(u)),
        tuple(float(c) for c in v / np.linalg.norm(v)),
        float(np.linalg.norm(u)),
        float(np.linalg.norm(v)),
        **extra,
    )


def _box_pieces(lo: ArrayLike, hi: ArrayLike, first_id: int) -> list[ScenePiece]:
    """The six inward-facing sides of a box: floor, ceiling, then four walls."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    dx, dy, dz = x1 - x0, y1 - y0, z1 - z0
    i = first_id
    return [
        _rect(i, (x0, y0, z0), (dx, 0, 0), (0, dy, 0)),
        _rect(i + 1, (x0, y0, z1), (0, dy, 0), (dx, 0, 0)),
        _rect(i + 2, (x0, y0, z0), (0, dy, 0), (0, 0, dz)),
        _rect(i + 3, (x1, y0, z0), (0, 0, dz), (0, dy, 0)),
        _rect(i + 4, (x0, y0, z0), (0, 0, dz), (dx, 0, 0)),
        _rect(i + 5, (x0, y1, z0), (dx, 0, 0), (0, 0, dz)),
    ]


def _overlay_on(host: ScenePiece, overlay_id: int, size: tuple[float, float], jitter: NDArray) -> Overlay:
    w, h = size
    s = (host.width - w) / 2 + jitter[0]
    t = min(host.height - h - 0.1, 1.0) + jitter[1]
    origin = np.asarray(host.origin) + s * np.asarray(host.axis_u) + t * np.asarray(host.axis_v)
    return _rect(
        overlay_id,
        origin,
        np.asarray(host.axis_u) * w,
        np.asarray(host.axis_v) * h,
        cls=Overlay,
        host_id=host.instance_id,
    )


def orbit_trajectory(
    center: ArrayLike,
    n_frames: int,
    radius: float = 0.4,
    height: float = 1.3,
    resolution: tuple[int, int] = DEFAULT_RESOLUTION,
    start_angle: float = 0.0,
    sweep: float = 2 * np.pi,
) -> list[CameraPose]:
    """
    Cameras circling a point and looking outwards, alternately pitched down and up.
    """
    k = default_intrinsics(resolution)
    c = np.asarray(center, dtype=np.float64)
    poses = []
    for i in range(n_frames):
        angle = start_angle + sweep * i / max(n_frames, 1)
        direction = np.array([np.cos(angle), np.sin(angle), 0.0])
        eye = np.array([c[0], c[1], height]) + radius * direction
        pitch = -0.6 if i % 2 == 0 else 0.45
        target = eye + direction + np.array([0.0, 0.0, pitch])
        poses.append(CameraPose.look_at(k, eye, target))
    return poses


def make_box_room(
    extent: float | ArrayLike = (3.0, 2.5, 2.2),
    overlays: int = 0,
    seed: int = 0,
    clutter: int = 0,
    n_frames: int = 30,
    noise: NoiseModel | None = None,
    resolution: tuple[int, int] = DEFAULT_RESOLUTION,
) -> SyntheticScene:
    """
    A box room: floor, ceiling and four walls, with optional overlays and clutter.

    Args:
        extent: Room size along x, y and z in meters (a scalar gives a cube).
        overlays: Number of picture overlays (0.8 m by 0.6 m), one per wall.
        seed: Seed for anchors, overlay placement and rendering noise.
        clutter: Number of low-probability clutter patches near the floor corners.
        n_frames: Length of the orbit trajectory.
        noise: Rendering noise; defaults to `NoiseModel()`.
        resolution: Image (width, height).

    Returns:
        SyntheticScene: The room with 6 + `overlays` instances.

    Raises:
        ValueError: If the extent is not positive or there are more than 4 overlays or clutter patches.
    """
    size = np.broadcast_to(np.asarray(extent, dtype=np.float64), (3,)).copy()
    if np.any(size <= 0):
        raise ValueError(f"Room extent must be positive, got {size}")
    if not 0 <= overlays <= 4 or not 0 <= clutter <= 4:
        raise ValueError("A box room holds between 0 and 4 overlays and clutter patches")

    rng = np.random.default_rng(seed)
    pieces = _box_pieces((0.0, 0.0, 0.0), size, 0)
    walls = pieces[2:]
    for k in range(overlays):
        jitter = rng.uniform(-0.2, 0.2, size=2)
        pieces.append(_overlay_on(walls[k], 6 + k, (0.8, 0.6), jitter))
    corners = [(0.3, 0.3), (size[0] - 0.9, 0.3), (size[0] - 0.9, size[1] - 0.9), (0.3, size[1] - 0.9)]
    for k in range(clutter):
        corner = np.asarray(corners[k]) + rng.uniform(-0.1, 0.1, size=2)
        pieces.append(
            _rect(UNASSIGNED, (corner[0], corner[1], 0.5), (0.6, 0, 0), (0, 0.6, 0), cls=Clutter)
        )

    ids = sorted({p.instance_id for p in pieces if not isinstance(p, Clutter)})
    anchors = sample_anchors([*ids, UNASSIGNED], rng)
    trajectory = orbit_trajectory(
        (size[0] / 2, size[1] / 2), n_frames, height=min(1.3, 0.6 * size[2]), resolution=resolution
    )
    logger.debug(f"Built a box room with {len(ids)} instances and {clutter} clutter patches.")
    return SyntheticScene(pieces, anchors, trajectory, noise or NoiseModel(), resolution, seed)


def make_two_rooms(
    seed: int = 0,
    n_frames: int = 30,
    noise: NoiseModel | None = None,
    resolution: tuple[int, int] = DEFAULT_RESOLUTION,
) -> SyntheticScene:
    """
    Two 3 m by 2.5 m rooms joined by a doorway in a 0.2 m thick shared wall.

    The floor is one instance spanning both rooms and the doorway. The camera
    orbits in the first room, walks through the doorway and orbits in the second.
    """
    if n_frames < 6:
        raise ValueError(f"The two-room walk needs at least 6 frames, got {n_frames}")
    rng = np.random.default_rng(seed)
    depth_x, width_y, height_z = 3.0, 2.5, 2.2
    wall = 0.2
    door_y0, door_y1, door_z = 1.0, 1.8, 2.0
    xa, xb = depth_x, depth_x + wall
    x_end = xb + depth_x

    floor, ceiling = 0, 1
    pieces: list[ScenePiece] = [
        # Floor: room A, doorway, room B
        _rect(floor, (0, 0, 0), (depth_x, 0, 0), (0, width_y, 0)),
        _rect(floor, (xa, door_y0, 0), (wall, 0, 0), (0, door_y1 - door_y0, 0)),
        _rect(floor, (xb, 0, 0), (depth_x, 0, 0), (0, width_y, 0)),
        _rect(ceiling, (0, 0, height_z), (0, width_y, 0), (depth_x, 0, 0)),
        _rect(2, (xb, 0, height_z), (0, width_y, 0), (depth_x, 0, 0)),
        # Room A outer walls
        _rect(3, (0, 0, 0), (0, width_y, 0), (0, 0, height_z)),
        _rect(4, (0, 0, 0), (0, 0, height_z), (depth_x, 0, 0)),
        _rect(5, (0, width_y, 0), (depth_x, 0, 0), (0, 0, height_z)),
        # Room B outer walls
        _rect(6, (x_end, 0, 0), (0, 0, height_z), (0, width_y, 0)),
        _rect(7, (xb, 0, 0), (0, 0, height_z), (depth_x, 0, 0)),
        _rect(8, (xb, width_y, 0), (depth_x, 0, 0), (0, 0, height_z)),
    ]
    # Shared wall, side A (faces -x) and side B (faces +x), each around the doorway
    for wid, x, flip in ((9, xa, True), (10, xb, False)):
        for y0, y1, z0, z1 in (
            (0.0, door_y0, 0.0, height_z),
            (door_y1, width_y, 0.0, height_z),
            (door_y0, door_y1, door_z, height_z),
        ):
            u, v = (0, 0, z1 - z0), (0, y1 - y0, 0)
            if not flip:
                u, v = v, u
            pieces.append(_rect(wid, (x, y0, z0), u, v))
    # Doorway jambs and lintel
    pieces += [
        _rect(11, (xa, door_y0, 0), (0, 0, door_z), (wall, 0, 0)),
        _rect(12, (xa, door_y1, 0), (wall, 0, 0), (0, 0, door_z)),
        _rect(13, (xa, door_y0, door_z), (0, door_y1 - door_y0, 0), (wall, 0, 0)),
    ]

    ids = sorted({p.instance_id for p in pieces})
    anchors = sample_anchors([*ids, UNASSIGNED], rng)

    k_a = n_frames // 2 - 2
    k_b = n_frames - k_a - 4
    trajectory = orbit_trajectory((depth_x / 2, width_y / 2), k_a, resolution=resolution)
    k = default_intrinsics(resolution)
    door_center_y = (door_y0 + door_y1) / 2
    for x in np.linspace(depth_x - 0.8, xb + 0.8, 4):
        eye = np.array([x, door_center_y, 1.3])
        trajectory.append(CameraPose.look_at(k, eye, eye + np.array([1.0, 0.0, -0.3])))
    trajectory += orbit_trajectory(
        (xb + depth_x / 2, width_y / 2), k_b, resolution=resolution, start_angle=np.pi
    )
    return SyntheticScene(pieces, anchors, trajectory, noise or NoiseModel(), resolution, seed)


def make_scene(preset: Preset | str, seed: int = 0, n_frames: int = 30) -> SyntheticScene:
    """Build one of the named scenes."""
    match Preset(preset):
        case Preset.BOX6:
            return make_box_room(seed=seed, n_frames=n_frames)
        case Preset.PICTURE_WALL:
            return make_box_room(overlays=1, seed=seed, n_frames=n_frames)
        case Preset.TWO_ROOMS:
            return make_two_rooms(seed=seed, n_frames=n_frames)


def render_keyframe(
    scene: SyntheticScene,
    pose: CameraPose,
    resolution: tuple[int, int] | None = None,
    noise: NoiseModel | None = None,
    frame_id: int = 0,
) -> tuple[Keyframe, NDArray[np.int64]]:
    """
    Ray-cast a keyframe of the scene.

    The nearest rectangle hit by each pixel ray sets the depth; overlays win over
    their coplanar host. Instance pixels have planar probability 1, clutter 0.1,
    and pixels hitting nothing are invalid (depth 0). Noise is drawn from a
    generator seeded with `(scene.seed, frame_id)`.

    Args:
        scene: The scene.
        pose: Camera pose; its intrinsics must match the resolution.
        resolution: Image (width, height); defaults to the scene's.
        noise: Rendering noise; defaults to the scene's.
        frame_id: Index of the frame, stored in the keyframe and used for seeding.

    Returns:
        tuple: The keyframe and (H, W) ground-truth instance ids (-1 for clutter and misses).
    """
    w, h = resolution or scene.resolution
    noise = noise or scene.noise
    rng = np.random.default_rng([scene.seed, frame_id])

    k = pose.intrinsics
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    rays_cam = np.stack([(u - k[0, 2]) / k[0, 0], (v - k[1, 2]) / k[1, 1], np.ones_like(u)], -1)
    rays = rays_cam.reshape(-1, 3) @ pose.rotation.T
    eye = pose.translation

    best_key = np.full(len(rays), np.inf)
    depth = np.zeros(len(rays))
    ids = np.full(len(rays), UNASSIGNED, dtype=np.int64)
    clutter = np.zeros(len(rays), dtype=bool)

    for piece in scene.pieces:
        n = piece.normal
        denom = rays @ n
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (piece.plane.offset - n @ eye) / denom
        hit = np.isfinite(t) & (t > 1e-6)
        hit[hit] = piece.contains(eye + t[hit, None] * rays[hit])
        key = t - (_OVERLAY_BIAS if isinstance(piece, Overlay) else 0.0)
        closer = hit & (key < best_key)
        best_key[closer] = key[closer]
        depth[closer] = t[closer]
        ids[closer] = piece.instance_id
        clutter[closer] = isinstance(piece, Clutter)

    valid = depth > 0
    if noise.depth_sigma > 0:
        depth[valid] += rng.normal(0.0, noise.depth_sigma, int(valid.sum()))
        depth[valid] = np.maximum(depth[valid], 1e-3)

    prob = np.where(valid, np.where(clutter, CLUTTER_PROBABILITY, 1.0), 0.0)

    emb_dim = len(next(iter(scene.anchors.values())))
    embedding = np.zeros((len(rays), emb_dim))
    for iid, anchor in scene.anchors.items():
        sel = valid & (ids == iid) & ~clutter if iid != UNASSIGNED else valid & clutter
        embedding[sel] = anchor
    if noise.embedding_sigma > 0:
        embedding[valid] += rng.normal(0.0, noise.embedding_sigma, (int(valid.sum()), emb_dim))
    if noise.rotate_embeddings:
        rotation = Rotation.random(None, rng).as_matrix()
        embedding = embedding @ rotation.T

    gt_ids = np.where(clutter, UNASSIGNED, ids)
    frame = Keyframe(
        depth=depth.reshape(h, w),
        planar_prob=prob.reshape(h, w),
        pixel_embedding=embedding.reshape(h, w, emb_dim),
        pose=pose,
        frame_id=frame_id,
    )
    return frame, gt_ids.reshape(h, w)


def render_sequence(scene: SyntheticScene) -> list[Keyframe]:
    """Render every pose of the scene's trajectory."""
    return [render_keyframe(scene, pose, frame_id=i)[0] for i, pose in enumerate(scene.trajectory)]


def ground_truth_mesh(scene: SyntheticScene, resolution: float = 0.05) -> TriMesh:
    """
    Triangulate every instance rectangle into a labeled mesh.

    Each piece becomes a grid of cells of at most `resolution` meters, two
    triangles per cell, labeled with the piece's instance. Host cells whose centre
    lies under an overlay are left out. Clutter has no ground truth. Pieces are not
    welded to each other.
    """
    vertices: list[NDArray] = []
    faces: list[NDArray] = []
    labels: list[NDArray] = []
    offset = 0

    for piece in scene.pieces:
        if isinstance(piece, Clutter):
            continue
        nu = max(1, int(np.ceil(piece.width / resolution - 1e-9)))
        nv = max(1, int(np.ceil(piece.height / resolution - 1e-9)))
        s = np.linspace(0.0, piece.width, nu + 1)
        t = np.linspace(0.0, piece.height, nv + 1)
        ss, tt = np.meshgrid(s, t, indexing="ij")
        grid = (
            np.asarray(piece.origin)
            + ss[..., None] * np.asarray(piece.axis_u)
            + tt[..., None] * np.asarray(piece.axis_v)
        )

        ii, jj = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        if not isinstance(piece, Overlay):
            centers = (grid[ii, jj] + grid[ii + 1, jj + 1]) / 2
            covered = np.zeros(len(ii), dtype=bool)
            for overlay in scene.overlays:
                if overlay.host_id == piece.instance_id:
                    covered |= overlay.contains(centers)
            ii, jj = ii[~covered], jj[~covered]

        stride = nv + 1
        v00 = offset + ii * stride + jj
        v10 = v00 + stride
        cells_a = np.stack([v00, v10, v10 + 1], axis=1)
        cells_b = np.stack([v00, v10 + 1, v00 + 1], axis=1)
        vertices.append(grid.reshape(-1, 3))
        faces += [cells_a, cells_b]
        labels.append(np.full((nu + 1) * (nv + 1), piece.instance_id, dtype=np.int64))
        offset += (nu + 1) * (nv + 1)

    mesh = TriMesh(
        np.concatenate(vertices),
        np.concatenate(faces),
        vertex_labels=np.concatenate(labels),
    )
    # Grid vertices of removed host cells carry no face
    used = np.zeros(len(mesh.vertices), dtype=bool)
    used[mesh.faces.ravel()] = True
    return mesh.submesh(used, np.ones(len(mesh.faces), dtype=bool))


def synthesize_archive(
    preset: Preset | str,
    seed: int,
    out_dir: Path | str,
    n_frames: int = 30,
) -> SyntheticScene:
    """
    Render a preset scene and write it as a scene archive with `gt_mesh.ply`.

    Returns:
        SyntheticScene: The scene that was written.
    """
    from .views.archive import write_scene_archive

    out = Path(out_dir)
    scene = make_scene(preset, seed, n_frames)
    write_scene_archive(render_sequence(scene), out)
    ground_truth_mesh(scene).write(out / "gt_mesh.ply")
    logger.info(
        f"Synthesized '{Preset(preset).value}' (seed {seed}) with "
        f"{len(scene.instance_ids)} instances into: {out}"
    )
    return scene
