from __future__ import annotations

from dataclasses import dataclass, field, replace
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components as csgraph_components

from .errors import DegenerateGeometryError
from .geometry import PointCloud, normalize_rows

logger = getLogger(__name__)

UNASSIGNED = -1


def _face_normals(vertices: NDArray, faces: NDArray) -> NDArray[np.float64]:
    """Area-weighted (unnormalized) face normals."""
    tri = vertices[faces]
    return np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])


@dataclass
class TriMesh:
    """
    An indexed triangle mesh carrying per-vertex plane labels and embeddings.

    Attributes:
        vertices: (V, 3) positions in meters.
        faces: (F, 3) vertex indices.
        vertex_normals: (V, 3) unit normals; computed from the faces when omitted.
        vertex_labels: Optional (V,) plane-instance ids, -1 for unassigned.
        vertex_embeddings: Optional (V, D) embeddings.
    """

    vertices: NDArray[np.float64]
    faces: NDArray[np.int64]
    vertex_normals: NDArray[np.float64] | None = None
    vertex_labels: NDArray[np.int64] | None = field(default=None)
    vertex_embeddings: NDArray[np.float64] | None = field(default=None)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        n_vertices = len(self.vertices)

        if len(self.faces) and (self.faces.min() < 0 or self.faces.max() >= n_vertices):
            raise ValueError("Face indices must lie within the vertex range")

        if self.vertex_normals is None:
            self.vertex_normals = self._normals_from_faces()
        else:
            self.vertex_normals = np.asarray(
                self.vertex_normals, dtype=np.float64
            ).reshape(-1, 3)
            if len(self.vertex_normals) != n_vertices:
                raise ValueError("vertex_normals must match the vertex count")
            lengths = np.linalg.norm(self.vertex_normals, axis=1)
            if np.any(np.abs(lengths - 1.0) > 1e-6):
                raise ValueError("vertex_normals must have unit length")

        if self.vertex_labels is not None:
            self.vertex_labels = np.asarray(self.vertex_labels, dtype=np.int64).reshape(-1)
            if len(self.vertex_labels) != n_vertices:
                raise ValueError("vertex_labels must match the vertex count")

        if self.vertex_embeddings is not None:
            self.vertex_embeddings = np.asarray(self.vertex_embeddings, dtype=np.float64)
            if self.vertex_embeddings.ndim != 2 or len(self.vertex_embeddings) != n_vertices:
                raise ValueError("vertex_embeddings must be (V, D)")

    def _normals_from_faces(self) -> NDArray[np.float64]:
        accum = np.zeros_like(self.vertices)
        if len(self.faces):
            fn = _face_normals(self.vertices, self.faces)
            for corner in range(3):
                np.add.at(accum, self.faces[:, corner], fn)
        return normalize_rows(accum)

    def __len__(self) -> int:
        """Number of vertices."""
        return len(self.vertices)

    @property
    def is_empty(self) -> bool:
        return len(self.vertices) == 0

    @classmethod
    def empty(cls) -> TriMesh:
        """A mesh with no vertices and no faces."""
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), np.zeros((0, 3)))

    def with_labels(self, labels: ArrayLike | None) -> TriMesh:
        """Return a copy carrying the given vertex labels."""
        return replace(
            self,
            vertex_labels=None if labels is None else np.asarray(labels, dtype=np.int64),
        )

    def with_embeddings(self, embeddings: ArrayLike | None) -> TriMesh:
        """Return a copy carrying the given vertex embeddings."""
        return replace(
            self,
            vertex_embeddings=None
            if embeddings is None
            else np.asarray(embeddings, dtype=np.float64),
        )

    def labels_or_unassigned(self) -> NDArray[np.int64]:
        """The vertex labels, or all -1 when the mesh carries none."""
        if self.vertex_labels is None:
            return np.full(len(self.vertices), UNASSIGNED, dtype=np.int64)
        return self.vertex_labels

    def face_areas(self) -> NDArray[np.float64]:
        """Area of every face."""
        if not len(self.faces):
            return np.zeros(0)
        return 0.5 * np.linalg.norm(_face_normals(self.vertices, self.faces), axis=1)

    def edges(self) -> NDArray[np.int64]:
        """
        Unique undirected face edges, each as a sorted (i, j) row.

        Returns:
            NDArray: (E, 2) edges ordered lexicographically.
        """
        if not len(self.faces):
            return np.zeros((0, 2), dtype=np.int64)
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e = np.sort(e, axis=1)
        e = e[e[:, 0] != e[:, 1]]
        return np.unique(e, axis=0)

    def adjacency(self) -> csr_matrix:
        """Symmetric vertex adjacency matrix built from face edges."""
        n = len(self.vertices)
        e = self.edges()
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.int8)
        return coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()

    def submesh(self, vertex_mask: NDArray[np.bool_], face_mask: NDArray[np.bool_]) -> TriMesh:
        """
        Keep the masked vertices and the masked faces whose corners all survive.

        Returns:
            TriMesh: The re-indexed mesh.
        """
        keep_faces = face_mask & np.all(vertex_mask[self.faces], axis=1)
        remap = np.full(len(self.vertices), -1, dtype=np.int64)
        remap[vertex_mask] = np.arange(int(vertex_mask.sum()))
        return TriMesh(
            self.vertices[vertex_mask],
            remap[self.faces[keep_faces]],
            self.vertex_normals[vertex_mask],
            None if self.vertex_labels is None else self.vertex_labels[vertex_mask],
            None
            if self.vertex_embeddings is None
            else self.vertex_embeddings[vertex_mask],
        )

    @classmethod
    def read(cls, path: Path | str, **kwargs: Any) -> TriMesh:
        """Read a mesh from a file, automatically detecting the format."""
        from .registry import READERS

        p = Path(path)
        ext = p.suffix.lower()
        reader = READERS.get(ext)
        if not reader:
            raise ValueError(f"Unsupported extension for reading: {ext}")
        return reader(p, **kwargs)

    def write(self, path: Path | str, **kwargs: Any) -> None:
        """
        Write the mesh to a file, automatically detecting the format.

        Args:
            path: Path to the output file (.ply or .obj).
            **kwargs: Additional arguments passed to the specific writer.
        """
        from .registry import WRITERS

        p = Path(path)
        ext = p.suffix.lower()
        writer = WRITERS.get(ext)
        if not writer:
            raise ValueError(f"Unsupported extension: {ext}")
        writer(self, p, **kwargs)


def connected_components(mesh: TriMesh, labels: ArrayLike) -> NDArray[np.int64]:
    """
    Split every label into its edge-connected islands.

    Two vertices end up in the same output component only if they carry the same
    input label and are joined by a path of face edges whose vertices all carry
    that label. Unassigned vertices (-1) stay unassigned. Output labels are
    numbered 0..k-1 in order of each component's lowest vertex index.

    Args:
        mesh: The mesh providing the connectivity.
        labels: (V,) input labels.

    Returns:
        NDArray: (V,) component labels.
    """
    lab = np.asarray(labels, dtype=np.int64)
    n = len(mesh.vertices)
    if len(lab) != n:
        raise ValueError("labels must match the vertex count")

    e = mesh.edges()
    same = (lab[e[:, 0]] == lab[e[:, 1]]) & (lab[e[:, 0]] >= 0)
    e = e[same]
    graph = coo_matrix(
        (np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(n, n)
    ).tocsr()
    _, comp = csgraph_components(graph, directed=False)

    out = np.full(n, UNASSIGNED, dtype=np.int64)
    assigned = lab >= 0
    if not assigned.any():
        return out

    # Renumber in order of first appearance
    uniq, first = np.unique(comp[assigned], return_index=True)
    order = np.argsort(first)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    out[assigned] = rank[np.searchsorted(uniq, comp[assigned])]
    logger.debug(f"Connected components: {len(uniq)} from {len(np.unique(lab[assigned]))} labels.")
    return out


def ambiguous_faces(mesh: TriMesh) -> NDArray[np.bool_]:
    """Faces whose three vertices carry two or more distinct labels."""
    if mesh.vertex_labels is None or not len(mesh.faces):
        return np.zeros(len(mesh.faces), dtype=bool)
    fl = mesh.vertex_labels[mesh.faces]
    return (fl[:, 0] != fl[:, 1]) | (fl[:, 1] != fl[:, 2])


def sample_mesh_surface(
    mesh: TriMesh,
    n_points: int,
    exclude_ambiguous_faces: bool = False,
    rng_seed: int = 0,
) -> PointCloud:
    """
    Sample points uniformly over the mesh surface.

    Faces are chosen with probability proportional to their area and points are
    drawn uniformly inside each chosen face. Each sample inherits its face's label,
    which is unanimous when ambiguous faces are excluded; otherwise the label of the
    face's first vertex is used.

    Args:
        mesh: A non-empty mesh.
        n_points: Number of samples.
        exclude_ambiguous_faces: If True, faces connecting two or more labels
            contribute no samples.
        rng_seed: Seed making the sampling deterministic.

    Returns:
        PointCloud: The samples with labels (-1 when the mesh has none).

    Raises:
        DegenerateGeometryError: If the mesh has no faces or zero total area.
    """
    if not len(mesh.faces):
        raise DegenerateGeometryError("Cannot sample a mesh without faces")
    areas = mesh.face_areas()
    if areas.sum() <= 0:
        raise DegenerateGeometryError("Cannot sample a mesh with zero total area")

    labels = mesh.labels_or_unassigned()
    if exclude_ambiguous_faces:
        areas = np.where(ambiguous_faces(mesh), 0.0, areas)

    total = areas.sum()
    if n_points <= 0 or total <= 0:
        return PointCloud(np.zeros((0, 3)), np.zeros(0, dtype=np.int64))

    rng = np.random.default_rng(rng_seed)
    face_idx = rng.choice(len(mesh.faces), size=n_points, p=areas / total)
    r1 = np.sqrt(rng.random(n_points))
    r2 = rng.random(n_points)
    tri = mesh.vertices[mesh.faces[face_idx]]
    points = (
        (1 - r1)[:, None] * tri[:, 0]
        + (r1 * (1 - r2))[:, None] * tri[:, 1]
        + (r1 * r2)[:, None] * tri[:, 2]
    )
    return PointCloud(points, labels[mesh.faces[face_idx, 0]])
