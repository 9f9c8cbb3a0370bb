from __future__ import annotations

from collections.abc import Sequence
from logging import getLogger
from typing import TYPE_CHECKING

import numpy as np
from numpy.typing import ArrayLike

from .errors import DegenerateGeometryError
from .geometry import Plane
from .mesh import TriMesh, ambiguous_faces

if TYPE_CHECKING:
    from .grouping.instance import PlaneInstance

logger = getLogger(__name__)


def fit_plane(points: ArrayLike, reference_normal: ArrayLike | None = None) -> Plane:
    """
    Least-squares plane through a set of points.

    The normal is the eigenvector of the smallest eigenvalue of the point
    covariance. It is flipped to agree with `reference_normal` when given;
    otherwise its largest-magnitude component is made positive.

    Args:
        points: (N, 3) points, N >= 3.
        reference_normal: Optional direction the normal should agree with.

    Returns:
        Plane: The fitted plane.

    Raises:
        DegenerateGeometryError: If there are fewer than 3 points or they are collinear.
    """
    p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(p) < 3:
        raise DegenerateGeometryError(f"A plane fit needs at least 3 points, got {len(p)}")

    centroid = p.mean(axis=0)
    centered = p - centroid
    eigvals, eigvecs = np.linalg.eigh(centered.T @ centered)
    if eigvals[1] <= 1e-12 * max(eigvals[2], 1e-300):
        raise DegenerateGeometryError("Points are collinear or coincident")

    normal = eigvecs[:, 0]
    if reference_normal is not None and np.dot(normal, reference_normal) < 0:
        normal = -normal
    elif reference_normal is None and normal[np.argmax(np.abs(normal))] < 0:
        normal = -normal
    normal /= np.linalg.norm(normal)
    return Plane(normal, float(normal @ centroid))


def planarize_mesh(mesh: TriMesh, instances: Sequence[PlaneInstance]) -> TriMesh:
    """
    Snap every labeled vertex onto the plane of its instance.

    Vertices without an instance are dropped with their faces, as are faces
    connecting two different instances. Surviving vertices take their plane's
    normal.

    Args:
        mesh: A labeled mesh.
        instances: Plane instances whose ids match the mesh labels.

    Returns:
        TriMesh: The planarized mesh, labels and embeddings carried over.
    """
    labels = mesh.labels_or_unassigned()
    planes = {inst.id: inst.plane for inst in instances}
    keep = np.isin(labels, list(planes)) if planes else np.zeros(len(labels), dtype=bool)
    if not keep.any():
        return TriMesh.empty()

    vertices = mesh.vertices.copy()
    normals = mesh.vertex_normals.copy()
    for pid, plane in planes.items():
        members = labels == pid
        if members.any():
            vertices[members] = plane.project(vertices[members])
            normals[members] = plane.normal

    snapped = TriMesh(
        vertices, mesh.faces, normals, mesh.vertex_labels, mesh.vertex_embeddings
    )
    out = snapped.submesh(keep, ~ambiguous_faces(mesh))
    logger.info(
        f"Planarized {int(keep.sum())} of {len(mesh.vertices)} vertices "
        f"onto {len(planes)} planes."
    )
    return out
