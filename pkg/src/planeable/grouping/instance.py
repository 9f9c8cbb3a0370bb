from __future__ import annotations

from dataclasses import dataclass, field
from logging import getLogger
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..errors import DegenerateGeometryError
from ..geometry import Plane, normalize_rows
from ..mesh import UNASSIGNED, TriMesh
from ..planarize import fit_plane

logger = getLogger(__name__)


@dataclass
class PlaneInstance:
    """
    A plane of the decomposition and the vertices assigned to it.

    Attributes:
        id: Instance id, equal to the vertex label it owns.
        plane: Fitted plane equation.
        vertex_ids: Sorted indices of member vertices.
        mean_normal: Unit mean of the member vertex normals.
        mean_embedding: Mean member embedding, None when the mesh has no embeddings.
    """

    id: int
    plane: Plane
    vertex_ids: NDArray[np.int64]
    mean_normal: NDArray[np.float64]
    mean_embedding: NDArray[np.float64] | None = field(default=None)

    @property
    def vertex_count(self) -> int:
        return len(self.vertex_ids)

    def to_dict(self) -> dict[str, Any]:
        """Plain-data summary used by the instances sidecar."""
        return {
            "id": int(self.id),
            "normal": [float(c) for c in self.plane.normal],
            "offset": float(self.plane.offset),
            "vertex_count": self.vertex_count,
            "mean_normal": [float(c) for c in self.mean_normal],
            "mean_embedding": None
            if self.mean_embedding is None
            else [float(c) for c in self.mean_embedding],
        }


def make_instance(mesh: TriMesh, instance_id: int, vertex_ids: ArrayLike) -> PlaneInstance:
    """
    Fit a plane and means to a set of mesh vertices.

    Degenerate vertex sets fall back to the plane through their centroid with
    their mean normal.
    """
    ids = np.sort(np.asarray(vertex_ids, dtype=np.int64))
    points = mesh.vertices[ids]
    mean_normal = normalize_rows(mesh.vertex_normals[ids].mean(axis=0, keepdims=True))[0]
    try:
        plane = fit_plane(points, reference_normal=mean_normal)
    except DegenerateGeometryError:
        logger.warning(
            f"Plane {instance_id} with {len(ids)} vertices is degenerate; "
            f"using its mean normal."
        )
        plane = Plane.from_point_normal(points.mean(axis=0), mean_normal)
    embedding = None
    if mesh.vertex_embeddings is not None:
        embedding = mesh.vertex_embeddings[ids].mean(axis=0)
    return PlaneInstance(instance_id, plane, ids, mean_normal, embedding)


def build_instances(mesh: TriMesh, labels: ArrayLike) -> list[PlaneInstance]:
    """
    One instance per non-negative label, ordered by label.

    Args:
        mesh: The mesh the labels refer to.
        labels: (V,) vertex labels.

    Returns:
        list[PlaneInstance]: Fitted instances.
    """
    lab = np.asarray(labels, dtype=np.int64)
    order = np.argsort(lab, kind="stable")
    sorted_labels = lab[order]
    uniq, starts = np.unique(sorted_labels, return_index=True)
    bounds = np.append(starts, len(lab))
    return [
        make_instance(mesh, int(label), order[bounds[k] : bounds[k + 1]])
        for k, label in enumerate(uniq)
        if label != UNASSIGNED
    ]


def labels_from_instances(
    instances: list[PlaneInstance], n_vertices: int
) -> NDArray[np.int64]:
    """Per-vertex labels with every instance's vertices set to its id."""
    labels = np.full(n_vertices, UNASSIGNED, dtype=np.int64)
    for inst in instances:
        labels[inst.vertex_ids] = inst.id
    return labels


def compact_labels(labels: ArrayLike) -> NDArray[np.int64]:
    """Renumber non-negative labels to 0..k-1 keeping their order; -1 stays."""
    lab = np.asarray(labels, dtype=np.int64)
    out = np.full_like(lab, UNASSIGNED)
    assigned = lab != UNASSIGNED
    _, inverse = np.unique(lab[assigned], return_inverse=True)
    out[assigned] = inverse
    return out
