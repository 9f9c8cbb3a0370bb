from __future__ import annotations

from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..mesh import UNASSIGNED, TriMesh, connected_components
from .instance import PlaneInstance, build_instances, compact_labels

logger = getLogger(__name__)


def split_by_connectivity(mesh: TriMesh, labels: ArrayLike) -> NDArray[np.int64]:
    """Give every edge-connected island of a label its own label."""
    return connected_components(mesh, labels)


def propagate_labels(mesh: TriMesh, labels: ArrayLike) -> NDArray[np.int64]:
    """
    Grow labels into connected unlabeled vertices, one ring per round.

    In every round each unlabeled vertex with at least one labeled neighbour takes
    the most frequent label among its labeled neighbours, ties going to the lowest
    label. Rounds repeat until no vertex changes. Unlabeled regions without a
    labeled vertex stay -1.

    Args:
        mesh: The mesh providing face-edge adjacency.
        labels: (V,) labels, -1 for unlabeled.

    Returns:
        NDArray: (V,) propagated labels.
    """
    lab = np.array(labels, dtype=np.int64)
    e = mesh.edges()
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])

    for round_idx in range(len(lab)):
        frontier = (lab[dst] == UNASSIGNED) & (lab[src] != UNASSIGNED)
        if not frontier.any():
            break
        votes, counts = np.unique(
            np.stack([dst[frontier], lab[src[frontier]]], axis=1),
            axis=0,
            return_counts=True,
        )
        # Per vertex: most votes first, then lowest label
        order = np.lexsort((votes[:, 1], -counts, votes[:, 0]))
        votes = votes[order]
        _, first = np.unique(votes[:, 0], return_index=True)
        lab[votes[first, 0]] = votes[first, 1]
        logger.debug(f"Propagation round {round_idx}: {len(first)} vertices labeled.")
    return lab


def remove_small_planes(
    instances: list[PlaneInstance], labels: ArrayLike, min_vertices: int
) -> tuple[list[PlaneInstance], NDArray[np.int64]]:
    """
    Drop instances with fewer than `min_vertices` vertices.

    Returns:
        tuple: The kept instances and labels where dropped vertices are -1.
    """
    lab = np.array(labels, dtype=np.int64)
    kept = [inst for inst in instances if inst.vertex_count >= min_vertices]
    dropped = [inst.id for inst in instances if inst.vertex_count < min_vertices]
    if dropped:
        lab[np.isin(lab, dropped)] = UNASSIGNED
        logger.debug(f"Removed {len(dropped)} planes below {min_vertices} vertices.")
    return kept, lab


def finalize_planes(
    mesh: TriMesh, labels: ArrayLike, min_vertices: int, propagate: bool = True
) -> tuple[list[PlaneInstance], NDArray[np.int64]]:
    """
    Shared tail of both grouping methods.

    Splits labels into connected islands, optionally propagates them into
    unlabeled vertices, removes planes below `min_vertices` and renumbers the
    survivors 0..k-1 with freshly fitted instances.
    """
    lab = split_by_connectivity(mesh, labels)
    if propagate:
        lab = propagate_labels(mesh, lab)
    assigned = lab != UNASSIGNED
    counts = np.bincount(lab[assigned]) if assigned.any() else np.zeros(0, dtype=np.int64)
    small = np.flatnonzero((counts > 0) & (counts < min_vertices))
    lab[np.isin(lab, small)] = UNASSIGNED
    lab = compact_labels(lab)
    return build_instances(mesh, lab), lab
