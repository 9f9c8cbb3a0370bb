from logging import getLogger

import numpy as np
from numpy.typing import NDArray

from ..config import GroupingConfig
from ..enums import Grouping
from ..mesh import UNASSIGNED, TriMesh
from .instance import (
    PlaneInstance,
    build_instances,
    compact_labels,
    labels_from_instances,
    make_instance,
)
from .meanshift import mean_shift_grouping, mean_shift_modes
from .postprocess import (
    finalize_planes,
    propagate_labels,
    remove_small_planes,
    split_by_connectivity,
)
from .ransac import inlier_mask, is_inlier, merge_planes, sequential_ransac
from .tracking import PlaneTracker, iou_cost, min_cost_assignment, relabel, track_planes

logger = getLogger(__name__)


def group_planes(
    mesh: TriMesh,
    cfg: GroupingConfig,
    method: Grouping = Grouping.RANSAC,
    propagate: bool = True,
) -> tuple[list[PlaneInstance], NDArray[np.int64]]:
    """
    Cluster mesh vertices into plane instances.

    The RANSAC chain runs sequential RANSAC, merges similar planes (only when
    embeddings are used), then splits by connectivity, propagates labels,
    removes small planes and refits. The mean-shift chain clusters embeddings
    and shares the same tail.

    Args:
        mesh: Mesh with normals, and embeddings unless RANSAC is geometry-only.
        cfg: Grouping thresholds.
        method: `Grouping.RANSAC` or `Grouping.MEANSHIFT`.
        propagate: Whether to propagate labels into unassigned vertices.

    Returns:
        tuple: Final instances with ids 0..k-1, and (V,) labels.
    """
    if not len(mesh.vertices):
        return [], np.full(0, UNASSIGNED, dtype=np.int64)

    match Grouping(method):
        case Grouping.MEANSHIFT:
            return mean_shift_grouping(mesh, cfg, propagate)
        case Grouping.RANSAC:
            instances, labels = sequential_ransac(mesh, cfg)
            if cfg.use_embeddings:
                instances = merge_planes(instances, mesh, cfg)
                labels = labels_from_instances(instances, len(mesh.vertices))
            instances, labels = finalize_planes(mesh, labels, cfg.min_vertices, propagate)
            logger.info(f"RANSAC grouping produced {len(instances)} planes.")
            return instances, labels


__all__ = [
    "PlaneInstance",
    "PlaneTracker",
    "build_instances",
    "compact_labels",
    "finalize_planes",
    "group_planes",
    "inlier_mask",
    "iou_cost",
    "is_inlier",
    "labels_from_instances",
    "make_instance",
    "mean_shift_grouping",
    "mean_shift_modes",
    "merge_planes",
    "min_cost_assignment",
    "propagate_labels",
    "relabel",
    "remove_small_planes",
    "sequential_ransac",
    "split_by_connectivity",
    "track_planes",
]
