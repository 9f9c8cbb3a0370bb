from __future__ import annotations

from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree
from sklearn.cluster import get_bin_seeds

from ..config import GroupingConfig
from ..mesh import UNASSIGNED, TriMesh
from .instance import PlaneInstance
from .postprocess import finalize_planes

logger = getLogger(__name__)

_MAX_SHIFTS = 300


def mean_shift_modes(
    features: ArrayLike, bandwidth: float
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """
    Modes of a point set under a flat kernel.

    Seeds are the centres of occupied grid bins of size `bandwidth`. Each seed
    repeatedly moves to the mean of the points within `bandwidth` until it stops
    moving. Converged modes closer than `bandwidth / 2` to a better supported mode
    are discarded.

    Args:
        features: (N, D) points.
        bandwidth: Kernel radius.

    Returns:
        tuple: (K, D) modes ordered by decreasing support, and their supports.
    """
    x = np.asarray(features, dtype=np.float64)
    if not len(x):
        return np.zeros((0, x.shape[-1] if x.ndim == 2 else 0)), np.zeros(0, dtype=np.int64)

    tree = cKDTree(x)
    seeds = get_bin_seeds(x, bandwidth, min_bin_freq=1)
    stop = 1e-3 * bandwidth

    modes = []
    support = []
    for seed in seeds:
        mode = np.asarray(seed, dtype=np.float64)
        members: list[int] = []
        for _ in range(_MAX_SHIFTS):
            members = tree.query_ball_point(mode, r=bandwidth)
            if not members:
                break
            shifted = x[members].mean(axis=0)
            moved = np.linalg.norm(shifted - mode)
            mode = shifted
            if moved < stop:
                break
        if members:
            modes.append(mode)
            support.append(len(members))

    if not modes:
        return np.zeros((0, x.shape[1])), np.zeros(0, dtype=np.int64)

    modes_arr = np.asarray(modes)
    support_arr = np.asarray(support, dtype=np.int64)
    order = np.argsort(-support_arr, kind="stable")
    kept: list[int] = []
    for i in order:
        if all(np.linalg.norm(modes_arr[i] - modes_arr[k]) >= bandwidth / 2 for k in kept):
            kept.append(i)
    logger.debug(f"Mean-shift: {len(seeds)} seeds converged to {len(kept)} modes.")
    return modes_arr[kept], support_arr[kept]


def mean_shift_grouping(
    mesh: TriMesh, cfg: GroupingConfig, propagate: bool = True
) -> tuple[list[PlaneInstance], NDArray[np.int64]]:
    """
    Group vertices by mean-shift clustering of their embeddings.

    Every vertex joins its nearest mode. Clusters are then split into connected
    islands, fitted, propagated and filtered by size like the RANSAC chain.

    Args:
        mesh: Mesh with vertex embeddings.
        cfg: Uses `bandwidth` and `min_vertices`.
        propagate: Whether to run label propagation.

    Returns:
        tuple: Instances and (V,) labels.
    """
    n = len(mesh.vertices)
    if n == 0:
        return [], np.full(0, UNASSIGNED, dtype=np.int64)
    if mesh.vertex_embeddings is None:
        raise ValueError("mean_shift_grouping needs vertex embeddings")

    modes, _ = mean_shift_modes(mesh.vertex_embeddings, cfg.bandwidth)
    _, labels = cKDTree(modes).query(mesh.vertex_embeddings)
    instances, labels = finalize_planes(mesh, labels, cfg.min_vertices, propagate)
    logger.info(f"Mean-shift grouping found {len(instances)} planes from {len(modes)} modes.")
    return instances, labels
