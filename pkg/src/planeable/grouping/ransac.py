from __future__ import annotations

from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as csgraph_components
from scipy.spatial.distance import cdist

from ..config import GroupingConfig
from ..errors import DegenerateGeometryError
from ..geometry import Plane
from ..mesh import UNASSIGNED, TriMesh
from ..planarize import fit_plane
from .instance import PlaneInstance, make_instance

logger = getLogger(__name__)

_SCORE_CHUNK = 32


def inlier_mask(
    points: ArrayLike,
    embeddings: ArrayLike | None,
    plane: Plane,
    proposal_embedding: ArrayLike | None,
    cfg: GroupingConfig,
) -> NDArray[np.bool_]:
    """Vectorized `is_inlier` over (N, 3) points and (N, D) embeddings."""
    close = np.abs(plane.signed_distance(points)) < cfg.r_d
    if not cfg.use_embeddings:
        return close
    if embeddings is None or proposal_embedding is None:
        raise ValueError("Embedding-gated inliers need vertex and proposal embeddings")
    e = np.asarray(embeddings, dtype=np.float64)
    dist = np.linalg.norm(e - np.asarray(proposal_embedding, dtype=np.float64), axis=-1)
    return close & (dist < cfg.r_e)


def is_inlier(
    point: ArrayLike,
    embedding: ArrayLike | None,
    plane: Plane,
    proposal_embedding: ArrayLike | None,
    cfg: GroupingConfig,
) -> bool:
    """
    Whether a vertex supports a plane proposal.

    A vertex is an inlier when it lies closer than `r_d` to the plane and, with
    embeddings enabled, its embedding is closer than `r_e` to the proposal's.
    """
    emb = None if embedding is None else np.atleast_2d(embedding)
    return bool(
        inlier_mask(np.atleast_2d(point), emb, plane, proposal_embedding, cfg)[0]
    )


def _score_proposals(
    mesh: TriMesh, pool: NDArray[np.int64], seeds: NDArray[np.int64], cfg: GroupingConfig
) -> NDArray[np.int64]:
    points = mesh.vertices[pool]
    counts = np.zeros(len(seeds), dtype=np.int64)
    for start in range(0, len(seeds), _SCORE_CHUNK):
        chunk = seeds[start : start + _SCORE_CHUNK]
        normals = mesh.vertex_normals[chunk]
        offsets = np.einsum("ij,ij->i", normals, mesh.vertices[chunk])
        hits = np.abs(points @ normals.T - offsets) < cfg.r_d
        if cfg.use_embeddings:
            hits &= (
                cdist(mesh.vertex_embeddings[pool], mesh.vertex_embeddings[chunk])
                < cfg.r_e
            )
        counts[start : start + len(chunk)] = hits.sum(axis=0)
    return counts


def sequential_ransac(
    mesh: TriMesh, cfg: GroupingConfig
) -> tuple[list[PlaneInstance], NDArray[np.int64]]:
    """
    Find planes one at a time, removing each plane's inliers from the pool.

    Every round samples `proposals_per_round` seed vertices from the unassigned
    pool. A seed's position and normal define a plane proposal and its embedding
    the proposal embedding. The proposal with the most inliers is committed and
    refit to its inliers by least squares.

    Args:
        mesh: Mesh with normals, and embeddings when `cfg.use_embeddings` is set.
        cfg: Thresholds and sampling budget.

    Returns:
        tuple: The committed instances and (V,) labels (-1 for unassigned vertices).
    """
    n = len(mesh.vertices)
    labels = np.full(n, UNASSIGNED, dtype=np.int64)
    instances: list[PlaneInstance] = []
    if n == 0:
        return instances, labels
    if cfg.use_embeddings and mesh.vertex_embeddings is None:
        raise ValueError("sequential_ransac with embeddings needs vertex embeddings")

    rng = np.random.default_rng(cfg.rng_seed)
    pool = np.arange(n)

    for round_idx in range(cfg.max_iterations):
        if len(pool) == 0:
            break
        seeds = rng.choice(pool, size=min(cfg.proposals_per_round, len(pool)), replace=False)
        counts = _score_proposals(mesh, pool, seeds, cfg)
        best = int(np.argmax(counts))
        if counts[best] < cfg.min_vertices:
            logger.debug(f"RANSAC round {round_idx}: best consensus {counts[best]}; stopping.")
            break

        seed = seeds[best]
        proposal = Plane.from_point_normal(mesh.vertices[seed], mesh.vertex_normals[seed])
        mask = inlier_mask(
            mesh.vertices[pool],
            None if mesh.vertex_embeddings is None else mesh.vertex_embeddings[pool],
            proposal,
            None if mesh.vertex_embeddings is None else mesh.vertex_embeddings[seed],
            cfg,
        )
        inliers = pool[mask]
        instance = make_instance(mesh, len(instances), inliers)
        try:
            instance.plane = fit_plane(mesh.vertices[inliers], proposal.normal)
        except DegenerateGeometryError:
            instance.plane = proposal
        instances.append(instance)
        labels[inliers] = instance.id
        pool = pool[~mask]
        logger.debug(
            f"RANSAC round {round_idx}: committed plane {instance.id} with "
            f"{len(inliers)} inliers, {len(pool)} vertices left."
        )

    logger.info(f"Sequential RANSAC found {len(instances)} planes.")
    return instances, labels


def merge_planes(
    instances: list[PlaneInstance], mesh: TriMesh, cfg: GroupingConfig
) -> list[PlaneInstance]:
    """
    Transitively merge planes with similar mean embeddings and normals.

    Two planes are linked when their mean embeddings are closer than
    `merge_emb` and their mean normals have a dot product above
    `merge_normal_dot`. Each linked group becomes one instance, refit to the
    union of its vertices and keeping the smallest id of the group.

    Args:
        instances: Instances carrying mean embeddings.
        mesh: The mesh the instances refer to.
        cfg: Merge thresholds.

    Returns:
        list[PlaneInstance]: The merged instances ordered by id.
    """
    if len(instances) < 2:
        return list(instances)
    if any(inst.mean_embedding is None for inst in instances):
        raise ValueError("merge_planes needs instances with mean embeddings")

    emb = np.stack([inst.mean_embedding for inst in instances])
    nrm = np.stack([inst.mean_normal for inst in instances])
    linked = (cdist(emb, emb) < cfg.merge_emb) & (nrm @ nrm.T > cfg.merge_normal_dot)
    rows, cols = np.nonzero(np.triu(linked, k=1))
    k = len(instances)
    graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(k, k))
    n_groups, group = csgraph_components(graph, directed=False)
    if n_groups == k:
        return list(instances)

    merged = []
    for g in range(n_groups):
        members = [instances[i] for i in np.flatnonzero(group == g)]
        if len(members) == 1:
            merged.append(members[0])
            continue
        ids = np.concatenate([m.vertex_ids for m in members])
        merged.append(make_instance(mesh, min(m.id for m in members), ids))
        logger.debug(f"Merged planes {[m.id for m in members]}.")
    merged.sort(key=lambda inst: inst.id)
    logger.info(f"Merged {k} planes into {len(merged)}.")
    return merged
