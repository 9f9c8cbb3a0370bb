from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, replace
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import linear_sum_assignment

from ..mesh import UNASSIGNED, TriMesh
from .instance import PlaneInstance

logger = getLogger(__name__)


def min_cost_assignment(
    cost: ArrayLike,
) -> tuple[NDArray[np.int64], NDArray[np.int64], float]:
    """
    Solve the rectangular linear assignment problem.

    Args:
        cost: (R, C) cost matrix.

    Returns:
        tuple: Matched row indices, matched column indices and the total cost.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, 0.0
    rows, cols = linear_sum_assignment(c)
    return rows.astype(np.int64), cols.astype(np.int64), float(c[rows, cols].sum())


def iou_cost(
    previous: Sequence[NDArray[np.int64]], current: Sequence[NDArray[np.int64]]
) -> NDArray[np.float64]:
    """`1 - IoU` between every pair of vertex-index sets."""
    cost = np.ones((len(previous), len(current)))
    for i, a in enumerate(previous):
        for j, b in enumerate(current):
            inter = len(np.intersect1d(a, b, assume_unique=True))
            if inter:
                cost[i, j] = 1.0 - inter / (len(a) + len(b) - inter)
    return cost


def _match_sets(
    previous_ids: Sequence[int],
    previous_sets: Sequence[NDArray[np.int64]],
    current_ids: Sequence[int],
    current_sets: Sequence[NDArray[np.int64]],
    next_id: int,
) -> tuple[dict[int, int], int]:
    mapping: dict[int, int] = {}
    cost = iou_cost(previous_sets, current_sets)
    rows, cols, _ = min_cost_assignment(cost)
    for r, c in zip(rows, cols):
        if cost[r, c] < 1.0:
            mapping[int(current_ids[c])] = int(previous_ids[r])
    for cid in current_ids:
        if int(cid) not in mapping:
            mapping[int(cid)] = next_id
            next_id += 1
    return mapping, next_id


def track_planes(
    previous: Sequence[PlaneInstance],
    current: Sequence[PlaneInstance],
    next_id: int | None = None,
) -> dict[int, int]:
    """
    Carry plane ids from one grouping to the next.

    Previous and current planes are matched by a minimum-cost assignment on
    `1 - IoU` of their vertex sets, which must index the same vertices. Matched
    current planes inherit the previous id; pairs without overlap are never
    matched. Unmatched current planes get fresh ids starting at `next_id`
    (default: one past the largest previous id).

    Args:
        previous: Planes of the earlier grouping.
        current: Planes of the new grouping.
        next_id: First fresh id.

    Returns:
        dict[int, int]: Maps every current id to its tracked id.
    """
    if next_id is None:
        next_id = max((p.id for p in previous), default=-1) + 1
    mapping, _ = _match_sets(
        [p.id for p in previous],
        [p.vertex_ids for p in previous],
        [c.id for c in current],
        [c.vertex_ids for c in current],
        next_id,
    )
    return mapping


def relabel(
    instances: Sequence[PlaneInstance], labels: ArrayLike, mapping: dict[int, int]
) -> tuple[list[PlaneInstance], NDArray[np.int64]]:
    """Apply an id mapping to instances and vertex labels."""
    lab = np.asarray(labels, dtype=np.int64)
    out = np.full_like(lab, UNASSIGNED)
    for old, new in mapping.items():
        out[lab == old] = new
    renamed = [replace(inst, id=mapping.get(inst.id, inst.id)) for inst in instances]
    return renamed, out


@dataclass
class _Track:
    points: NDArray[np.float64]
    last_seen: int


class PlaneTracker:
    """
    Keeps plane ids stable across the groupings of an online run.

    Each new mesh is re-extracted, so a tracked plane is remembered by the
    vertex positions it last covered. New planes are matched in two rounds:
    first against the planes of the previous update, then the leftovers against
    dormant tracks, i.e. planes unseen for at most `max_age` updates. A plane
    that drops out of the grouping for a few keyframes therefore regains its id.
    Older tracks retire and their ids are never reused.

    Matching uses the vertex-set IoU on the new mesh after carrying the
    tracked labels over by nearest neighbour within `max_distance`.
    """

    def __init__(self, max_distance: float = 0.1, max_age: int = 10):
        self.max_distance = max_distance
        self.max_age = max_age
        self.next_id = 0
        self.n_updates = 0
        self.tracks: dict[int, _Track] = {}

    def _carry(
        self, vertices: NDArray[np.float64], track_ids: Sequence[int]
    ) -> tuple[list[int], list[NDArray[np.int64]]]:
        from ..metrics import nearest_neighbors

        if not track_ids or not len(vertices):
            return [], []
        points = np.concatenate([self.tracks[t].points for t in track_ids])
        owners = np.concatenate(
            [np.full(len(self.tracks[t].points), t, dtype=np.int64) for t in track_ids]
        )
        idx, dist = nearest_neighbors(vertices, points)
        carried = np.where(dist <= self.max_distance, owners[idx], UNASSIGNED)
        ids = [int(t) for t in np.unique(carried[carried != UNASSIGNED])]
        return ids, [np.flatnonzero(carried == t) for t in ids]

    def update(
        self, mesh: TriMesh, instances: Sequence[PlaneInstance], labels: ArrayLike
    ) -> tuple[list[PlaneInstance], NDArray[np.int64]]:
        """
        Rename the planes of a new grouping to the tracked ids.

        Args:
            mesh: The mesh the new grouping refers to.
            instances: The new planes.
            labels: (V,) labels of the new grouping.

        Returns:
            tuple: Renamed instances and labels.
        """
        lab = np.asarray(labels, dtype=np.int64)
        now = self.n_updates
        active = [t for t, tr in self.tracks.items() if tr.last_seen == now - 1]
        dormant = [t for t, tr in self.tracks.items() if tr.last_seen < now - 1]

        mapping: dict[int, int] = {}
        pending = list(instances)
        for pool in (active, dormant):
            if not pending:
                break
            ids, sets = self._carry(mesh.vertices, pool)
            cost = iou_cost(sets, [inst.vertex_ids for inst in pending])
            rows, cols, _ = min_cost_assignment(cost)
            for r, c in zip(rows, cols):
                if cost[r, c] < 1.0:
                    mapping[pending[c].id] = ids[r]
            pending = [inst for inst in pending if inst.id not in mapping]
        for inst in pending:
            mapping[inst.id] = self.next_id
            self.next_id += 1

        renamed, out = relabel(instances, lab, mapping)
        for inst in renamed:
            self.tracks[inst.id] = _Track(mesh.vertices[inst.vertex_ids].copy(), now)
        retired = [t for t, tr in self.tracks.items() if now - tr.last_seen > self.max_age]
        for t in retired:
            del self.tracks[t]
        self.n_updates += 1
        logger.debug(
            f"Tracked {len(instances)} planes: {len(pending)} new, "
            f"{len(self.tracks)} live tracks, {len(retired)} retired."
        )
        return renamed, out
