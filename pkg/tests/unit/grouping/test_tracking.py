from itertools import permutations

import numpy as np
from pytest import approx

from planeable.geometry import Plane
from planeable.grouping import (
    PlaneInstance,
    PlaneTracker,
    iou_cost,
    min_cost_assignment,
    relabel,
    track_planes,
)
from planeable.mesh import TriMesh

UP = np.array([0.0, 0.0, 1.0])


def planes(*vertex_sets, first_id=0):
    return [
        PlaneInstance(first_id + k, Plane(UP, 0.0), np.asarray(ids, dtype=np.int64), UP)
        for k, ids in enumerate(vertex_sets)
    ]


class TestMinCostAssignment:
    def test_diagonal(self):
        rows, cols, total = min_cost_assignment([[1.0, 2.0], [2.0, 1.0]])
        assert dict(zip(rows.tolist(), cols.tolist())) == {0: 0, 1: 1}
        assert total == 2.0

    def test_matches_permutations(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            cost = rng.random((5, 5))
            _, _, total = min_cost_assignment(cost)
            brute = min(sum(cost[i, p[i]] for i in range(5)) for p in permutations(range(5)))
            assert total == approx(brute)

    def test_rectangular(self):
        rows, cols, _ = min_cost_assignment([[0.9, 0.1, 0.5]])
        assert rows.tolist() == [0] and cols.tolist() == [1]

    def test_empty(self):
        rows, cols, total = min_cost_assignment(np.zeros((0, 3)))
        assert len(rows) == 0 and len(cols) == 0 and total == 0.0


def test_iou_cost():
    cost = iou_cost([np.array([0, 1, 2, 3])], [np.array([2, 3, 4, 5]), np.array([9])])
    assert cost[0] == approx([1 - 2 / 6, 1.0])


class TestTrackPlanes:
    def test_identical_sets(self):
        prev = planes([0, 1, 2], [3, 4, 5], first_id=10)
        curr = planes([0, 1, 2], [3, 4, 5])
        assert track_planes(prev, curr) == {0: 10, 1: 11}

    def test_previous_empty(self):
        assert track_planes([], planes([0, 1], [2, 3])) == {0: 0, 1: 1}

    def test_no_overlap_gets_fresh_id(self):
        prev = planes([0, 1, 2], first_id=4)
        curr = planes([0, 1], [7, 8])
        assert track_planes(prev, curr) == {0: 4, 1: 5}

    def test_fresh_ids_start_at_next_id(self):
        assert track_planes(planes([0, 1]), planes([5, 6]), next_id=42) == {0: 42}

    def test_swap(self):
        prev = planes([0, 1, 2, 3], [4, 5, 6, 7])
        curr = planes([4, 5, 6], [0, 1, 2])
        assert track_planes(prev, curr) == {0: 1, 1: 0}


def test_relabel():
    insts = planes([0, 1], [2])
    renamed, labels = relabel(insts, [0, 0, 1, -1], {0: 7, 1: 3})
    assert [inst.id for inst in renamed] == [7, 3]
    assert labels.tolist() == [7, 7, 3, -1]


def two_strips(shift=0.0):
    xs = np.arange(10) * 0.1 + shift
    vertices = np.concatenate(
        [np.stack([xs, np.zeros(10), np.zeros(10)], axis=1), np.stack([xs, np.ones(10), np.zeros(10)], axis=1)]
    )
    return TriMesh(vertices, np.zeros((0, 3), dtype=int))


class TestPlaneTracker:
    def test_ids_stable_across_reextraction(self):
        tracker = PlaneTracker()
        mesh = two_strips()
        first, labels = tracker.update(mesh, planes(range(10), range(10, 20)), np.repeat([0, 1], 10))
        assert [p.id for p in first] == [0, 1]

        moved = two_strips(shift=0.02)
        # the new grouping numbers the planes the other way round
        second, labels = tracker.update(moved, planes(range(10, 20), range(10)), np.repeat([1, 0], 10))
        assert [p.id for p in second] == [1, 0]
        assert labels.tolist() == [0] * 10 + [1] * 10

    def test_new_plane_gets_new_id(self):
        tracker = PlaneTracker()
        mesh = two_strips()
        tracker.update(mesh, planes(range(10), range(10, 20)), np.repeat([0, 1], 10))
        far = TriMesh(np.vstack([mesh.vertices, mesh.vertices + [0, 0, 5]]), np.zeros((0, 3), dtype=int))
        insts = planes(range(10), range(10, 20), range(20, 40))
        out, labels = tracker.update(far, insts, np.repeat([0, 1, 2], [10, 10, 20]))
        assert [p.id for p in out] == [0, 1, 2]
        assert tracker.next_id == 3

    def test_lost_plane_id_not_reused(self):
        tracker = PlaneTracker()
        mesh = two_strips()
        tracker.update(mesh, planes(range(10), range(10, 20)), np.repeat([0, 1], 10))
        away = TriMesh(mesh.vertices + [0, 0, 5], np.zeros((0, 3), dtype=int))
        out, _ = tracker.update(away, planes(range(20)), np.zeros(20, dtype=int))
        assert [p.id for p in out] == [2]

    def test_plane_returning_after_a_gap_regains_its_id(self):
        tracker = PlaneTracker(max_age=3)
        mesh = two_strips()
        tracker.update(mesh, planes(range(10), range(10, 20)), np.repeat([0, 1], 10))
        # the second strip drops out of the grouping for two keyframes
        for _ in range(2):
            out, _ = tracker.update(mesh, planes(range(10)), np.repeat([0, -1], 10))
            assert [p.id for p in out] == [0]
        out, labels = tracker.update(mesh, planes(range(10, 20), range(10)), np.repeat([1, 0], 10))
        assert [p.id for p in out] == [1, 0]
        assert labels.tolist() == [0] * 10 + [1] * 10
        assert tracker.next_id == 2

    def test_track_retires_after_max_age(self):
        tracker = PlaneTracker(max_age=1)
        mesh = two_strips()
        tracker.update(mesh, planes(range(10), range(10, 20)), np.repeat([0, 1], 10))
        tracker.update(mesh, planes(range(10)), np.repeat([0, -1], 10))
        assert 1 in tracker.tracks
        tracker.update(mesh, planes(range(10)), np.repeat([0, -1], 10))
        assert 1 not in tracker.tracks
        out, _ = tracker.update(mesh, planes(range(10), range(10, 20)), np.repeat([0, 1], 10))
        assert [p.id for p in out] == [0, 2]

    def test_plane_entering_mid_sequence(self):
        tracker = PlaneTracker()
        mesh = two_strips()
        both = planes(range(10), range(10, 20))
        for _ in range(2):
            out, _ = tracker.update(mesh, both, np.repeat([0, 1], 10))
            assert [p.id for p in out] == [0, 1]
        wider = TriMesh(np.vstack([mesh.vertices, mesh.vertices[:10] + [0, 2, 0]]), mesh.faces)
        three = planes(range(20, 30), range(10), range(10, 20))
        for _ in range(2):
            out, labels = tracker.update(wider, three, np.repeat([1, 2, 0], 10))
            assert [p.id for p in out] == [2, 0, 1]
            assert labels.tolist() == [0] * 10 + [1] * 10 + [2] * 10
