import numpy as np

from planeable.grouping import (
    build_instances,
    finalize_planes,
    propagate_labels,
    remove_small_planes,
    split_by_connectivity,
)
from planeable.mesh import UNASSIGNED, TriMesh


def chain(n):
    """Vertices 0..n-1 joined in a path by degenerate faces."""
    vertices = np.stack([np.arange(n, dtype=float), np.zeros(n), np.zeros(n)], axis=1)
    faces = np.array([[i, i + 1, i + 1] for i in range(n - 1)])
    return TriMesh(vertices, faces)


def fan(n_spokes=6):
    """A hub vertex 0 surrounded by a ring of spokes."""
    angles = np.linspace(0, 2 * np.pi, n_spokes, endpoint=False)
    vertices = np.vstack([[0.0, 0.0, 0.0], np.stack([np.cos(angles), np.sin(angles), np.zeros(n_spokes)], axis=1)])
    faces = np.array([[0, 1 + k, 1 + (k + 1) % n_spokes] for k in range(n_spokes)])
    return TriMesh(vertices, faces)


class TestSplitByConnectivity:
    def test_contiguous_unchanged(self):
        labels = np.array([0, 0, 0, 1, 1])
        assert split_by_connectivity(chain(5), labels).tolist() == [0, 0, 0, 1, 1]

    def test_two_islands(self):
        out = split_by_connectivity(chain(5), [0, 0, 1, 0, 0])
        assert out[0] == out[1]
        assert out[3] == out[4]
        assert out[0] != out[3]

    def test_all_unassigned(self):
        labels = np.full(4, UNASSIGNED)
        assert (split_by_connectivity(chain(4), labels) == UNASSIGNED).all()


class TestPropagateLabels:
    def test_fully_labeled(self):
        labels = np.array([2, 2, 5, 5])
        assert propagate_labels(chain(4), labels).tolist() == [2, 2, 5, 5]

    def test_surrounded_vertex(self):
        labels = np.full(7, 3)
        labels[0] = UNASSIGNED
        assert propagate_labels(fan(), labels)[0] == 3

    def test_chain_rounds(self):
        assert propagate_labels(chain(4), [1, -1, -1, 2]).tolist() == [1, 1, 2, 2]

    def test_majority_then_lowest(self):
        labels = np.array([UNASSIGNED, 4, 4, 7, 7, 7, 9])
        assert propagate_labels(fan(), labels)[0] == 7
        tie = np.array([UNASSIGNED, 4, 4, 4, 7, 7, 7])
        assert propagate_labels(fan(), tie)[0] == 4

    def test_isolated_component_stays(self):
        a = chain(3)
        mesh = TriMesh(
            np.vstack([a.vertices, a.vertices + 10]),
            np.vstack([a.faces, a.faces + 3]),
        )
        out = propagate_labels(mesh, [0, -1, -1, -1, -1, -1])
        assert out.tolist() == [0, 0, 0, -1, -1, -1]

    def test_grows_over_many_rounds(self):
        labels = np.full(10, UNASSIGNED)
        labels[0] = 6
        assert (propagate_labels(chain(10), labels) == 6).all()


class TestRemoveSmallPlanes:
    def test_boundary(self):
        mesh = chain(199)
        labels = np.repeat([0, 1], [99, 100])
        instances = build_instances(mesh, labels)
        kept, out = remove_small_planes(instances, labels, 100)
        assert [inst.id for inst in kept] == [1]
        assert (out[:99] == UNASSIGNED).all()
        assert (out[99:] == 1).all()

    def test_empty(self):
        kept, out = remove_small_planes([], np.zeros(0, dtype=int), 100)
        assert kept == [] and len(out) == 0


class TestFinalizePlanes:
    def test_renumbers_and_fits(self):
        mesh = chain(30)
        labels = np.repeat([5, 9, 12], [10, 15, 5])
        instances, out = finalize_planes(mesh, labels, min_vertices=8)
        assert [inst.id for inst in instances] == [0, 1]
        assert out[:10].tolist() == [0] * 10
        assert out[10:25].tolist() == [1] * 15
        assert (out[25:] == UNASSIGNED).all()

    def test_propagation_fills_before_small_removal(self):
        mesh = chain(12)
        labels = np.full(12, UNASSIGNED)
        labels[:4] = 0
        instances, out = finalize_planes(mesh, labels, min_vertices=10)
        assert len(instances) == 1
        assert (out == 0).all()
        _, unpropagated = finalize_planes(mesh, labels, min_vertices=10, propagate=False)
        assert (unpropagated == UNASSIGNED).all()
