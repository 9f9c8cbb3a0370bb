from pathlib import Path
from unittest.mock import patch

import numpy as np
from pytest import approx, fixture, raises

from planeable.errors import DegenerateGeometryError
from planeable.mesh import (
    UNASSIGNED,
    TriMesh,
    ambiguous_faces,
    connected_components,
    sample_mesh_surface,
)


def grid_mesh(nx: int, ny: int, spacing: float = 1.0, offset=(0.0, 0.0)) -> TriMesh:
    """A flat triangulated (nx+1) x (ny+1) vertex grid in the z = 0 plane."""
    xs, ys = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1), indexing="ij")
    vertices = np.stack(
        [xs.ravel() * spacing + offset[0], ys.ravel() * spacing + offset[1], np.zeros(xs.size)],
        axis=1,
    )
    faces = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = a + ny + 1
            faces += [[a, b, b + 1], [a, b + 1, a + 1]]
    return TriMesh(vertices, np.array(faces))


@fixture
def square():
    return TriMesh(
        np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]),
        np.array([[0, 1, 2], [0, 2, 3]]),
    )


class TestTriMesh:
    def test_normals_from_faces(self, square):
        assert square.vertex_normals == approx(np.tile([0.0, 0.0, 1.0], (4, 1)))

    def test_rejects_bad_face_index(self):
        with raises(ValueError):
            TriMesh(np.zeros((3, 3)), np.array([[0, 1, 3]]))

    def test_rejects_non_unit_normals(self, square):
        with raises(ValueError):
            TriMesh(square.vertices, square.faces, np.tile([0.0, 0.0, 2.0], (4, 1)))

    def test_rejects_label_length(self, square):
        with raises(ValueError):
            square.with_labels([0, 1])

    def test_edges_and_adjacency(self, square):
        assert square.edges().tolist() == [[0, 1], [0, 2], [0, 3], [1, 2], [2, 3]]
        adj = square.adjacency()
        assert adj.shape == (4, 4)
        assert adj.nnz == 10
        assert (adj != adj.T).nnz == 0

    def test_face_areas(self, square):
        assert square.face_areas() == approx([0.5, 0.5])

    def test_submesh(self, square):
        labelled = square.with_labels([0, 0, 0, 1])
        sub = labelled.submesh(np.array([True, True, True, False]), np.ones(2, dtype=bool))
        assert len(sub) == 3
        assert sub.faces.tolist() == [[0, 1, 2]]
        assert sub.vertex_labels.tolist() == [0, 0, 0]

    def test_empty(self):
        mesh = TriMesh.empty()
        assert mesh.is_empty
        assert len(mesh.edges()) == 0
        assert mesh.labels_or_unassigned().shape == (0,)

    def test_write_dispatches_on_extension(self, square):
        with patch("planeable.registry.WRITERS", {".ply": lambda mesh, path: None}) as writers:
            square.write(Path("out.ply"))
            assert ".ply" in writers
        with raises(ValueError):
            square.write(Path("out.xyz"))

    def test_read_unknown_extension(self):
        with raises(ValueError):
            TriMesh.read("mesh.stl")


class TestConnectedComponents:
    def test_single_plane(self):
        mesh = grid_mesh(3, 3)
        out = connected_components(mesh, np.full(len(mesh), 7))
        assert set(out.tolist()) == {0}

    def test_label_split_into_islands(self):
        a = grid_mesh(2, 2)
        b = grid_mesh(2, 2, offset=(10.0, 0.0))
        mesh = TriMesh(np.vstack([a.vertices, b.vertices]), np.vstack([a.faces, b.faces + len(a)]))
        out = connected_components(mesh, np.zeros(len(mesh), dtype=int))
        assert len(set(out[: len(a)])) == 1
        assert len(set(out[len(a) :])) == 1
        assert out[0] != out[-1]

    def test_disconnected_vertices(self):
        mesh = TriMesh(np.random.default_rng(0).random((5, 3)), np.zeros((0, 3), dtype=int))
        out = connected_components(mesh, np.zeros(5, dtype=int))
        assert out.tolist() == [0, 1, 2, 3, 4]

    def test_unassigned_stays(self):
        mesh = grid_mesh(2, 2)
        labels = np.zeros(len(mesh), dtype=int)
        labels[4] = UNASSIGNED
        out = connected_components(mesh, labels)
        assert out[4] == UNASSIGNED
        assert (out[np.arange(len(mesh)) != 4] >= 0).all()

    def test_idempotent(self):
        mesh = grid_mesh(6, 6)
        labels = np.random.default_rng(3).integers(0, 3, len(mesh))
        once = connected_components(mesh, labels)
        twice = connected_components(mesh, once)
        assert (once == twice).all()

    def test_length_mismatch(self):
        with raises(ValueError):
            connected_components(grid_mesh(1, 1), [0])


class TestSampleMeshSurface:
    def test_centroid(self, square):
        cloud = sample_mesh_surface(square, 10_000, rng_seed=1)
        assert len(cloud) == 10_000
        assert abs(cloud.points[:, 0].mean() - 0.5) < 0.02
        assert abs(cloud.points[:, 1].mean() - 0.5) < 0.02

    def test_deterministic(self, square):
        a = sample_mesh_surface(square, 500, rng_seed=4)
        b = sample_mesh_surface(square, 500, rng_seed=4)
        assert np.array_equal(a.points, b.points)

    def test_zero_points(self, square):
        assert len(sample_mesh_surface(square, 0)) == 0

    def test_all_faces_ambiguous(self, square):
        mesh = square.with_labels([0, 1, 2, 3])
        assert ambiguous_faces(mesh).all()
        assert len(sample_mesh_surface(mesh, 100, exclude_ambiguous_faces=True)) == 0

    def test_labels_follow_faces(self, square):
        mesh = square.with_labels([5, 5, 5, 9])
        cloud = sample_mesh_surface(mesh, 200, exclude_ambiguous_faces=True)
        assert set(cloud.labels.tolist()) == {5}
        # only the first triangle (x >= y) is sampled
        assert (cloud.points[:, 0] >= cloud.points[:, 1] - 1e-12).all()

    def test_zero_area(self):
        mesh = TriMesh(np.zeros((3, 3)), np.array([[0, 1, 2]]), np.tile([0.0, 0.0, 1.0], (3, 1)))
        with raises(DegenerateGeometryError):
            sample_mesh_surface(mesh, 10)

    def test_no_faces(self):
        with raises(DegenerateGeometryError):
            sample_mesh_surface(TriMesh.empty(), 10)
