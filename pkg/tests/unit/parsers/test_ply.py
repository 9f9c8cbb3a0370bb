import numpy as np
from pytest import approx, fixture, raises

from planeable.errors import MeshFormatError, MissingPlaneIdError
from planeable.mesh import TriMesh
from planeable.parsers import load_mesh_ply
from planeable.views import create_mesh_ply

ASCII_PLY = """ply
format ascii 1.0
comment two triangles
element vertex 4
property float x
property float y
property float z
property int plane_id
element face 2
property list uchar int vertex_indices
end_header
0 0 0 3
1 0 0 3
1 1 0 5
0 1 0 -1
3 0 1 2
3 0 2 3
"""


@fixture
def mesh():
    return TriMesh(
        np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float),
        np.array([[0, 1, 2], [0, 2, 3]]),
        vertex_labels=np.array([0, 0, 1, -1]),
        vertex_embeddings=np.array([[0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5], [1, 1, 1]]),
    )


def test_load_ascii(tmp_path):
    path = tmp_path / "gt.ply"
    path.write_text(ASCII_PLY)
    loaded = load_mesh_ply(path, require_plane_id=True)
    assert loaded.faces.tolist() == [[0, 1, 2], [0, 2, 3]]
    assert loaded.vertex_labels.tolist() == [3, 3, 5, -1]
    assert loaded.vertex_normals == approx(np.tile([0.0, 0.0, 1.0], (4, 1)))
    assert loaded.vertex_embeddings is None


def test_binary_round_trip(tmp_path, mesh):
    path = tmp_path / "mesh.ply"
    path.write_bytes(create_mesh_ply(mesh))
    loaded = load_mesh_ply(path)
    assert loaded.vertices == approx(mesh.vertices)
    assert loaded.faces.tolist() == mesh.faces.tolist()
    assert loaded.vertex_labels.tolist() == [0, 0, 1, -1]
    assert loaded.vertex_embeddings == approx(mesh.vertex_embeddings)
    assert loaded.vertex_normals == approx(mesh.vertex_normals, abs=1e-6)


def test_read_dispatch(tmp_path, mesh):
    path = tmp_path / "mesh.ply"
    mesh.write(path)
    assert len(TriMesh.read(path).vertices) == 4


def test_without_embeddings(tmp_path, mesh):
    path = tmp_path / "mesh.ply"
    path.write_bytes(create_mesh_ply(mesh, include_embeddings=False))
    assert load_mesh_ply(path).vertex_embeddings is None


def test_missing_plane_id(tmp_path):
    path = tmp_path / "gt.ply"
    lines = ASCII_PLY.replace("property int plane_id\n", "").splitlines()
    start = lines.index("end_header") + 1
    for k in range(start, start + 4):
        lines[k] = " ".join(lines[k].split()[:3])
    path.write_text("\n".join(lines) + "\n")
    assert load_mesh_ply(path).vertex_labels is None
    with raises(MissingPlaneIdError):
        load_mesh_ply(path, require_plane_id=True)


def test_not_a_ply(tmp_path):
    path = tmp_path / "mesh.ply"
    path.write_text("solid cube\nendsolid\n")
    with raises(MeshFormatError, match="not a PLY"):
        load_mesh_ply(path)


def test_big_endian_rejected(tmp_path):
    path = tmp_path / "mesh.ply"
    path.write_text(ASCII_PLY.replace("format ascii", "format binary_big_endian"))
    with raises(MeshFormatError, match="binary_big_endian"):
        load_mesh_ply(path)


def test_truncated_binary(tmp_path, mesh):
    path = tmp_path / "mesh.ply"
    path.write_bytes(create_mesh_ply(mesh)[:-5])
    with raises(MeshFormatError, match="truncated"):
        load_mesh_ply(path)


def test_quads_rejected(tmp_path):
    path = tmp_path / "mesh.ply"
    path.write_text(ASCII_PLY.replace("element face 2", "element face 1").replace("3 0 1 2\n3 0 2 3\n", "4 0 1 2 3\n"))
    with raises(MeshFormatError, match="non-triangular"):
        load_mesh_ply(path)


def test_face_index_out_of_range(tmp_path):
    path = tmp_path / "mesh.ply"
    path.write_text(ASCII_PLY.replace("3 0 2 3", "3 0 2 9"))
    with raises(MeshFormatError):
        load_mesh_ply(path)
