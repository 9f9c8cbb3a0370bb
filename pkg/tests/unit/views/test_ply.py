from pathlib import Path
from unittest.mock import patch

import numpy as np
from pytest import fixture

from planeable.mesh import TriMesh
from planeable.views.ply import create_mesh_ply, export_mesh_ply


class TestPLY:
    @fixture
    def mesh(self):
        return TriMesh(
            np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float),
            np.array([[0, 1, 2]]),
            vertex_labels=np.array([2, 2, -1]),
            vertex_embeddings=np.zeros((3, 3)),
        )

    def header(self, data: bytes) -> list[str]:
        return data[: data.index(b"end_header")].decode("ascii").splitlines()

    def test_header(self, mesh):
        lines = self.header(create_mesh_ply(mesh))
        assert lines[1] == "format binary_little_endian 1.0"
        assert "element vertex 3" in lines
        assert "property int plane_id" in lines
        assert "property float emb_2" in lines
        assert "element face 1" in lines
        assert "property list uchar int vertex_indices" in lines

    def test_body_size(self, mesh):
        data = create_mesh_ply(mesh)
        body = data[data.index(b"end_header\n") + len(b"end_header\n") :]
        # 6 floats, 3 colour bytes, plane id and 3 embedding floats per vertex
        assert len(body) == 3 * (24 + 3 + 4 + 12) + (1 + 12)

    def test_without_embeddings(self, mesh):
        lines = self.header(create_mesh_ply(mesh, include_embeddings=False))
        assert not any("emb_" in line for line in lines)

    def test_unlabeled_mesh_writes_minus_one(self, mesh):
        data = create_mesh_ply(TriMesh(mesh.vertices, mesh.faces), include_embeddings=False)
        body = data[data.index(b"end_header\n") + len(b"end_header\n") :]
        vertex = np.frombuffer(
            body,
            dtype=[("p", "<f4", (6,)), ("rgb", "u1", (3,)), ("plane_id", "<i4")],
            count=3,
        )
        assert vertex["plane_id"].tolist() == [-1, -1, -1]
        assert vertex["rgb"].tolist() == [[128, 128, 128]] * 3

    def test_deterministic(self, mesh):
        assert create_mesh_ply(mesh) == create_mesh_ply(mesh)

    def test_export_mesh_ply(self, mesh):
        with patch("planeable.views.ply.Path.write_bytes") as mock_write:
            export_mesh_ply(mesh, Path("out.ply"))
            mock_write.assert_called_once_with(create_mesh_ply(mesh))
