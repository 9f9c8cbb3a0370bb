from pathlib import Path
from unittest.mock import mock_open, patch

import numpy as np

from planeable.mesh import TriMesh
from planeable.views.obj import create_mesh_obj, export_mesh_obj


def square():
    return TriMesh(
        np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], dtype=float),
        np.array([[0, 1, 2], [0, 2, 3]]),
        vertex_labels=np.array([0, 0, 0, -1]),
    )


def test_create_mesh_obj():
    lines = create_mesh_obj(square()).splitlines()
    vertices = [line for line in lines if line.startswith("v ")]
    normals = [line for line in lines if line.startswith("vn ")]
    faces = [line for line in lines if line.startswith("f ")]
    assert len(vertices) == 4 and len(normals) == 4
    assert faces == ["f 1//1 2//2 3//3", "f 1//1 3//3 4//4"]
    assert vertices[3].endswith("0.5020 0.5020 0.5020")
    assert normals[0] == "vn 0.000000 0.000000 1.000000"


def test_export_mesh_obj():
    mesh = square()
    with patch("builtins.open", mock_open()) as mock_file:
        export_mesh_obj(mesh, Path("mesh.obj"))
        mock_file.assert_called_with(Path("mesh.obj"), "w+")
        mock_file().write.assert_called_once_with(create_mesh_obj(mesh))


def test_write_dispatch(tmp_path):
    path = tmp_path / "mesh.obj"
    square().write(path)
    assert path.read_text().startswith("# written by planeable")
