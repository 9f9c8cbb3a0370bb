from logging import getLogger
from pathlib import Path

import numpy as np

from ..mesh import TriMesh
from ..registry import register_writer
from .utils import label_colors

logger = getLogger(__name__)


def create_mesh_ply(mesh: TriMesh, include_embeddings: bool = True) -> bytes:
    """
    Encode a mesh as binary little-endian PLY.

    Vertices carry position, normal, a label colour and an integer `plane_id`
    (-1 when unassigned), followed by `emb_*` channels when the mesh has
    embeddings and `include_embeddings` is set.

    Args:
        mesh: The mesh to encode.
        include_embeddings: Whether to write vertex embeddings.

    Returns:
        bytes: The PLY file content.
    """
    logger.debug("Creating binary PLY representation of the mesh.")
    labels = mesh.labels_or_unassigned()
    embeddings = mesh.vertex_embeddings if include_embeddings else None

    fields = [(name, "<f4") for name in ("x", "y", "z", "nx", "ny", "nz")]
    fields += [(name, "u1") for name in ("red", "green", "blue")]
    fields.append(("plane_id", "<i4"))
    if embeddings is not None:
        fields += [(f"emb_{k}", "<f4") for k in range(embeddings.shape[1])]

    vertex = np.zeros(len(mesh.vertices), dtype=np.dtype(fields))
    for k, name in enumerate("xyz"):
        vertex[name] = mesh.vertices[:, k]
        vertex[f"n{name}"] = mesh.vertex_normals[:, k]
    colors = label_colors(labels)
    for k, name in enumerate(("red", "green", "blue")):
        vertex[name] = colors[:, k]
    vertex["plane_id"] = labels
    if embeddings is not None:
        for k in range(embeddings.shape[1]):
            vertex[f"emb_{k}"] = embeddings[:, k]

    face = np.zeros(len(mesh.faces), dtype=np.dtype([("n", "u1"), ("vertex_indices", "<i4", (3,))]))
    face["n"] = 3
    face["vertex_indices"] = mesh.faces

    type_names = {"<f4": "float", "u1": "uchar", "<i4": "int"}
    header = [
        "ply",
        "format binary_little_endian 1.0",
        "comment written by planeable",
        f"element vertex {len(vertex)}",
        *(f"property {type_names[t]} {name}" for name, t in fields),
        f"element face {len(face)}",
        "property list uchar int vertex_indices",
        "end_header",
    ]
    return ("\n".join(header) + "\n").encode("ascii") + vertex.tobytes() + face.tobytes()


@register_writer(".ply")
def export_mesh_ply(mesh: TriMesh, output: Path, include_embeddings: bool = True) -> None:
    """
    Export a mesh to a binary PLY file.

    Args:
        mesh: The mesh to export.
        output: The output file path.
        include_embeddings: Whether to write vertex embeddings.
    """
    logger.info(f"Exporting PLY to: {output}")
    Path(output).write_bytes(create_mesh_ply(mesh, include_embeddings))
