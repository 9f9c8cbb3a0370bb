from io import StringIO
from logging import getLogger
from pathlib import Path

from ..mesh import TriMesh
from ..registry import register_writer
from .utils import label_colors

logger = getLogger(__name__)


def create_mesh_obj(mesh: TriMesh) -> str:
    """
    Encode a mesh as Wavefront OBJ with per-vertex label colours.

    Colours follow each vertex position as `v x y z r g b` with components in [0, 1].
    """
    logger.debug("Creating OBJ representation of the mesh.")
    out = StringIO()
    out.write("# written by planeable\n")
    colors = label_colors(mesh.labels_or_unassigned()) / 255.0
    for p, c in zip(mesh.vertices, colors):
        out.write(f"v {p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {c[0]:.4f} {c[1]:.4f} {c[2]:.4f}\n")
    for n in mesh.vertex_normals:
        out.write(f"vn {n[0]:.6f} {n[1]:.6f} {n[2]:.6f}\n")
    # OBJ indices are 1-based
    for a, b, c in mesh.faces + 1:
        out.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")
    return out.getvalue()


@register_writer(".obj")
def export_mesh_obj(mesh: TriMesh, output: Path) -> None:
    """
    Export a mesh to an OBJ file.

    Args:
        mesh: The mesh to export.
        output: The output file path.
    """
    logger.info(f"Exporting OBJ to: {output}")
    with open(output, "w+") as f:
        f.write(create_mesh_obj(mesh))
