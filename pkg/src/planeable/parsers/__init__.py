# Import readers to trigger registration
from .archive import (
    iter_scene_archive,
    load_scene_archive,
    read_image,
    read_intrinsics,
    read_poses,
)
from .ply import load_mesh_ply

__all__ = [
    "iter_scene_archive",
    "load_mesh_ply",
    "load_scene_archive",
    "read_image",
    "read_intrinsics",
    "read_poses",
]
