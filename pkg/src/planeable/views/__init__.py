# Import writers to trigger registration
from .archive import create_image, write_scene_archive
from .labels import (
    create_instances_json,
    create_labels_txt,
    export_instances_json,
    export_labels_txt,
    load_labels_txt,
)
from .obj import create_mesh_obj, export_mesh_obj
from .ply import create_mesh_ply, export_mesh_ply
from .report import (
    TimingLog,
    append_report_csv,
    create_report_json,
    export_report_json,
)
from .utils import PALETTE, label_colors

__all__ = [
    "PALETTE",
    "TimingLog",
    "append_report_csv",
    "create_image",
    "create_instances_json",
    "create_labels_txt",
    "create_mesh_obj",
    "create_mesh_ply",
    "create_report_json",
    "export_instances_json",
    "export_labels_txt",
    "export_mesh_obj",
    "export_mesh_ply",
    "export_report_json",
    "label_colors",
    "load_labels_txt",
    "write_scene_archive",
]
