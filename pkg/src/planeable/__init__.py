# Import parsers and views to trigger registration
from . import parsers, views  # noqa: F401
from .config import (
    DistillConfig,
    FusionConfig,
    GroupingConfig,
    MetricConfig,
    PipelineConfig,
    load_config,
)
from .embedding import EmbeddingTrainer, SceneEmbeddingMlp, embed_mesh, online_update
from .enums import EmbeddingSource, Grouping, Preset
from .errors import (
    ArchiveFormatError,
    DegenerateGeometryError,
    MeshFormatError,
    MissingPlaneIdError,
    PlaneableError,
    ResolutionMismatchError,
)
from .geometry import CameraPose, Plane, PointCloud, normals_from_depth, unproject
from .grouping import PlaneInstance, group_planes, track_planes
from .mesh import TriMesh, connected_components, sample_mesh_surface
from .metrics import EvaluationReport, evaluate
from .parsers import load_mesh_ply, load_scene_archive
from .pipeline import Reconstruction, reconstruct, run_online
from .planarize import fit_plane, planarize_mesh
from .tsdf import Keyframe, TsdfVolume, extract_mesh, integrate
from .views import write_scene_archive

__all__ = [
    "ArchiveFormatError",
    "CameraPose",
    "DegenerateGeometryError",
    "DistillConfig",
    "EmbeddingSource",
    "EmbeddingTrainer",
    "EvaluationReport",
    "FusionConfig",
    "Grouping",
    "GroupingConfig",
    "Keyframe",
    "MeshFormatError",
    "MetricConfig",
    "MissingPlaneIdError",
    "PipelineConfig",
    "Plane",
    "PlaneInstance",
    "PlaneableError",
    "PointCloud",
    "Preset",
    "Reconstruction",
    "ResolutionMismatchError",
    "SceneEmbeddingMlp",
    "TriMesh",
    "TsdfVolume",
    "connected_components",
    "embed_mesh",
    "evaluate",
    "extract_mesh",
    "fit_plane",
    "group_planes",
    "integrate",
    "load_config",
    "load_mesh_ply",
    "load_scene_archive",
    "normals_from_depth",
    "online_update",
    "planarize_mesh",
    "reconstruct",
    "run_online",
    "sample_mesh_surface",
    "track_planes",
    "unproject",
    "write_scene_archive",
]
