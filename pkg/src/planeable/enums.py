from enum import Enum


class Grouping(str, Enum):
    """Plane grouping algorithms."""

    RANSAC = "ransac"
    MEANSHIFT = "meanshift"


class EmbeddingSource(str, Enum):
    """Where per-vertex embeddings come from before grouping."""

    MLP = "mlp"  # distilled per-scene field
    FUSED = "fused"  # per-pixel embeddings averaged in the TSDF


class Preset(str, Enum):
    """Synthetic scene presets."""

    BOX6 = "box6"
    PICTURE_WALL = "picture-wall"
    TWO_ROOMS = "two-rooms"
