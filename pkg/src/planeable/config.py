from dataclasses import asdict, dataclass, field, fields, replace
from logging import getLogger
from pathlib import Path
from typing import Any

from .enums import EmbeddingSource, Grouping

logger = getLogger(__name__)


@dataclass(frozen=True)
class FusionConfig:
    """
    Configuration for TSDF fusion and mesh extraction.

    Attributes:
        voxel_size: Edge length of a voxel in meters.
        truncation: Truncation band in meters; defaults to 3 voxels.
        planar_threshold: Cubes touching a voxel whose aggregated planar
            probability is below this value produce no geometry.
        use_planar_probability: If False, every pixel is fused as planar.
        bounds_margin: Margin in meters added around the observed points
            when sizing the volume.
    """

    voxel_size: float = 0.04
    truncation: float | None = None
    planar_threshold: float = 0.25
    use_planar_probability: bool = True
    bounds_margin: float = 0.2

    def __post_init__(self):
        if self.voxel_size <= 0:
            raise ValueError(f"voxel_size must be positive, got {self.voxel_size}")
        if self.truncation is not None and self.truncation < 2 * self.voxel_size:
            raise ValueError("truncation must be at least twice the voxel size")

    @property
    def truncation_distance(self) -> float:
        """The truncation band actually used."""
        return self.truncation if self.truncation is not None else 3 * self.voxel_size


@dataclass(frozen=True)
class DistillConfig:
    """
    Configuration for distilling per-pixel embeddings into the scene MLP.

    Attributes:
        t_e: Pull threshold on the distance between pixel embeddings.
        t_n: Threshold on the dot product of pixel normals.
        t_p: Push margin on the distance between 3D embeddings.
        pixels_per_keyframe: Pixels sampled from every keyframe per update.
        replay_window: Number of recent keyframes replayed with each new one.
        steps_per_keyframe: Optimizer steps per new keyframe.
        lr: Adam learning rate.
        beta1: Adam first-moment decay.
        beta2: Adam second-moment decay.
        omega0: Frequency factor of the periodic input encoding.
        encoding_features: Width of the periodic encoding layer.
        hidden_width: Width of the hidden layers.
        hidden_layers: Number of hidden layers.
        embedding_dim: Size of the output embedding.
    """

    t_e: float = 0.9
    t_n: float = 0.8
    t_p: float = 1.0
    pixels_per_keyframe: int = 400
    replay_window: int = 10
    steps_per_keyframe: int = 10
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    omega0: float = 30.0
    encoding_features: int = 48
    hidden_width: int = 128
    hidden_layers: int = 3
    embedding_dim: int = 3

    def __post_init__(self):
        if self.t_e <= 0:
            raise ValueError(f"t_e must be positive, got {self.t_e}")
        if not 0 < self.t_n < 1:
            raise ValueError(f"t_n must lie in (0, 1), got {self.t_n}")
        if self.t_p <= 0:
            raise ValueError(f"t_p must be positive, got {self.t_p}")


@dataclass(frozen=True)
class GroupingConfig:
    """
    Configuration for clustering mesh vertices into planes.

    Attributes:
        r_d: Maximum point-to-plane distance of a RANSAC inlier (meters).
        r_e: Maximum embedding distance of a RANSAC inlier.
        merge_emb: Planes whose mean embeddings are closer than this may merge.
        merge_normal_dot: Planes whose mean normals agree above this may merge.
        min_vertices: Smallest plane kept, and smallest acceptable RANSAC consensus.
        max_iterations: Upper bound on sequential RANSAC rounds.
        proposals_per_round: Seed vertices scored per RANSAC round.
        use_embeddings: If False, RANSAC inliers are purely geometric.
        bandwidth: Flat-kernel radius of mean-shift in embedding space.
        rng_seed: Seed for proposal sampling.
        track_distance: Online tracking carries a plane id to new vertices within
            this distance of its last footprint (meters).
        track_max_age: Keyframes a plane may stay unmatched before its id retires.
    """

    r_d: float = 0.1
    r_e: float = 0.5
    merge_emb: float = 0.2
    merge_normal_dot: float = 0.6
    min_vertices: int = 100
    max_iterations: int = 64
    proposals_per_round: int = 256
    use_embeddings: bool = True
    bandwidth: float = 0.25
    rng_seed: int = 0
    track_distance: float = 0.1
    track_max_age: int = 10

    def __post_init__(self):
        for name in ("r_d", "r_e", "merge_emb", "merge_normal_dot", "bandwidth", "track_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.min_vertices <= 0 or self.proposals_per_round <= 0:
            raise ValueError("min_vertices and proposals_per_round must be positive")
        if self.track_max_age < 0:
            raise ValueError(f"track_max_age must be non-negative, got {self.track_max_age}")


@dataclass(frozen=True)
class MetricConfig:
    """
    Configuration for the evaluation protocol.

    Attributes:
        n_sample_points: Points sampled from each mesh.
        f1_threshold: Distance under which a point counts as correct (meters).
        k_planes: Number of largest ground-truth planes in the planar metrics.
        visibility_margin: Slack behind the observed depth for visibility (meters).
        seed: Seed for surface sampling.
    """

    n_sample_points: int = 200_000
    f1_threshold: float = 0.05
    k_planes: int = 20
    visibility_margin: float = 0.05
    seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    """
    Complete configuration of a reconstruction run.
    """

    fusion: FusionConfig = field(default_factory=FusionConfig)
    distill: DistillConfig = field(default_factory=DistillConfig)
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    method: Grouping = Grouping.RANSAC
    embedding_source: EmbeddingSource = EmbeddingSource.MLP
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        """Return the configuration as nested plain data."""
        data = asdict(self)
        data["method"] = self.method.value
        data["embedding_source"] = self.embedding_source.value
        if data["fusion"]["truncation"] is None:
            data["fusion"]["truncation"] = self.fusion.truncation_distance
        return data


_SECTIONS = {
    "fusion": FusionConfig,
    "distill": DistillConfig,
    "grouping": GroupingConfig,
    "metrics": MetricConfig,
}

# Flat keys accepted outside of a section, mapped to (section, field)
_ALIASES: dict[str, tuple[str, str]] = {
    "pixels_per_kf": ("distill", "pixels_per_keyframe"),
    "replay": ("distill", "replay_window"),
    "steps_per_kf": ("distill", "steps_per_keyframe"),
    "no_embeddings": ("grouping", "use_embeddings"),
    "no_planar_prob": ("fusion", "use_planar_probability"),
}


def _resolve_key(key: str) -> tuple[str, str]:
    key = key.replace("-", "_")
    if "." in key:
        section, name = key.split(".", 1)
        if section in _SECTIONS and name in {f.name for f in fields(_SECTIONS[section])}:
            return section, name
        raise ValueError(f"Unknown configuration key: {key}")
    if key in ("seed", "grouping", "method", "embedding_source"):
        return "", "method" if key == "grouping" else key
    if key in _ALIASES:
        return _ALIASES[key]
    for section, cls in _SECTIONS.items():
        if key in {f.name for f in fields(cls)}:
            return section, key
    raise ValueError(f"Unknown configuration key: {key}")


def apply_overrides(
    config: PipelineConfig, overrides: dict[str, Any]
) -> PipelineConfig:
    """
    Return a copy of the configuration with flat overrides applied.

    Keys use flag names (dashes or underscores); `None` values are ignored so
    that unset CLI options leave file values untouched. `seed` also seeds the
    grouping and metric samplers.

    Args:
        config: The base configuration.
        overrides: Flat mapping of option name to value.

    Returns:
        PipelineConfig: The updated configuration.

    Raises:
        ValueError: If a key is unknown.
    """
    sections: dict[str, dict[str, Any]] = {name: {} for name in _SECTIONS}
    top: dict[str, Any] = {}

    for key, value in overrides.items():
        if value is None:
            continue
        section, name = _resolve_key(key)
        if key.replace("-", "_") in ("no_embeddings", "no_planar_prob"):
            value = not value
        if section:
            sections[section][name] = value
        else:
            top[name] = value

    if "method" in top:
        top["method"] = Grouping(top["method"])
    if "embedding_source" in top:
        top["embedding_source"] = EmbeddingSource(top["embedding_source"])
    if "seed" in top:
        sections["grouping"].setdefault("rng_seed", top["seed"])
        sections["metrics"].setdefault("seed", top["seed"])

    updated = {
        name: replace(getattr(config, name), **values)
        for name, values in sections.items()
        if values
    }
    return replace(config, **updated, **top)


def load_config(path: Path | str) -> PipelineConfig:
    """
    Load a pipeline configuration from a TOML file.

    The file may hold flat `key = value` pairs named like the CLI flags, or
    tables `[fusion]`, `[distill]`, `[grouping]` and `[metrics]`.

    Args:
        path: Path to the TOML file.

    Returns:
        PipelineConfig: The configuration with defaults for missing keys.
    """
    from tomllib import load as toml_load

    logger.debug(f"Loading configuration from: {path}")
    with open(path, "rb") as f:
        data = toml_load(f)

    flat: dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            if key not in _SECTIONS:
                raise ValueError(f"Unknown configuration section: {key}")
            flat.update({f"{key}.{name}": v for name, v in value.items()})
        else:
            flat[key] = value

    config = apply_overrides(PipelineConfig(), flat)
    logger.info(f"Loaded configuration with {len(flat)} keys from {path}.")
    return config


def dump_config(config: PipelineConfig, path: Path | str) -> None:
    """
    Write the resolved configuration as TOML.
    Requires 'tomli-w' to be installed.

    Args:
        config: The configuration to write.
        path: Output path.
    """
    import tomli_w

    logger.info(f"Writing configuration to: {path}")
    with open(path, "wb") as f:
        tomli_w.dump(config.to_dict(), f)
