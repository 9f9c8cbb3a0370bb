from __future__ import annotations

from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from time import perf_counter

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import PipelineConfig, dump_config
from .embedding import EmbeddingTrainer, SceneEmbeddingMlp, embed_mesh, save_checkpoint
from .enums import EmbeddingSource, Grouping
from .grouping import PlaneInstance, PlaneTracker, group_planes
from .mesh import TriMesh
from .planarize import planarize_mesh
from .tsdf import Keyframe, TsdfVolume, extract_mesh, scene_bounds

logger = getLogger(__name__)

PLANAR_MESH_FILE = "mesh_planar.ply"
MESH_FILE = "mesh.ply"
LABELS_FILE = "labels.txt"
INSTANCES_FILE = "instances.json"
CHECKPOINT_FILE = "mlp.bin"
CONFIG_FILE = "config.toml"
REPORT_FILE = "report.json"
TIMINGS_FILE = "timings.jsonl"


@dataclass
class Reconstruction:
    """
    Everything a reconstruction run produces.

    Attributes:
        mesh: The extracted mesh with embeddings and final plane labels.
        planar_mesh: The planarized mesh.
        instances: Final plane instances.
        labels: (V,) labels of `mesh`.
        volume: The fused volume.
        mlp: The trained scene network, or None for fused embeddings.
    """

    mesh: TriMesh
    planar_mesh: TriMesh
    instances: list[PlaneInstance]
    labels: NDArray[np.int64]
    volume: TsdfVolume
    mlp: SceneEmbeddingMlp | None = None


@dataclass
class OnlineStep:
    """State after one keyframe of an online run; times in seconds."""

    frame_id: int
    instances: list[PlaneInstance]
    labels: NDArray[np.int64]
    mesh: TriMesh
    timings: dict[str, float] = field(default_factory=dict)

    def timing_record(self) -> dict[str, float | int]:
        return {"frame_id": self.frame_id, **self.timings, "n_planes": len(self.instances)}


def create_volume(
    bounds: tuple[ArrayLike, ArrayLike], cfg: PipelineConfig
) -> TsdfVolume:
    """An empty volume covering `bounds` with the configured voxel size."""
    lower, upper = bounds
    return TsdfVolume.from_bounds(
        lower, upper, cfg.fusion.voxel_size, embedding_dim=cfg.distill.embedding_dim
    )


def _fuse(volume: TsdfVolume, keyframe: Keyframe, cfg: PipelineConfig) -> None:
    volume.integrate(
        keyframe,
        cfg.fusion.truncation_distance,
        use_planar_probability=cfg.fusion.use_planar_probability,
    )


def _extract(volume: TsdfVolume, cfg: PipelineConfig) -> TriMesh:
    return extract_mesh(
        volume,
        planar_threshold=cfg.fusion.planar_threshold,
        with_fused_embeddings=cfg.embedding_source == EmbeddingSource.FUSED,
    )


def _new_trainer(volume: TsdfVolume, cfg: PipelineConfig) -> EmbeddingTrainer | None:
    if cfg.embedding_source != EmbeddingSource.MLP:
        return None
    mlp = SceneEmbeddingMlp(cfg.distill, bounds=volume.bounds, rng_seed=cfg.seed)
    return EmbeddingTrainer(mlp, cfg.distill, seed=cfg.seed)


def _group(mesh: TriMesh, cfg: PipelineConfig, method: Grouping) -> tuple[list[PlaneInstance], NDArray[np.int64]]:
    return group_planes(
        mesh,
        cfg.grouping,
        method=method,
        propagate=cfg.fusion.use_planar_probability,
    )


def reconstruct(keyframes: Sequence[Keyframe], cfg: PipelineConfig | None = None) -> Reconstruction:
    """
    Run the batch pipeline over a sequence of keyframes.

    Every keyframe is fused into a volume sized to the observed scene and the
    mesh is extracted once. The scene network is trained online over the
    keyframes in order, the mesh vertices are embedded and grouped into planes,
    and the mesh is planarized.

    Args:
        keyframes: Keyframes in capture order.
        cfg: Pipeline configuration.

    Returns:
        Reconstruction: Meshes, planes and the trained network.

    Raises:
        ValueError: If there are no keyframes.
        DegenerateGeometryError: If no keyframe has valid depth.
    """
    cfg = cfg or PipelineConfig()
    if not keyframes:
        raise ValueError("reconstruct needs at least one keyframe")

    volume = create_volume(scene_bounds(keyframes, cfg.fusion.bounds_margin), cfg)
    for kf in keyframes:
        _fuse(volume, kf, cfg)
    mesh = _extract(volume, cfg)
    logger.info(f"Fused {len(keyframes)} keyframes into a mesh with {len(mesh.vertices)} vertices.")

    trainer = _new_trainer(volume, cfg)
    if trainer is not None:
        for kf in keyframes:
            trainer.update(kf)
        mesh = embed_mesh(trainer.mlp, mesh)

    instances, labels = _group(mesh, cfg, cfg.method)
    mesh = mesh.with_labels(labels)
    planar = planarize_mesh(mesh, instances)
    logger.info(f"Reconstruction found {len(instances)} planes.")
    return Reconstruction(
        mesh=mesh,
        planar_mesh=planar,
        instances=instances,
        labels=labels,
        volume=volume,
        mlp=trainer.mlp if trainer is not None else None,
    )


def write_reconstruction(
    result: Reconstruction, cfg: PipelineConfig, out_dir: Path | str
) -> dict[str, Path]:
    """
    Write the outputs of a reconstruction.

    Returns:
        dict: Maps each output kind to the file written.
    """
    from .views import export_instances_json, export_labels_txt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "planar_mesh": out / PLANAR_MESH_FILE,
        "mesh": out / MESH_FILE,
        "labels": out / LABELS_FILE,
        "instances": out / INSTANCES_FILE,
        "config": out / CONFIG_FILE,
    }
    result.planar_mesh.write(paths["planar_mesh"])
    result.mesh.write(paths["mesh"])
    export_labels_txt(result.labels, paths["labels"])
    export_instances_json(result.instances, paths["instances"])
    dump_config(cfg, paths["config"])
    if result.mlp is not None:
        paths["checkpoint"] = out / CHECKPOINT_FILE
        save_checkpoint(result.mlp, paths["checkpoint"])
    return paths


class OnlineReconstructor:
    """
    Incremental pipeline that updates planes after every keyframe.

    The volume extent is fixed up front. After each keyframe the volume is
    updated and re-meshed, the network takes its online step, the mesh is
    clustered with mean-shift and plane ids are carried over from the previous
    keyframe.
    """

    def __init__(self, bounds: tuple[ArrayLike, ArrayLike], cfg: PipelineConfig | None = None):
        self.cfg = cfg or PipelineConfig()
        self.volume = create_volume(bounds, self.cfg)
        self.trainer = _new_trainer(self.volume, self.cfg)
        grouping = self.cfg.grouping
        self.tracker = PlaneTracker(grouping.track_distance, grouping.track_max_age)
        self.n_steps = 0

    def step(self, keyframe: Keyframe, ingest_time: float = 0.0) -> OnlineStep:
        """
        Process one keyframe.

        Args:
            keyframe: The next keyframe.
            ingest_time: Seconds spent loading the keyframe, reported as `depth_ingest`.

        Returns:
            OnlineStep: Tracked planes, labels and per-stage wall times.
        """
        t0 = perf_counter()
        _fuse(self.volume, keyframe, self.cfg)
        mesh = _extract(self.volume, self.cfg)
        t1 = perf_counter()
        if self.trainer is not None:
            self.trainer.update(keyframe)
            mesh = embed_mesh(self.trainer.mlp, mesh)
        t2 = perf_counter()
        instances, labels = _group(mesh, self.cfg, Grouping.MEANSHIFT)
        instances, labels = self.tracker.update(mesh, instances, labels)
        t3 = perf_counter()

        result = OnlineStep(
            frame_id=keyframe.frame_id,
            instances=instances,
            labels=labels,
            mesh=mesh.with_labels(labels),
            timings={
                "depth_ingest": ingest_time,
                "fusion": t1 - t0,
                "mlp": t2 - t1,
                "clustering": t3 - t2,
            },
        )
        self.n_steps += 1
        logger.debug(f"Keyframe {keyframe.frame_id}: {len(instances)} planes in {t3 - t0:.3f}s.")
        return result


def run_online(
    keyframes: Iterable[Keyframe],
    bounds: tuple[ArrayLike, ArrayLike],
    cfg: PipelineConfig | None = None,
    timings_path: Path | str | None = None,
) -> Iterator[OnlineStep]:
    """
    Replay keyframes through the online pipeline, yielding after each one.

    The time spent drawing each keyframe from `keyframes` is reported as its
    depth-ingest stage, so a lazily loading iterator measures file reading.

    Steps are yielded as they complete and not retained, so a caller that keeps
    only the last one holds a single mesh in memory.

    Args:
        keyframes: Keyframes in capture order.
        bounds: Lower and upper corner of the volume.
        cfg: Pipeline configuration.
        timings_path: If given, one JSON line per keyframe is written there.

    Yields:
        OnlineStep: One entry per keyframe.
    """
    from .views import TimingLog

    online = OnlineReconstructor(bounds, cfg)
    log = TimingLog(Path(timings_path)) if timings_path is not None else None
    frames = iter(keyframes)
    while True:
        start = perf_counter()
        keyframe = next(frames, None)
        if keyframe is None:
            break
        step = online.step(keyframe, ingest_time=perf_counter() - start)
        if log is not None:
            log.append(step.timing_record())
        yield step

    logger.info(f"Online run processed {online.n_steps} keyframes.")
