from json import dumps
from logging import getLogger
from pathlib import Path
from typing import Any

from ...config import PipelineConfig, apply_overrides, dump_config, load_config
from ...enums import Preset
from ...errors import ArchiveFormatError
from ...mesh import TriMesh
from ...metrics import evaluate
from ...parsers import iter_scene_archive, load_mesh_ply, load_scene_archive
from ...pipeline import (
    CONFIG_FILE,
    INSTANCES_FILE,
    LABELS_FILE,
    PLANAR_MESH_FILE,
    REPORT_FILE,
    TIMINGS_FILE,
    reconstruct,
    run_online,
    write_reconstruction,
)
from ...planarize import planarize_mesh
from ...synth import synthesize_archive
from ...tsdf import scene_bounds
from ...views import (
    append_report_csv,
    create_instances_json,
    export_instances_json,
    export_labels_txt,
    export_report_json,
)

logger = getLogger(__name__)


def resolve_config(config_path: Path | None = None, **overrides: Any) -> PipelineConfig:
    """
    Build the run configuration: defaults, then the config file, then flags.

    Flags left as None keep the file (or default) value.
    """
    config = load_config(config_path) if config_path else PipelineConfig()
    return apply_overrides(config, overrides)


def reconstruct_command(
    scene_dir: Path,
    out_dir: Path,
    config_path: Path | None = None,
    **overrides: Any,
) -> dict[str, Any]:
    cfg = resolve_config(config_path, **overrides)
    keyframes = load_scene_archive(scene_dir)
    result = reconstruct(keyframes, cfg)
    paths = write_reconstruction(result, cfg, out_dir)
    return {
        "keyframes": len(keyframes),
        "vertices": len(result.mesh.vertices),
        "planes": [inst.to_dict() for inst in result.instances],
        "outputs": {kind: str(p) for kind, p in paths.items()},
    }


def online_command(
    scene_dir: Path,
    out_dir: Path,
    config_path: Path | None = None,
    **overrides: Any,
) -> dict[str, Any]:
    cfg = resolve_config(config_path, **overrides)
    out = Path(out_dir)
    frames_out = out / "frames"
    frames_out.mkdir(parents=True, exist_ok=True)

    # The volume extent comes from a first pass over the archive
    bounds = scene_bounds(iter_scene_archive(scene_dir), cfg.fusion.bounds_margin)
    stages = ("depth_ingest", "fusion", "mlp", "clustering")
    totals = dict.fromkeys(stages, 0.0)
    plane_ids: list[list[int]] = []
    last = None
    for last in run_online(iter_scene_archive(scene_dir), bounds, cfg, out / TIMINGS_FILE):
        (frames_out / f"{last.frame_id:06d}.{INSTANCES_FILE}").write_text(
            create_instances_json(last.instances)
        )
        plane_ids.append(sorted(inst.id for inst in last.instances))
        for k in stages:
            totals[k] += last.timings[k]
    if last is None:
        raise ArchiveFormatError(scene_dir, "no keyframes")

    planarize_mesh(last.mesh, last.instances).write(out / PLANAR_MESH_FILE)
    export_labels_txt(last.labels, out / LABELS_FILE)
    export_instances_json(last.instances, out / INSTANCES_FILE)
    dump_config(cfg, out / CONFIG_FILE)

    return {
        "keyframes": len(plane_ids),
        "planes": [inst.to_dict() for inst in last.instances],
        "plane_ids": plane_ids,
        "mean_timings": {k: totals[k] / len(plane_ids) for k in stages},
        "outputs": {"timings": str(out / TIMINGS_FILE), "planar_mesh": str(out / PLANAR_MESH_FILE)},
    }


def evaluate_command(
    pred_mesh: Path,
    gt_mesh: Path,
    scene_dir: Path | None = None,
    out_dir: Path | None = None,
    csv_path: Path | None = None,
    config_path: Path | None = None,
    **overrides: Any,
) -> dict[str, Any]:
    cfg = resolve_config(config_path, **overrides)
    pred = TriMesh.read(pred_mesh)
    gt = load_mesh_ply(gt_mesh, require_plane_id=True)
    keyframes = load_scene_archive(scene_dir) if scene_dir else None
    report = evaluate(pred, gt, keyframes, cfg.metrics)

    out = Path(out_dir) if out_dir else Path(pred_mesh).parent
    out.mkdir(parents=True, exist_ok=True)
    export_report_json(report, out / REPORT_FILE)
    if csv_path:
        scene = Path(scene_dir).name if scene_dir else Path(pred_mesh).parent.name
        append_report_csv(report, csv_path, scene=scene)
    return report.to_dict()


def synth_command(
    preset: Preset | str,
    out_dir: Path,
    seed: int = 0,
    n_frames: int = 30,
) -> dict[str, Any]:
    scene = synthesize_archive(preset, seed, out_dir, n_frames=n_frames)
    return {
        "preset": Preset(preset).value,
        "seed": seed,
        "frames": len(scene.trajectory),
        "instances": len(scene.instance_ids),
        "out": str(out_dir),
    }


def format_json(data: dict[str, Any]) -> str:
    return dumps(data, indent=2)
