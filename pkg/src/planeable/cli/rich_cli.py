from logging import DEBUG, INFO, WARNING, basicConfig
from pathlib import Path

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table
from typer import Argument, Exit, Option, Typer

from planeable.cli.commands.core import (
    evaluate_command,
    online_command,
    reconstruct_command,
    synth_command,
)
from planeable.enums import EmbeddingSource, Grouping, Preset

app = Typer(help="Planeable CLI (Rich)")
console = Console()


@app.callback()
def main(
    verbose: bool = Option(False, "--verbose", "-v", help="Show progress logs"),
    debug: bool = Option(False, "--debug", help="Show per-step debug logs"),
):
    """3D plane reconstruction from posed depth keyframes."""
    level = DEBUG if debug else INFO if verbose else WARNING
    basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _planes_table(title: str, planes: list[dict]) -> Table:
    table = Table(title=title)
    table.add_column("Id", style="cyan", justify="right")
    table.add_column("Normal", style="magenta")
    table.add_column("Offset (m)", justify="right")
    table.add_column("Vertices", justify="right")
    for p in planes:
        normal = ", ".join(f"{c:+.3f}" for c in p["normal"])
        table.add_row(str(p["id"]), normal, f"{p['offset']:.3f}", str(p["vertex_count"]))
    return table


@app.command()
def reconstruct(
    scene_dir: Path = Argument(..., help="Scene archive directory"),
    out: Path = Option(Path("out"), "--out", "-o", help="Output directory"),
    config: Path = Option(None, "--config", "-c", help="TOML configuration file"),
    seed: int = Option(None, "--seed", help="Random seed"),
    voxel_size: float = Option(None, "--voxel-size", help="Voxel size in meters"),
    planar_threshold: float = Option(None, "--planar-threshold", help="Planar probability cut-off"),
    grouping: Grouping = Option(None, "--grouping", help="Grouping algorithm", case_sensitive=False),
    no_embeddings: bool = Option(False, "--no-embeddings", help="Group by geometry only"),
    no_planar_prob: bool = Option(False, "--no-planar-prob", help="Ignore planar probabilities"),
    embedding_source: EmbeddingSource = Option(
        None, "--embedding-source", help="Where vertex embeddings come from", case_sensitive=False
    ),
    t_e: float = Option(None, "--t-e", help="Pull threshold on pixel embedding distance"),
    t_n: float = Option(None, "--t-n", help="Threshold on the normal dot product"),
    t_p: float = Option(None, "--t-p", help="Push margin on 3D embedding distance"),
    pixels_per_kf: int = Option(None, "--pixels-per-kf", help="Pixels sampled per keyframe"),
    replay: int = Option(None, "--replay", help="Keyframes replayed with each new one"),
    steps_per_kf: int = Option(None, "--steps-per-kf", help="Optimizer steps per keyframe"),
    lr: float = Option(None, "--lr", help="Adam learning rate"),
):
    """Reconstruct and planarize a scene archive."""
    try:
        with console.status(f"[bold green]Reconstructing {scene_dir}..."):
            data = reconstruct_command(
                scene_dir,
                out,
                config,
                seed=seed,
                voxel_size=voxel_size,
                planar_threshold=planar_threshold,
                grouping=grouping,
                no_embeddings=no_embeddings or None,
                no_planar_prob=no_planar_prob or None,
                embedding_source=embedding_source,
                t_e=t_e,
                t_n=t_n,
                t_p=t_p,
                pixels_per_kf=pixels_per_kf,
                replay=replay,
                steps_per_kf=steps_per_kf,
                lr=lr,
            )
        console.print(_planes_table(f"Planes: {scene_dir.name}", data["planes"]))
        console.print(f"[green]Wrote reconstruction of {data['keyframes']} keyframes to {out}[/green]")
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        raise Exit(1)


@app.command()
def online(
    scene_dir: Path = Argument(..., help="Scene archive directory"),
    out: Path = Option(Path("out"), "--out", "-o", help="Output directory"),
    config: Path = Option(None, "--config", "-c", help="TOML configuration file"),
    seed: int = Option(None, "--seed", help="Random seed"),
    voxel_size: float = Option(None, "--voxel-size", help="Voxel size in meters"),
    planar_threshold: float = Option(None, "--planar-threshold", help="Planar probability cut-off"),
    no_planar_prob: bool = Option(False, "--no-planar-prob", help="Ignore planar probabilities"),
    embedding_source: EmbeddingSource = Option(
        None, "--embedding-source", help="Where vertex embeddings come from", case_sensitive=False
    ),
    t_e: float = Option(None, "--t-e", help="Pull threshold on pixel embedding distance"),
    t_n: float = Option(None, "--t-n", help="Threshold on the normal dot product"),
    t_p: float = Option(None, "--t-p", help="Push margin on 3D embedding distance"),
    pixels_per_kf: int = Option(None, "--pixels-per-kf", help="Pixels sampled per keyframe"),
    replay: int = Option(None, "--replay", help="Keyframes replayed with each new one"),
    steps_per_kf: int = Option(None, "--steps-per-kf", help="Optimizer steps per keyframe"),
    lr: float = Option(None, "--lr", help="Adam learning rate"),
):
    """Replay a scene archive keyframe by keyframe with tracked plane ids."""
    try:
        with console.status(f"[bold green]Replaying {scene_dir}..."):
            data = online_command(
                scene_dir,
                out,
                config,
                seed=seed,
                voxel_size=voxel_size,
                planar_threshold=planar_threshold,
                no_planar_prob=no_planar_prob or None,
                embedding_source=embedding_source,
                t_e=t_e,
                t_n=t_n,
                t_p=t_p,
                pixels_per_kf=pixels_per_kf,
                replay=replay,
                steps_per_kf=steps_per_kf,
                lr=lr,
            )
        console.print(_planes_table(f"Planes after {data['keyframes']} keyframes", data["planes"]))

        timings = Table(title="Mean time per keyframe")
        timings.add_column("Stage", style="cyan")
        timings.add_column("Milliseconds", style="magenta", justify="right")
        for stage, seconds in data["mean_timings"].items():
            timings.add_row(stage, f"{1000 * seconds:.1f}")
        console.print(timings)
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        raise Exit(1)


@app.command()
def evaluate(
    pred_mesh: Path = Argument(..., help="Predicted mesh"),
    gt_mesh: Path = Argument(..., help="Ground-truth PLY mesh with plane_id"),
    scene_dir: Path = Option(None, "--scene", "-s", help="Scene archive for the visibility mask"),
    out: Path = Option(None, "--out", "-o", help="Directory for report.json"),
    csv: Path = Option(None, "--csv", help="Append the scores to this CSV file"),
    config: Path = Option(None, "--config", "-c", help="TOML configuration file"),
    seed: int = Option(None, "--seed", help="Sampling seed"),
):
    """Score a predicted mesh against ground truth."""
    try:
        with console.status("[bold green]Evaluating..."):
            report = evaluate_command(
                pred_mesh, gt_mesh, scene_dir, out, csv, config, seed=seed
            )
        table = Table(title=f"Evaluation: {pred_mesh.name}")
        table.add_column("Metric", style="cyan")
        table.add_column("Value", style="magenta", justify="right")
        for name, value in report.items():
            table.add_row(name, f"{value:.4f}")
        console.print(table)
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        raise Exit(1)


@app.command()
def synth(
    preset: Preset = Argument(..., help="Scene preset", case_sensitive=False),
    out: Path = Option(Path("scene"), "--out", "-o", help="Archive directory"),
    seed: int = Option(0, "--seed", help="Random seed"),
    frames: int = Option(30, "--frames", help="Number of keyframes"),
):
    """Render a synthetic scene archive with its ground-truth mesh."""
    try:
        data = synth_command(preset, out, seed=seed, n_frames=frames)
        console.print(
            f"[green]Wrote '{data['preset']}' with {data['frames']} frames and "
            f"{data['instances']} planes to {out}[/green]"
        )
    except Exception as e:
        console.print(f"[red]Error:[/red] {e}")
        raise Exit(1)


if __name__ == "__main__":
    app()
