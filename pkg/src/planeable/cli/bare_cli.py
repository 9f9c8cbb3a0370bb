from argparse import ArgumentParser
from logging import DEBUG, INFO, WARNING, basicConfig
from pathlib import Path
from sys import exit

from planeable.cli.commands.core import (
    evaluate_command,
    format_json,
    online_command,
    reconstruct_command,
    synth_command,
)
from planeable.enums import EmbeddingSource, Grouping, Preset


def _add_pipeline_flags(p: ArgumentParser, with_grouping: bool = True) -> None:
    p.add_argument("scene_dir", type=Path, help="Scene archive directory")
    p.add_argument("-o", "--out", type=Path, default=Path("out"), help="Output directory")
    p.add_argument("-c", "--config", type=Path, help="TOML configuration file")
    p.add_argument("--seed", type=int, help="Random seed")
    p.add_argument("--voxel-size", type=float, help="Voxel size in meters")
    p.add_argument("--planar-threshold", type=float, help="Planar probability cut-off")
    p.add_argument("--no-planar-prob", action="store_true", help="Ignore planar probabilities")
    p.add_argument(
        "--embedding-source",
        choices=[e.value for e in EmbeddingSource],
        help="Where vertex embeddings come from",
    )
    if with_grouping:
        p.add_argument(
            "--grouping", choices=[g.value for g in Grouping], help="Grouping algorithm"
        )
        p.add_argument("--no-embeddings", action="store_true", help="Group by geometry only")

    distill = p.add_argument_group("distillation")
    distill.add_argument("--t-e", type=float, help="Pull threshold on pixel embedding distance")
    distill.add_argument("--t-n", type=float, help="Threshold on the normal dot product")
    distill.add_argument("--t-p", type=float, help="Push margin on 3D embedding distance")
    distill.add_argument("--pixels-per-kf", type=int, help="Pixels sampled per keyframe")
    distill.add_argument("--replay", type=int, help="Keyframes replayed with each new one")
    distill.add_argument("--steps-per-kf", type=int, help="Optimizer steps per keyframe")
    distill.add_argument("--lr", type=float, help="Adam learning rate")


DISTILL_FLAGS = ("t_e", "t_n", "t_p", "pixels_per_kf", "replay", "steps_per_kf", "lr")


def _distill_overrides(args) -> dict:
    return {name: getattr(args, name) for name in DISTILL_FLAGS}


def run_bare():
    parser = ArgumentParser(prog="planeable", description="Planeable CLI (Bare-bones)")
    parser.add_argument("-v", "--verbose", action="store_true", help="Show progress logs")
    parser.add_argument("--debug", action="store_true", help="Show per-step debug logs")
    subparsers = parser.add_subparsers(dest="command", help="Commands")

    # reconstruct
    reconstruct_p = subparsers.add_parser("reconstruct", help="Reconstruct and planarize a scene")
    _add_pipeline_flags(reconstruct_p)

    # online
    online_p = subparsers.add_parser("online", help="Replay a scene keyframe by keyframe")
    _add_pipeline_flags(online_p, with_grouping=False)

    # evaluate
    evaluate_p = subparsers.add_parser("evaluate", help="Score a mesh against ground truth")
    evaluate_p.add_argument("pred_mesh", type=Path, help="Predicted mesh")
    evaluate_p.add_argument("gt_mesh", type=Path, help="Ground-truth PLY mesh with plane_id")
    evaluate_p.add_argument("-s", "--scene", type=Path, help="Scene archive for the visibility mask")
    evaluate_p.add_argument("-o", "--out", type=Path, help="Directory for report.json")
    evaluate_p.add_argument("--csv", type=Path, help="Append the scores to this CSV file")
    evaluate_p.add_argument("-c", "--config", type=Path, help="TOML configuration file")
    evaluate_p.add_argument("--seed", type=int, help="Sampling seed")

    # synth
    synth_p = subparsers.add_parser("synth", help="Render a synthetic scene archive")
    synth_p.add_argument("preset", choices=[p.value for p in Preset], help="Scene preset")
    synth_p.add_argument("-o", "--out", type=Path, default=Path("scene"), help="Archive directory")
    synth_p.add_argument("--seed", type=int, default=0, help="Random seed")
    synth_p.add_argument("--frames", type=int, default=30, help="Number of keyframes")

    args = parser.parse_args()
    basicConfig(level=DEBUG if args.debug else INFO if args.verbose else WARNING)

    try:
        if args.command == "reconstruct":
            data = reconstruct_command(
                args.scene_dir,
                args.out,
                args.config,
                seed=args.seed,
                voxel_size=args.voxel_size,
                planar_threshold=args.planar_threshold,
                grouping=args.grouping,
                no_embeddings=args.no_embeddings or None,
                no_planar_prob=args.no_planar_prob or None,
                embedding_source=args.embedding_source,
                **_distill_overrides(args),
            )
            print(f"Planes: {len(data['planes'])}")
            for p in data["planes"]:
                print(f"  {p['id']}: normal={p['normal']} offset={p['offset']:.3f}")
            print(f"Outputs written to {args.out}")

        elif args.command == "online":
            data = online_command(
                args.scene_dir,
                args.out,
                args.config,
                seed=args.seed,
                voxel_size=args.voxel_size,
                planar_threshold=args.planar_threshold,
                no_planar_prob=args.no_planar_prob or None,
                embedding_source=args.embedding_source,
                **_distill_overrides(args),
            )
            print(f"Keyframes: {data['keyframes']}")
            print(f"Planes: {len(data['planes'])}")
            for stage, seconds in data["mean_timings"].items():
                print(f"  {stage}: {1000 * seconds:.1f} ms")

        elif args.command == "evaluate":
            report = evaluate_command(
                args.pred_mesh,
                args.gt_mesh,
                args.scene,
                args.out,
                args.csv,
                args.config,
                seed=args.seed,
            )
            print(format_json(report))

        elif args.command == "synth":
            data = synth_command(args.preset, args.out, seed=args.seed, n_frames=args.frames)
            print(f"Wrote '{data['preset']}' with {data['instances']} planes to {data['out']}")

        else:
            parser.print_help()
    except Exception as e:
        print(f"Error: {e}")
        exit(1)


if __name__ == "__main__":
    run_bare()
