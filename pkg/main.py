#!/usr/bin/env python3
"""
Command-line interface for the Highlight Attention Lab
"""
import argparse
import logging
import sys
from pathlib import Path

from config.settings import settings
from src.pipeline.pipeline import STAGES, Pipeline
from src.utils.errors import ConfigError, PipelineStageError
from src.utils.models import ArtifactManifest, PipelineConfig, Variant


def build_config(args) -> PipelineConfig:
    """Config file values with CLI flags on top"""
    overrides = {
        "seed": args.seed,
        "output_dir": args.out,
        "participants": args.participants,
        "hism.variant": args.variant,
    }
    return settings.load_config(args.config, overrides)


def print_manifest(manifest: ArtifactManifest, out_dir: Path):
    """Print artifact counts per stage"""
    print("\n" + "=" * 80)
    print(f"📦 ARTIFACTS in {out_dir} (seed {manifest.seed}):")
    counts = {}
    for a in manifest.artifacts:
        counts[a.stage] = counts.get(a.stage, 0) + 1
    for stage, n in counts.items():
        print(f"  {stage:<10} {n} files")
    print(f"\n🧾 Manifest: {out_dir / 'manifest.json'}")
    print("=" * 80 + "\n")


def run_stages(args, until: str):
    """Run the pipeline up to a stage and report"""
    print(f"\n🔄 Running stages up to: {until}")

    try:
        cfg = build_config(args)
        manifest = Pipeline(cfg, quiet=args.quiet).run(until)
    except PipelineStageError as e:
        print(f"❌ stage {e.stage} failed: {e.cause}", file=sys.stderr)
        sys.exit(1)
    except (ConfigError, ValueError) as e:
        print(f"❌ Configuration error: {e}", file=sys.stderr)
        sys.exit(1)

    print(f"\n✅ Completed {until}")
    print_manifest(manifest, Path(cfg.output_dir))


def stage_command(args):
    """Handle the per-stage subcommands"""
    run_stages(args, args.command)


def pipeline_command(args):
    """Handle pipeline command"""
    run_stages(args, args.stage or STAGES[-1])


def predict_command(args):
    """Handle predict command"""
    print(f"\n🤔 Predicting NS series with checkpoint: {args.checkpoint}")

    try:
        cfg = build_config(args)
        paths = Pipeline(cfg, quiet=args.quiet).predict(Path(args.checkpoint))
    except Exception as e:
        print(f"❌ stage predict failed: {e}", file=sys.stderr)
        sys.exit(1)

    print(f"\n✅ Wrote {len(paths)} predicted series")
    if paths:
        print(f"   Directory: {paths[0].parent}")


def add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", type=Path, default=None,
                        help=f"Key-value config file (default {settings.CONFIG_PATH})")
    parser.add_argument("--seed", type=int, default=None, help="Run seed")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--variant", choices=[v.value for v in Variant], default=None,
                        help="Predictor temporal branch")
    parser.add_argument("--participants", type=int, default=None, help="Synthetic participant count")
    parser.add_argument("--log-level", default=settings.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    parser.add_argument("--quiet", action="store_true", help="Disable progress bars")


def main():
    """Main entry point"""
    parser = argparse.ArgumentParser(
        description="Highlight Attention Lab - synthetic gaze, saliency and NS prediction"
    )

    subparsers = parser.add_subparsers(dest="command", help="Commands")

    helps = {
        "simulate": "Simulate drone monitoring tasks",
        "gaze-gen": "Generate synthetic gaze and key presses",
        "fixations": "Detect fixations, check calibration, segment trials",
        "saliency": "Build fixation heatmaps and split-half reliability",
        "ns": "Compute empirical NS series around critical events",
        "itti": "Compute ITTI baseline maps and NS series",
        "dataset": "Assemble the predictor dataset",
        "train": "Train the NS predictor",
        "eval": "Write map and regression reports",
        "stats": "Run condition comparisons and correlations",
        "export": "Export heatmaps and NS plots",
    }
    for stage in STAGES:
        stage_parser = subparsers.add_parser(stage, help=f"{helps[stage]} (runs earlier stages first)")
        add_common_flags(stage_parser)
        stage_parser.set_defaults(handler=stage_command)

    # Predict command
    predict_parser = subparsers.add_parser("predict", help="Predict NS series from a checkpoint")
    predict_parser.add_argument("checkpoint", help="Path to a saved model")
    add_common_flags(predict_parser)
    predict_parser.set_defaults(handler=predict_command)

    # Pipeline command
    pipeline_parser = subparsers.add_parser("pipeline", help="Run the full pipeline")
    pipeline_parser.add_argument("--stage", choices=STAGES, default=None,
                                 help="Stop after this stage")
    add_common_flags(pipeline_parser)
    pipeline_parser.set_defaults(handler=pipeline_command)

    args = parser.parse_args()

    if not hasattr(args, "handler"):
        parser.print_help()
        sys.exit(1)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args.quiet = args.quiet or not sys.stderr.isatty()

    args.handler(args)


if __name__ == "__main__":
    main()
