"""
Command-line entry point: one subcommand per pipeline stage plus `pipeline`
for the whole synthetic experiment.
"""

import argparse
import dataclasses
import json
import logging
import os
import sys

from voxdet.config import settings
from voxdet.config.stages import (
    LabelingConfig, PatchSpec, PipelineConfig, PostprocConfig, SynthConfig, TrainConfig,
)
from voxdet.core.errors import (
    FormatError, InfeasibleConfigError, InputFileError, TrainingDivergedError, ValidationError, VoxdetError,
)
from voxdet.core.points import load_points, save_points
from voxdet.core.volume import load_volume, save_volume
from voxdet.models.mlp import cross_entropy, fit_mlp, load_model, save_model
from voxdet.services.classifier_service import predict_voxelwise, sample_features
from voxdet.services.eval_service import average_precision, operating_point, pr_curve
from voxdet.services.labeling_service import make_label_volume, save_samples
from voxdet.services.pipeline_service import prepare_training, run_pipeline
from voxdet.services.postproc_service import detect
from voxdet.services.synth_service import generate, save_synth
from voxdet.utils.report import plot_pr_curves, save_pr_csv

logger = logging.getLogger(__name__)


# ============================================================
# Flag -> config helpers
# ============================================================


def _overrides(args, mapping):
    """{config_field: value} for every flag the user actually set."""
    out = {}
    for flag, field_name in mapping.items():
        value = getattr(args, flag, None)
        if value is not None:
            out[field_name] = value
    return out


SYNTH_FLAGS = {
    "dims": "dims", "n_objects": "n_objects", "object_radius": "object_radius_voxels",
    "intensity": "object_intensity", "noise_std": "background_noise_std",
    "min_separation": "min_separation", "border_clearance": "border_clearance", "synth_seed": "seed",
}
LABEL_FLAGS = {"r_l": "r_l", "negative_ratio": "negative_ratio", "label_seed": "seed",
               "ignore_radius": "ignore_radius", "border_margin": "border_margin"}
PATCH_FLAGS = {"scales": "scales", "patch_radius": "patch_radius"}
TRAIN_FLAGS = {"hidden": "hidden_sizes", "lr": "learning_rate", "epochs": "epochs",
               "batch_size": "minibatch_size", "train_seed": "seed", "l2": "l2_penalty"}
POSTPROC_FLAGS = {"r_a": "r_a", "r_n": "r_n", "floor": "confidence_floor",
                  "max_detections": "max_detections", "window": "window", "metric": "metric"}


def _build(cls, args, mapping, base=None):
    base = base if base is not None else cls()
    return dataclasses.replace(base, **_overrides(args, mapping))


def _pipeline_config(args):
    base = PipelineConfig()
    if args.config:
        if not os.path.exists(args.config):
            raise InputFileError(args.config)
        with open(args.config, "r", encoding="utf-8") as f:
            try:
                base = PipelineConfig.from_dict(json.load(f))
            except json.JSONDecodeError as e:
                raise FormatError(f"malformed JSON: {e}", args.config) from e
    top = _overrides(args, {"seed": "seed", "n_train_volumes": "n_train_volumes",
                            "n_test_volumes": "n_test_volumes", "r_match": "r_match"})
    return dataclasses.replace(
        base,
        labeling=_build(LabelingConfig, args, LABEL_FLAGS, base.labeling),
        patch=_build(PatchSpec, args, PATCH_FLAGS, base.patch),
        train=_build(TrainConfig, args, TRAIN_FLAGS, base.train),
        postproc=_build(PostprocConfig, args, POSTPROC_FLAGS, base.postproc),
        synth=_build(SynthConfig, args, SYNTH_FLAGS, base.synth),
        **top,
    )


def _dump(config_dict):
    print(json.dumps(config_dict, indent=2, sort_keys=True))
    return settings.EXIT_OK


# ============================================================
# Commands
# ============================================================


def cmd_synth(args):
    config = _build(SynthConfig, args, SYNTH_FLAGS)
    if args.dump_config:
        return _dump(config.to_dict())
    volume, points = generate(config)
    save_synth(volume, points, config, args.out_prefix)
    print(f"[Synth] wrote {args.out_prefix}.json ({len(points)} objects)")
    return settings.EXIT_OK


def cmd_labels(args):
    r_l = settings.R_L if args.r_l is None else args.r_l
    if args.dump_config:
        return _dump({"r_l": r_l})
    volume = load_volume(args.volume)
    points = load_points(args.points)
    labels = make_label_volume(points, volume.dims, r_l)
    save_volume(volume.like(labels.data), args.out)
    print(f"[Labels] {int(labels.data.sum())} positive voxels -> {args.out}")
    return settings.EXIT_OK


def cmd_train(args):
    labeling = _build(LabelingConfig, args, LABEL_FLAGS)
    spec = _build(PatchSpec, args, PATCH_FLAGS)
    train = _build(TrainConfig, args, TRAIN_FLAGS)
    if args.dump_config:
        return _dump({"labeling": labeling.to_dict(), "patch": spec.to_dict(), "train": train.to_dict()})

    volume = load_volume(args.volume)
    points = load_points(args.points)
    samples = prepare_training(volume, points, labeling, spec)
    if args.samples_out:
        save_samples(samples, args.samples_out)
    features, labels = sample_features(samples, volume, spec)
    model, losses = fit_mlp(features, labels, train)
    save_model(model, spec, args.out_model)

    n_pos = int(labels.sum())
    print(f"[Train] samples: {n_pos} positive, {len(labels) - n_pos} negative")
    print(f"[Train] final training loss: {cross_entropy(model, features, labels):.6f}")
    return settings.EXIT_OK


def cmd_infer(args):
    if args.dump_config:
        return _dump({"model": args.model})
    volume = load_volume(args.volume)
    model, spec = load_model(args.model)
    pred = predict_voxelwise(volume, model, spec, args.threads)
    save_volume(pred, args.out)
    print(f"[Infer] prediction volume {pred.dims} -> {args.out}")
    return settings.EXIT_OK


def cmd_detect(args):
    config = _build(PostprocConfig, args, POSTPROC_FLAGS)
    if args.dump_config:
        return _dump(config.to_dict())
    pred = load_volume(args.pred)
    dets = detect(pred, config)
    save_points(dets, args.out)
    print(f"[Detect] {len(dets)} detections -> {args.out}")
    return settings.EXIT_OK


def cmd_eval(args):
    r_match = settings.R_MATCH if args.r_match is None else args.r_match
    if args.dump_config:
        return _dump({"r_match": r_match, "matcher": args.matcher})
    if len(args.dets) != len(args.gt):
        raise ValidationError(f"{len(args.dets)} --dets files but {len(args.gt)} --gt files")
    dets = [load_points(p) for p in args.dets]
    gts = [load_points(p) for p in args.gt]
    curve = pr_curve(dets, gts, r_match, matcher=args.matcher, threads=args.threads)
    save_pr_csv(curve, args.out_csv)
    if args.out_svg:
        plot_pr_curves([curve], args.out_svg)

    print(f"AP = {average_precision(curve):.6f}")
    row = operating_point(curve, settings.TARGET_RECALL)
    if row is None:
        print(f"precision at recall {settings.TARGET_RECALL}: n/a (recall never reaches it)")
    else:
        print(f"precision at recall {settings.TARGET_RECALL}: {row.precision:.6f} "
              f"(threshold {row.threshold:.6g}, {row.tp + row.fp} detections to verify)")
    return settings.EXIT_OK


def cmd_pipeline(args):
    config = _pipeline_config(args)
    if args.dump_config:
        return _dump(config.to_dict())
    out_dir = args.out_dir or settings.DATA_DIR
    summary = run_pipeline(config, out_dir, args.threads)
    op = summary["operating_point"]
    print(f"AP = {summary['average_precision']:.6f}")
    if op["precision"] is None:
        print(f"precision at recall {op['target_recall']}: n/a")
    else:
        print(f"precision at recall {op['target_recall']}: {op['precision']:.6f}")
    print(f"[Pipeline] summary -> {os.path.join(out_dir, 'summary.json')}")
    return settings.EXIT_OK


# ============================================================
# Parser
# ============================================================


def _add_synth_flags(p):
    p.add_argument("--dims", type=int, nargs=3, metavar=("NX", "NY", "NZ"), help="volume size (default 64 64 64)")
    p.add_argument("--n-objects", type=int, help=f"objects per volume (default {settings.SYNTH_N_OBJECTS})")
    p.add_argument("--object-radius", type=float, help=f"object radius in voxels (default {settings.SYNTH_OBJECT_RADIUS})")
    p.add_argument("--intensity", type=float, help=f"blob amplitude (default {settings.SYNTH_OBJECT_INTENSITY})")
    p.add_argument("--noise-std", type=float, help=f"background noise std (default {settings.SYNTH_NOISE_STD})")
    p.add_argument("--min-separation", type=float, help=f"minimum center distance (default {settings.SYNTH_MIN_SEPARATION})")
    p.add_argument("--border-clearance", type=int, help="minimum center distance to any face (default receptive radius + object radius)")


def _add_label_flags(p):
    p.add_argument("--r-l", type=float, help=f"label radius in voxels (default {settings.R_L})")
    p.add_argument("--negative-ratio", type=float, help=f"negatives per positive (default {settings.NEGATIVE_RATIO})")
    p.add_argument("--label-seed", type=int, help="negative sampling seed")
    p.add_argument("--ignore-radius", type=float, help="never sample negatives this close to an object")
    p.add_argument("--border-margin", type=int, help="extra sampling margin (at least the receptive radius)")


def _add_model_flags(p):
    p.add_argument("--scales", type=int, nargs="+", help=f"downsample factors (default {' '.join(map(str, settings.PATCH_SCALES))})")
    p.add_argument("--patch-radius", type=int, help=f"patch radius per scale (default {settings.PATCH_RADIUS})")
    p.add_argument("--hidden", type=int, nargs="+", help=f"hidden layer sizes (default {' '.join(map(str, settings.HIDDEN_SIZES))})")
    p.add_argument("--lr", type=float, help=f"SGD learning rate (default {settings.LEARNING_RATE})")
    p.add_argument("--epochs", type=int, help=f"training epochs (default {settings.EPOCHS})")
    p.add_argument("--batch-size", type=int, help=f"minibatch size (default {settings.MINIBATCH_SIZE})")
    p.add_argument("--l2", type=float, help=f"L2 weight penalty (default {settings.L2_PENALTY})")
    p.add_argument("--train-seed", type=int, help="weight init / shuffling seed")


def _add_postproc_flags(p):
    p.add_argument("--r-a", type=float, help=f"averaging radius (default {settings.R_A})")
    p.add_argument("--r-n", type=float, help=f"suppression radius (default {settings.R_N})")
    p.add_argument("--floor", type=float, help=f"stop below this confidence (default {settings.CONFIDENCE_FLOOR})")
    p.add_argument("--max-detections", type=int, help="stop after this many detections")
    p.add_argument("--window", choices=settings.AVERAGING_WINDOWS, help="averaging window shape (default ball)")
    p.add_argument("--metric", choices=settings.NMS_METRICS, help="suppression distance (default euclidean)")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=settings.THREADS,
                        help="worker threads (default: VOXDET_THREADS or CPU count); results do not depend on it")
    common.add_argument("--log-level", default=settings.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="stderr log level")
    common.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")

    parser = argparse.ArgumentParser(prog="voxdet", description="Volumetric object detection toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic volume + ground truth")
    _add_synth_flags(p)
    p.add_argument("--seed", dest="synth_seed", type=int, help="generator seed (default 0)")
    p.add_argument("--out-prefix", required=True, help="writes PREFIX.json/.raw, PREFIX.gt.json, PREFIX.synth.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("labels", parents=[common], help="voxel-wise label volume from object centers")
    p.add_argument("--volume", required=True, help="image volume header (.json)")
    p.add_argument("--points", required=True, help="ground-truth points (.json)")
    p.add_argument("--r-l", type=float, help=f"label radius (default {settings.R_L})")
    p.add_argument("--out", required=True, help="output label volume header (.json)")
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("train", parents=[common], help="train the voxel classifier")
    p.add_argument("--volume", required=True, help="training image volume header (.json)")
    p.add_argument("--points", required=True, help="ground-truth object centers (.json)")
    _add_label_flags(p)
    _add_model_flags(p)
    p.add_argument("--samples-out", help="also write the sampled positions as JSON")
    p.add_argument("--out-model", required=True, help="output model file (.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="voxel-wise prediction volume")
    p.add_argument("--volume", required=True, help="image volume header (.json)")
    p.add_argument("--model", required=True, help="model file written by train")
    p.add_argument("--out", required=True, help="output prediction volume header (.json)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("detect", parents=[common], help="averaging + non-maximum suppression")
    p.add_argument("--pred", required=True, help="prediction volume header (.json)")
    _add_postproc_flags(p)
    p.add_argument("--out", required=True, help="detections (.json)")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", parents=[common], help="pooled precision-recall evaluation")
    p.add_argument("--dets", action="append", required=True, help="detections file (repeat, paired with --gt)")
    p.add_argument("--gt", action="append", required=True, help="ground-truth file (repeat, paired with --dets)")
    p.add_argument("--r-match", type=float, help=f"match radius (default {settings.R_MATCH})")
    p.add_argument("--matcher", choices=["greedy", "optimal"], default="greedy",
                   help="one-to-one matching rule (default greedy by confidence)")
    p.add_argument("--out-csv", required=True, help="precision-recall table")
    p.add_argument("--out-svg", help="also plot the curve as SVG")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", parents=[common], help="synthetic end-to-end experiment")
    p.add_argument("--seed", type=int, help=f"pipeline seed (default {settings.PIPELINE_SEED})")
    p.add_argument("--n-train-volumes", type=int, help=f"default {settings.N_TRAIN_VOLUMES}")
    p.add_argument("--n-test-volumes", type=int, help=f"default {settings.N_TEST_VOLUMES}")
    p.add_argument("--config", help="pipeline config JSON (as printed by --dump-config)")
    p.add_argument("--out-dir", help="output directory (default VOXDET_DATA_DIR)")
    _add_synth_flags(p)
    _add_label_flags(p)
    _add_model_flags(p)
    _add_postproc_flags(p)
    p.add_argument("--r-match", type=float, help=f"match radius (default {settings.R_MATCH})")
    p.set_defaults(func=cmd_pipeline)

    return parser


EXIT_CODES = (
    (InputFileError, settings.EXIT_IO_ERROR),
    (InfeasibleConfigError, settings.EXIT_INFEASIBLE_CONFIG),
    (TrainingDivergedError, settings.EXIT_TRAINING_DIVERGED),
    (FormatError, settings.EXIT_VALIDATION_ERROR),
    (ValidationError, settings.EXIT_VALIDATION_ERROR),
)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, args.log_level),
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except VoxdetError as e:
        for exc_type, code in EXIT_CODES:
            if isinstance(e, exc_type):
                print(f"error: {e}", file=sys.stderr)
                return code
        print(f"error: {e}", file=sys.stderr)
        return settings.EXIT_VALIDATION_ERROR
    except OSError as e:
        print(f"error: {e.strerror or e}: {e.filename or ''}", file=sys.stderr)
        return settings.EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
