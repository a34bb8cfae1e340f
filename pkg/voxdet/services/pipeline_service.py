"""
Pipeline service - synthetic train/test volumes -> labels -> balanced samples
-> MLP -> voxel-wise predictions -> averaging + NMS -> pooled PR evaluation.

The trained MLP is evaluated next to the ground-truth oracle and an untrained
(zero-weight) model under identical post-processing.
"""

import dataclasses
import logging
import os

import numpy as np

from voxdet.config.settings import TARGET_RECALL
from voxdet.core.points import save_points
from voxdet.models.mlp import fit_mlp, save_model
from voxdet.services.classifier_service import CLASSIFIERS, MlpClassifier, stack_training_data
from voxdet.services.eval_service import average_precision, operating_point, pr_curve
from voxdet.services.labeling_service import make_ignore_mask, make_label_volume, sample_balanced
from voxdet.services.postproc_service import detect
from voxdet.services.synth_service import generate, save_synth
from voxdet.utils.report import plot_pr_curves, save_pr_csv, write_json

logger = logging.getLogger(__name__)


def derive_seeds(seed, count):
    """Independent 32-bit seeds for every stage, fixed by the pipeline seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def prepare_training(volume, points, labeling, spec):
    """Labels + balanced samples for one training volume."""
    labels = make_label_volume(points, volume.dims, labeling.r_l)
    margin = max(labeling.border_margin, spec.receptive_radius)
    config = dataclasses.replace(labeling, border_margin=margin)
    ignore = None
    if config.ignore_radius is not None:
        ignore = make_ignore_mask(points, volume.dims, config.ignore_radius)
    return sample_balanced(labels, config, ignore)


def _operating_summary(curve, target):
    row = operating_point(curve, target)
    if row is None:
        return {"target_recall": target, "precision": None, "threshold": None, "detections_to_verify": None}
    return {
        "target_recall": target,
        "precision": row.precision,
        "threshold": row.threshold,
        "detections_to_verify": row.tp + row.fp,
    }


def run_pipeline(config, out_dir, threads=None):
    """Run every stage; writes artifacts under out_dir and returns the summary dict."""
    n_train, n_test = config.n_train_volumes, config.n_test_volumes
    seeds = derive_seeds(config.seed, n_train + n_test + 2)
    label_seed, train_seed = seeds[-2], seeds[-1]
    train_cfg = dataclasses.replace(config.train, seed=train_seed)
    spec = config.patch

    # Training volumes
    pairs = []
    n_pos = n_neg = 0
    for k in range(n_train):
        synth = dataclasses.replace(config.synth, seed=seeds[k])
        volume, points = generate(synth)
        save_synth(volume, points, synth, os.path.join(out_dir, f"train_{k:02d}"))
        samples = prepare_training(volume, points, dataclasses.replace(config.labeling, seed=label_seed + k), spec)
        n_pos += sum(s.label for s in samples)
        n_neg += sum(1 - s.label for s in samples)
        pairs.append((volume, samples))

    logger.info(f"[Pipeline] training on {n_pos} positive / {n_neg} negative samples")
    features, labels = stack_training_data(pairs, spec)
    model, losses = fit_mlp(features, labels, train_cfg)
    save_model(model, spec, os.path.join(out_dir, "model.json"))

    # Held-out volumes
    test = []
    for k in range(n_test):
        synth = dataclasses.replace(config.synth, seed=seeds[n_train + k])
        volume, points = generate(synth)
        save_synth(volume, points, synth, os.path.join(out_dir, f"test_{k:02d}"))
        test.append((volume, points))

    classifiers = {
        "learned": lambda gt: MlpClassifier(model, spec, threads),
        "untrained": lambda gt: MlpClassifier.untrained(spec, train_cfg.hidden_sizes, threads),
        "oracle": lambda gt: CLASSIFIERS["oracle"](gt, config.labeling.r_l),
    }
    curves = {}
    for name, make in classifiers.items():
        dets = []
        for k, (volume, points) in enumerate(test):
            pred = make(points).predict_volume(volume)
            found = detect(pred, config.postproc)
            if name == "learned":
                save_points(found, os.path.join(out_dir, f"test_{k:02d}.dets.json"))
            dets.append(found)
        curves[name] = pr_curve(dets, [p for _, p in test], config.r_match, threads=threads, label=name)
        logger.info(f"[Pipeline] {name}: AP={average_precision(curves[name]):.4f}")

    save_pr_csv(curves["learned"], os.path.join(out_dir, "pr.csv"))
    plot_pr_curves(list(curves.values()), os.path.join(out_dir, "pr.svg"))

    summary = {
        "seed": config.seed,
        "average_precision": average_precision(curves["learned"]),
        "operating_point": _operating_summary(curves["learned"], TARGET_RECALL),
        "baselines": {
            name: {"average_precision": average_precision(curves[name]),
                   "operating_point": _operating_summary(curves[name], TARGET_RECALL)}
            for name in ("untrained", "oracle")
        },
        "training": {
            "n_volumes": n_train,
            "n_positive": n_pos,
            "n_negative": n_neg,
            "final_loss": losses[-1],
        },
        "n_test_volumes": n_test,
        "n_test_objects": sum(len(p) for _, p in test),
        "config": config.to_dict(),
    }
    write_json(summary, os.path.join(out_dir, "summary.json"))
    return summary
