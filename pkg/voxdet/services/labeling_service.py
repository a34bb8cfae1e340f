"""
Labeling service - turns object centers into voxel-wise training labels and
draws class-balanced training samples from them.
"""

import json
import logging
import os
from typing import NamedTuple

import numpy as np

from voxdet.core.errors import ValidationError
from voxdet.core.geometry import Coordinate, ball_mask, clip_window
from voxdet.core.points import check_inside
from voxdet.core.volume import Volume3, check_dims

logger = logging.getLogger(__name__)


class LabeledSample(NamedTuple):
    position: Coordinate
    label: int


def make_label_volume(points, dims, r_l):
    """1.0 at every voxel within r_l (inclusive) of some point, else 0.0."""
    dims = check_dims(dims)
    check_inside(points, dims)
    mask = ball_mask(r_l)
    reach = (mask.shape[0] - 1) // 2
    labels = np.zeros(dims, dtype=bool)
    for c in points.coords:
        vol_sl, st_sl = clip_window(c, reach, dims)
        labels[vol_sl] |= mask[st_sl]
    return Volume3(labels.astype(np.float32))


def make_ignore_mask(points, dims, radius):
    """Voxels within radius of any point; negatives are never drawn there."""
    return make_label_volume(points, dims, radius)


def _interior(dims, margin):
    sl = tuple(slice(margin, n - margin) for n in dims)
    if any(s.start >= s.stop for s in sl):
        raise ValidationError(f"border margin {margin} leaves no interior in volume {dims}")
    return sl


def _scan_order_positions(mask, margin):
    """Coordinates of True voxels in x-fastest scan order, offset by margin."""
    idx = np.argwhere(mask.transpose(2, 1, 0))[:, ::-1]
    return idx + margin


def sample_balanced(labels, config, ignore=None):
    """
    Every interior positive plus floor(ratio * #positives) interior negatives
    drawn uniformly without replacement. Positives come first in scan order,
    then the sampled negatives in scan order.
    """
    data = labels.data
    if not np.all((data == 0.0) | (data == 1.0)):
        raise ValidationError("label volume must be binary (0.0 / 1.0)")

    margin = int(config.border_margin)
    sl = _interior(labels.dims, margin)
    inner = data[sl]
    positives = _scan_order_positions(inner == 1.0, margin)
    if len(positives) == 0:
        raise ValidationError("no positive voxels inside the border margin; volume is unusable for training")

    candidates = inner == 0.0
    if ignore is not None:
        if ignore.dims != labels.dims:
            raise ValidationError(f"ignore mask dims {ignore.dims} differ from label dims {labels.dims}")
        candidates &= ignore.data[sl] == 0.0
    negatives = _scan_order_positions(candidates, margin)

    wanted = int(np.floor(config.negative_ratio * len(positives)))
    rng = np.random.default_rng(config.seed)
    if wanted < len(negatives):
        picked = np.sort(rng.choice(len(negatives), size=wanted, replace=False))
        negatives = negatives[picked]
    else:
        logger.info(f"[Labels] only {len(negatives)} negatives available ({wanted} requested); taking all")

    logger.info(f"[Labels] sampled {len(positives)} positives + {len(negatives)} negatives (margin {margin})")
    samples = [LabeledSample(Coordinate(*map(int, p)), 1) for p in positives]
    samples += [LabeledSample(Coordinate(*map(int, p)), 0) for p in negatives]
    return samples


def save_samples(samples, path):
    """Debug export: [{"x", "y", "z", "label"}, ...]."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    rows = [{"x": s.position.x, "y": s.position.y, "z": s.position.z, "label": s.label} for s in samples]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(rows, f, indent=1)
        f.write("\n")
