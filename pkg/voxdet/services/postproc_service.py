"""
Post-processing service - averaging of voxel-wise predictions followed by
iterative non-maximum suppression, producing ranked object detections.
"""

import logging
import math

import numpy as np
from scipy.ndimage import correlate

from voxdet.config.stages import PostprocConfig
from voxdet.core.geometry import ball_mask, clip_window
from voxdet.core.points import PointSet

logger = logging.getLogger(__name__)


def ball_average(pred, r_a):
    """Mean over the in-bounds part of the radius-r_a Euclidean ball at every voxel."""
    weights = ball_mask(r_a).astype(np.float64)
    sums = correlate(pred.data.astype(np.float64), weights, mode="constant", cval=0.0)
    counts = correlate(np.ones(pred.dims), weights, mode="constant", cval=0.0)
    return pred.like(sums / counts)


def integral_volume(values):
    """Summed-volume table with a leading zero plane on every axis."""
    table = values.astype(np.float64)
    for axis in range(3):
        table = table.cumsum(axis=axis)
    return np.pad(table, [(1, 0)] * 3, mode="constant")


def box_average(pred, r_a):
    """Mean over the in-bounds part of the (2*floor(r_a)+1)^3 cube at every voxel."""
    reach = int(math.floor(r_a))
    table = integral_volume(pred.data)
    lo, hi, lengths = [], [], []
    for n in pred.dims:
        idx = np.arange(n)
        a = np.clip(idx - reach, 0, n)
        b = np.clip(idx + reach + 1, 0, n)
        lo.append(a)
        hi.append(b)
        lengths.append(b - a)

    def corner(xs, ys, zs):
        return table[np.ix_(xs, ys, zs)]

    (x0, y0, z0), (x1, y1, z1) = lo, hi
    sums = (corner(x1, y1, z1) - corner(x0, y1, z1) - corner(x1, y0, z1) - corner(x1, y1, z0)
            + corner(x0, y0, z1) + corner(x0, y1, z0) + corner(x1, y0, z0) - corner(x0, y0, z0))
    counts = lengths[0][:, None, None] * lengths[1][None, :, None] * lengths[2][None, None, :]
    return pred.like(sums / counts)


def average_predictions(pred, r_a, window="ball"):
    if window == "ball":
        return ball_average(pred, r_a)
    if window == "cube":
        return box_average(pred, r_a)
    raise ValueError(f"unknown averaging window: {window!r}")


def nms_detect(avg, config=None):
    """
    Repeatedly take the global maximum (ties: smallest x-fastest linear index),
    emit it, and zero every voxel within r_n of it, until the maximum is at or
    below the confidence floor or max_detections is reached.
    """
    config = config or PostprocConfig()
    dims = avg.dims
    values = avg.flat().astype(np.float64)
    if values.size and (values.min() < 0.0 or values.max() > 1.0):
        logger.warning(f"[Detect] averaged values span [{values.min():.4g}, {values.max():.4g}], outside [0, 1]")

    # Sorting once is equivalent to re-scanning: unsuppressed values never change.
    order = np.argsort(-values, kind="stable")
    suppressed = np.zeros(values.size, dtype=bool)
    suppressed_xyz = suppressed.reshape(dims, order="F")
    mask = ball_mask(config.r_n, config.metric)
    reach = (mask.shape[0] - 1) // 2
    limit = config.max_detections

    coords, confs = [], []
    pos = 0
    while limit is None or len(coords) < limit:
        free = np.flatnonzero(~suppressed[order[pos:]])
        if free.size == 0:
            break
        pos += int(free[0])
        j = int(order[pos])
        value = values[j]
        if value <= config.confidence_floor:
            break
        coord = np.unravel_index(j, dims, order="F")
        coords.append(coord)
        confs.append(min(max(value, 0.0), 1.0))
        vol_sl, st_sl = clip_window(coord, reach, dims)
        suppressed_xyz[vol_sl] |= mask[st_sl]
        pos += 1

    logger.debug(f"[Detect] {len(coords)} detections (r_n={config.r_n}, floor={config.confidence_floor})")
    if not coords:
        return PointSet.empty(scored=True)
    return PointSet(np.asarray(coords, dtype=np.int64), np.asarray(confs))


def threshold_detections(dets, tau):
    """Leading detections with confidence >= tau."""
    dets = dets.with_confidence()
    below = dets.confidences < tau
    keep = int(np.argmax(below)) if np.any(below) else len(dets)
    return dets.head(keep)


def detect(pred, config=None):
    """Averaging + NMS in one call."""
    config = config or PostprocConfig()
    avg = average_predictions(pred, config.r_a, config.window)
    return nms_detect(avg, config)
