"""
Evaluation service - distance-matched precision/recall of detections against
ground truth, pooled over any number of volumes.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from voxdet.config.settings import R_MATCH, TARGET_RECALL
from voxdet.core.errors import ValidationError
from voxdet.core.geometry import pairwise_distances
from voxdet.services.postproc_service import threshold_detections
from voxdet.utils.parallel import ordered_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MatchResult:
    tp: tuple   # (detection index, ground-truth index) pairs
    fp: tuple   # detection indices
    fn: tuple   # ground-truth indices


class PrRow(NamedTuple):
    threshold: float
    precision: float
    recall: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class PrCurve:
    """Rows ordered by descending threshold, starting with the +inf sentinel."""

    rows: tuple
    match_radius: float = R_MATCH
    label: str = ""


def _as_detections(dets):
    dets = dets.with_confidence()
    if not dets.is_sorted():
        raise ValidationError("detections must be sorted by non-increasing confidence")
    return dets


def match_detections(dets, gt, r_match=R_MATCH):
    """
    Greedy one-to-one matching in confidence order: each detection takes the
    nearest still-unmatched ground-truth point within r_match (ties go to the
    smaller ground-truth index).
    """
    dets = _as_detections(dets)
    n_det, n_gt = len(dets), len(gt)
    if n_det == 0 or n_gt == 0:
        return MatchResult((), tuple(range(n_det)), tuple(range(n_gt)))

    dist = pairwise_distances(dets.coords, gt.coords)
    taken = np.zeros(n_gt, dtype=bool)
    tp, fp = [], []
    for i in range(n_det):
        row = np.where(taken | (dist[i] > r_match), np.inf, dist[i])
        g = int(np.argmin(row))
        if np.isfinite(row[g]):
            taken[g] = True
            tp.append((i, g))
        else:
            fp.append(i)
    fn = tuple(int(g) for g in np.flatnonzero(~taken))
    return MatchResult(tuple(tp), tuple(fp), fn)


def match_detections_optimal(dets, gt, r_match=R_MATCH):
    """Maximum-cardinality one-to-one matching within r_match (confidence-agnostic)."""
    dets = _as_detections(dets)
    n_det, n_gt = len(dets), len(gt)
    if n_det == 0 or n_gt == 0:
        return MatchResult((), tuple(range(n_det)), tuple(range(n_gt)))

    within = pairwise_distances(dets.coords, gt.coords) <= r_match
    rows, cols = linear_sum_assignment(np.where(within, 0.0, 1.0))
    tp = tuple(sorted((int(r), int(c)) for r, c in zip(rows, cols) if within[r, c]))
    det_hit = {i for i, _ in tp}
    gt_hit = {g for _, g in tp}
    fp = tuple(i for i in range(n_det) if i not in det_hit)
    fn = tuple(g for g in range(n_gt) if g not in gt_hit)
    return MatchResult(tp, fp, fn)


MATCHERS = {
    "greedy": match_detections,
    "optimal": match_detections_optimal,
}


def _precision_recall(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return precision, recall


def _greedy_counts(dets, gt, thresholds, r_match):
    """tp/fp/fn per threshold from one full greedy pass.

    Greedy decisions for a detection depend only on higher-ranked detections,
    so matching a thresholded prefix equals the prefix of the full matching.
    """
    result = match_detections(dets, gt, r_match)
    hit = np.zeros(len(dets), dtype=np.int64)
    for i, _ in result.tp:
        hit[i] = 1
    cum_tp = np.concatenate([[0], np.cumsum(hit)])
    counts = []
    for tau in thresholds:
        k = len(threshold_detections(dets, tau))
        tp = int(cum_tp[k])
        counts.append((tp, k - tp, len(gt) - tp))
    return counts


def _optimal_counts(dets, gt, thresholds, r_match):
    counts = []
    for tau in thresholds:
        m = match_detections_optimal(threshold_detections(dets, tau), gt, r_match)
        counts.append((len(m.tp), len(m.fp), len(m.fn)))
    return counts


def pr_curve(dets_per_volume, gt_per_volume, r_match=R_MATCH, matcher="greedy", threads=None, label=""):
    """Micro-averaged precision/recall at every distinct detection confidence."""
    if len(dets_per_volume) != len(gt_per_volume):
        raise ValidationError(
            f"{len(dets_per_volume)} detection sets but {len(gt_per_volume)} ground-truth sets")
    if matcher not in MATCHERS:
        raise ValidationError(f"unknown matcher {matcher!r}; choose from {sorted(MATCHERS)}")

    dets_per_volume = [_as_detections(d) for d in dets_per_volume]
    confs = [d.confidences for d in dets_per_volume if len(d)]
    distinct = np.unique(np.concatenate(confs)) if confs else np.zeros(0)
    thresholds = [math.inf] + [float(t) for t in distinct[::-1]]

    total_gt = sum(len(g) for g in gt_per_volume)
    if total_gt == 0:
        logger.warning("[Eval] no ground-truth points; recall is reported as 0")

    counter = _greedy_counts if matcher == "greedy" else _optimal_counts
    per_volume = ordered_map(
        lambda pair: counter(pair[0], pair[1], thresholds, r_match),
        list(zip(dets_per_volume, gt_per_volume)), threads)

    rows = []
    for t_idx, tau in enumerate(thresholds):
        tp = sum(c[t_idx][0] for c in per_volume)
        fp = sum(c[t_idx][1] for c in per_volume)
        fn = sum(c[t_idx][2] for c in per_volume)
        precision, recall = _precision_recall(tp, fp, fn)
        rows.append(PrRow(tau, precision, recall, tp, fp, fn))
    return PrCurve(tuple(rows), float(r_match), label)


def average_precision(curve):
    """Sum of precision x recall increment, walking rows in threshold order."""
    if not curve.rows:
        raise ValidationError("empty precision-recall curve")
    ap = 0.0
    prev_recall = 0.0
    for row in curve.rows:
        ap += row.precision * (row.recall - prev_recall)
        prev_recall = row.recall
    return ap


def operating_point(curve, target_recall=TARGET_RECALL) -> Optional[PrRow]:
    """Highest-threshold row whose recall reaches target_recall, or None."""
    for row in curve.rows:
        if row.recall >= target_recall:
            return row
    return None
