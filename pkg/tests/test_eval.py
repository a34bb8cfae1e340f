import csv
import logging
import math

import numpy as np
import pytest

from tests import reference
from voxdet.core.errors import ValidationError
from voxdet.core.points import PointSet
from voxdet.services.eval_service import (
    PrCurve, PrRow, average_precision, match_detections, match_detections_optimal, operating_point, pr_curve,
)
from voxdet.services.postproc_service import threshold_detections
from voxdet.utils.report import plot_pr_curves, save_pr_csv


# ============================================================
# Matching
# ============================================================


def test_no_detections():
    gt = PointSet([[i, i, i] for i in range(5)])
    m = match_detections(PointSet.empty(scored=True), gt, 30)
    assert m.tp == () and m.fp == ()
    assert m.fn == (0, 1, 2, 3, 4)


def test_second_detection_finds_ground_truth_consumed():
    gt = PointSet([[10, 10, 10]])
    dets = PointSet([[12, 10, 10], [10, 10, 12]], [0.9, 0.8])
    m = match_detections(dets, gt, 30)
    assert m.tp == ((0, 0),)
    assert m.fp == (1,)
    assert m.fn == ()


def test_nearest_then_smallest_index():
    gt = PointSet([[10, 0, 0], [0, 0, 0], [6, 0, 0]])
    dets = PointSet([[3, 0, 0], [3, 0, 0]], [0.9, 0.9])
    m = match_detections(dets, gt, 5)
    # det 0 is 3 from gt 1 and gt 2; tie goes to gt 1
    assert m.tp == ((0, 1), (1, 2))


def test_match_radius_is_inclusive():
    m = match_detections(PointSet([[0, 3, 4]], [1.0]), PointSet([[0, 0, 0]]), 5.0)
    assert m.tp == ((0, 0),)


def test_unsorted_detections_are_rejected():
    dets = PointSet([[0, 0, 0], [1, 1, 1]], [0.2, 0.7])
    with pytest.raises(ValidationError):
        match_detections(dets, PointSet.empty(), 30)


def test_greedy_can_fall_short_of_optimal():
    gt = PointSet([[10, 0, 0], [30, 0, 0]])
    dets = PointSet([[20, 0, 0], [0, 0, 0]], [0.9, 0.8])
    assert len(match_detections(dets, gt, 10).tp) == 1
    optimal = match_detections_optimal(dets, gt, 10)
    assert optimal.tp == ((0, 1), (1, 0))
    assert optimal.fp == () and optimal.fn == ()


def _random_instance(rng):
    n_det, n_gt = int(rng.integers(0, 7)), int(rng.integers(0, 7))
    dets = PointSet(rng.integers(0, 20, size=(n_det, 3)), np.sort(rng.random(n_det))[::-1])
    gt = PointSet(rng.integers(0, 20, size=(n_gt, 3)))
    return dets, gt, float(rng.integers(3, 11))


@pytest.mark.parametrize("seed", range(10))
def test_matching_accounting(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        dets, gt, r = _random_instance(rng)
        greedy = match_detections(dets, gt, r)
        optimal = match_detections_optimal(dets, gt, r)
        for m in (greedy, optimal):
            assert sorted([i for i, _ in m.tp] + list(m.fp)) == list(range(len(dets)))
            assert sorted([g for _, g in m.tp] + list(m.fn)) == list(range(len(gt)))
            for i, g in m.tp:
                assert reference.within(dets.coords[i], gt.coords[g], r)
        best = reference.max_matching_size(dets.coords, gt.coords, r)
        assert len(optimal.tp) == best
        assert len(greedy.tp) <= best


def test_optimal_is_permutation_invariant(rng):
    for _ in range(50):
        dets, gt, r = _random_instance(rng)
        perm = rng.permutation(len(gt))
        shuffled = PointSet(gt.coords[perm])
        assert len(match_detections_optimal(dets, gt, r).tp) == len(match_detections_optimal(dets, shuffled, r).tp)


# ============================================================
# Precision-recall curves
# ============================================================


def test_detections_equal_to_ground_truth():
    gt = PointSet([[5, 5, 5], [20, 20, 20]])
    curve = pr_curve([gt.with_confidence()], [gt], 0.0)
    assert curve.rows[0].threshold == math.inf
    last = curve.rows[-1]
    assert (last.precision, last.recall) == (1.0, 1.0)
    assert average_precision(curve) == 1.0


def test_unscored_detections_count_as_confidence_one():
    gt = PointSet([[5, 5, 5]])
    curve = pr_curve([gt], [gt], 30)
    assert [r.threshold for r in curve.rows] == [math.inf, 1.0]


def test_no_detections_anywhere():
    curve = pr_curve([PointSet.empty(scored=True)] * 2, [PointSet([[1, 1, 1]]), PointSet.empty()], 30)
    assert curve.rows == (PrRow(math.inf, 1.0, 0.0, 0, 0, 1),)


def test_pooled_two_volume_fixture():
    gt_a = PointSet([[10, 10, 10], [100, 100, 100]])
    dets_a = PointSet([[10, 10, 10], [200, 200, 200]], [0.9, 0.5])
    gt_b = PointSet([[5, 5, 5]])
    dets_b = PointSet([[5, 5, 5]], [0.5])
    curve = pr_curve([dets_a, dets_b], [gt_a, gt_b], 30)
    row = next(r for r in curve.rows if r.threshold == 0.5)
    assert (row.tp, row.fp, row.fn) == (2, 1, 1)
    assert row.precision == pytest.approx(2 / 3)
    assert row.recall == pytest.approx(2 / 3)


@pytest.mark.parametrize("matcher", ["greedy", "optimal"])
@pytest.mark.parametrize("seed", range(5))
def test_curve_accounting(seed, matcher):
    rng = np.random.default_rng(100 + seed)
    instances = [_random_instance(rng) for _ in range(4)]
    dets = [d for d, _, _ in instances]
    gts = [g for _, g, _ in instances]
    curve = pr_curve(dets, gts, 6.0, matcher=matcher)
    total_gt = sum(len(g) for g in gts)
    thresholds = [r.threshold for r in curve.rows]
    assert thresholds == sorted(thresholds, reverse=True)
    for row in curve.rows:
        assert row.tp + row.fn == total_gt
        assert row.tp + row.fp == sum(len(threshold_detections(d, row.threshold)) for d in dets)
        assert 0.0 <= row.precision <= 1.0 and 0.0 <= row.recall <= 1.0
    recalls = [r.recall for r in curve.rows]
    assert recalls == sorted(recalls)


@pytest.mark.parametrize("matcher", ["greedy", "optimal"])
@pytest.mark.parametrize("seed", range(10))
def test_larger_match_radius_never_loses_true_positives(seed, matcher):
    rng = np.random.default_rng(300 + seed)
    instances = [_random_instance(rng) for _ in range(3)]
    dets = [d for d, _, _ in instances]
    gts = [g for _, g, _ in instances]
    curves = [pr_curve(dets, gts, r, matcher=matcher) for r in (2.0, 4.0, 6.5, 10.0, 40.0)]
    for small, large in zip(curves, curves[1:]):
        assert [r.threshold for r in small.rows] == [r.threshold for r in large.rows]
        for a, b in zip(small.rows, large.rows):
            assert b.tp >= a.tp


@pytest.mark.parametrize("matcher", ["greedy", "optimal"])
@pytest.mark.parametrize("seed", range(5))
def test_volume_order_does_not_change_curve(seed, matcher):
    rng = np.random.default_rng(400 + seed)
    instances = [_random_instance(rng) for _ in range(5)]
    order = rng.permutation(len(instances))
    curve = pr_curve([d for d, _, _ in instances], [g for _, g, _ in instances], 6.0, matcher=matcher)
    shuffled = pr_curve([instances[k][0] for k in order], [instances[k][1] for k in order], 6.0, matcher=matcher)
    assert shuffled.rows == curve.rows


@pytest.mark.parametrize("seed", range(5))
def test_greedy_sweep_equals_matching_each_threshold(seed):
    rng = np.random.default_rng(seed)
    dets, gt, r = _random_instance(rng)
    curve = pr_curve([dets], [gt], r)
    for row in curve.rows:
        m = match_detections(threshold_detections(dets, row.threshold), gt, r)
        assert (row.tp, row.fp, row.fn) == (len(m.tp), len(m.fp), len(m.fn))


def test_thread_count_does_not_change_curve(rng):
    instances = [_random_instance(rng) for _ in range(6)]
    dets = [d for d, _, _ in instances]
    gts = [g for _, g, _ in instances]
    assert pr_curve(dets, gts, 8, threads=1) == pr_curve(dets, gts, 8, threads=4)


def test_no_ground_truth_warns(caplog):
    with caplog.at_level(logging.WARNING):
        curve = pr_curve([PointSet([[1, 2, 3]], [0.4])], [PointSet.empty()], 30)
    assert "[Eval]" in caplog.text
    assert curve.rows[-1].recall == 0.0


def test_argument_errors():
    with pytest.raises(ValidationError):
        pr_curve([PointSet.empty()], [], 30)
    with pytest.raises(ValidationError):
        pr_curve([PointSet.empty()], [PointSet.empty()], 30, matcher="hungarian")


# ============================================================
# Summaries
# ============================================================


def _curve(*rows):
    return PrCurve(tuple(PrRow(*r) for r in rows))


def test_average_precision_hand_fixture():
    curve = _curve((math.inf, 1.0, 0.0, 0, 0, 4), (0.9, 1.0, 0.5, 2, 0, 2), (0.5, 0.5, 0.75, 3, 3, 1))
    assert average_precision(curve) == pytest.approx(1.0 * 0.5 + 0.5 * 0.25)


def test_average_precision_all_false_positives():
    dets = PointSet([[50, 50, 50], [90, 90, 90]], [0.8, 0.6])
    curve = pr_curve([dets], [PointSet([[0, 0, 0]])], 30)
    assert average_precision(curve) == 0.0


def test_average_precision_of_empty_curve():
    with pytest.raises(ValidationError):
        average_precision(PrCurve(()))


def test_operating_point():
    curve = _curve((math.inf, 1.0, 0.0, 0, 0, 10), (0.8, 1.0, 0.6, 6, 0, 4),
                   (0.6, 0.9, 0.9, 9, 1, 1), (0.2, 0.5, 1.0, 10, 10, 0))
    row = operating_point(curve, 0.9)
    assert (row.threshold, row.precision, row.tp + row.fp) == (0.6, 0.9, 10)
    assert operating_point(_curve((math.inf, 1.0, 0.0, 0, 0, 3)), 0.9) is None


# ============================================================
# Result files
# ============================================================


def test_pr_csv_reads_back_exactly(tmp_path):
    dets = PointSet([[1, 1, 1], [9, 9, 9], [40, 40, 40]], [0.7, 1 / 3, 0.1])
    curve = pr_curve([dets], [PointSet([[1, 1, 2], [9, 9, 9]])], 5)
    save_pr_csv(curve, tmp_path / "pr.csv")
    with open(tmp_path / "pr.csv", newline="") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["threshold", "precision", "recall", "tp", "fp", "fn"]
    for text, row in zip(rows[1:], curve.rows):
        assert [float(v) for v in text[:3]] == [row.threshold, row.precision, row.recall]
        assert [int(v) for v in text[3:]] == [row.tp, row.fp, row.fn]


def test_svg_plot_is_deterministic(tmp_path):
    gt = PointSet([[5, 5, 5], [30, 30, 30]])
    dets = PointSet([[5, 5, 6], [60, 60, 60]], [0.9, 0.4])
    curves = [pr_curve([dets], [gt], 30, label="a"), pr_curve([gt], [gt], 30, label="b")]
    plot_pr_curves(curves, tmp_path / "one.svg")
    plot_pr_curves(curves, tmp_path / "two.svg")
    first = (tmp_path / "one.svg").read_bytes()
    assert first.lstrip().startswith(b"<?xml")
    assert first == (tmp_path / "two.svg").read_bytes()
