import numpy as np
import pytest

from voxdet.core.geometry import (
    Coordinate, ball_mask, clip_window, euclidean_distance, pairwise_distances,
)


@pytest.mark.parametrize("a,b,expected", [
    ((0, 0, 0), (0, 0, 0), 0.0),
    ((0, 0, 0), (3, 4, 0), 5.0),
    ((1, 2, 3), (4, 6, 3), 5.0),
])
def test_euclidean_distance_examples(a, b, expected):
    assert euclidean_distance(Coordinate(*a), Coordinate(*b)) == expected


def test_euclidean_distance_is_a_metric(rng):
    for _ in range(500):
        a, b, c = (tuple(int(v) for v in rng.integers(0, 50, 3)) for _ in range(3))
        assert euclidean_distance(a, b) == euclidean_distance(b, a)
        assert (euclidean_distance(a, b) == 0.0) == (a == b)
        assert euclidean_distance(a, c) <= euclidean_distance(a, b) + euclidean_distance(b, c) + 1e-12


def test_pairwise_distances_match_scalar(rng):
    a = rng.integers(0, 30, size=(7, 3))
    b = rng.integers(0, 30, size=(5, 3))
    d = pairwise_distances(a, b)
    assert d.shape == (7, 5)
    for i in range(7):
        for j in range(5):
            assert d[i, j] == euclidean_distance(a[i], b[j])


def test_ball_mask_counts():
    assert ball_mask(0).sum() == 1
    assert ball_mask(1).sum() == 7
    assert ball_mask(2).sum() == 33
    assert ball_mask(1, "chebyshev").sum() == 27
    assert ball_mask(2.5).shape == (5, 5, 5)


def test_ball_mask_rejects_bad_input():
    with pytest.raises(ValueError):
        ball_mask(-1)
    with pytest.raises(ValueError):
        ball_mask(2, "manhattan")


def test_clip_window_at_corner():
    vol_sl, st_sl = clip_window((0, 1, 9), 2, (10, 10, 10))
    assert vol_sl == (slice(0, 3), slice(0, 4), slice(7, 10))
    assert st_sl == (slice(2, 5), slice(1, 5), slice(0, 3))
