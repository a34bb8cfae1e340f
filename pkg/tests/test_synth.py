import json

import numpy as np
import pytest

from voxdet.config.stages import SynthConfig
from voxdet.core.errors import InfeasibleConfigError
from voxdet.core.geometry import pairwise_distances
from voxdet.core.points import load_points
from voxdet.core.volume import load_volume
from voxdet.services.labeling_service import make_label_volume
from voxdet.services.synth_service import generate, render_blob, save_synth


def test_no_objects_gives_pure_noise():
    volume, points = generate(SynthConfig(n_objects=0, seed=3))
    assert volume.dims == (64, 64, 64)
    assert len(points) == 0
    assert volume.data.std() > 0


def test_same_seed_is_bitwise_identical():
    a_vol, a_pts = generate(SynthConfig(seed=12))
    b_vol, b_pts = generate(SynthConfig(seed=12))
    assert a_vol.flat().tobytes() == b_vol.flat().tobytes()
    assert a_pts == b_pts


def test_different_seeds_differ():
    a_vol, _ = generate(SynthConfig(seed=1))
    b_vol, _ = generate(SynthConfig(seed=2))
    assert a_vol.flat().tobytes() != b_vol.flat().tobytes()


@pytest.mark.parametrize("seed", range(50))
def test_default_config_places_for_every_seed(seed):
    config = SynthConfig(seed=seed)
    _, points = generate(config)
    assert len(points) == config.n_objects
    d = pairwise_distances(points.coords, points.coords)
    np.fill_diagonal(d, np.inf)
    assert d.min() >= config.min_separation > 21.0


def test_default_placement_constraints(default_test_volumes):
    config = SynthConfig()
    for volume, points in default_test_volumes:
        assert len(points) == config.n_objects
        d = pairwise_distances(points.coords, points.coords)
        np.fill_diagonal(d, np.inf)
        assert np.all(d >= config.min_separation)
        assert np.all(d >= 12)
        lo = config.border_clearance
        for c, n in zip(points.coords.T, volume.dims):
            assert np.all((c >= lo) & (c <= n - 1 - lo))
        assert volume.data.min() >= 0.0 and volume.data.max() <= 2.0


def test_noise_free_argmax_is_at_center():
    volume, points = generate(SynthConfig(n_objects=1, background_noise_std=0.0, seed=4))
    peak = np.unravel_index(int(np.argmax(volume.data)), volume.dims)
    assert pairwise_distances([peak], points.coords)[0, 0] <= 1.0


def test_objects_stand_out_from_background(default_test_volumes):
    config = SynthConfig()
    sigma = config.background_noise_std
    background, centers, balls = [], [], []
    for volume, points in default_test_volumes:
        data = volume.data.astype(np.float64)
        inside = make_label_volume(points, volume.dims, config.object_radius_voxels).data == 1.0
        far = make_label_volume(points, volume.dims, 12).data == 0.0
        background.append(data[far])
        centers.append(data[tuple(points.coords.T)])
        balls.append(data[inside])
    background = np.concatenate(background).mean()
    assert np.concatenate(centers).mean() >= background + 3 * sigma
    assert np.concatenate(balls).mean() >= background + sigma


def test_render_blob_elongation():
    out = np.zeros((21, 21, 21))
    render_blob(out, (10, 10, 10), [1.0, 1.8, 1.0], 1.0)
    assert out[10, 10, 10] == 1.0
    assert out[10, 13, 10] > out[13, 10, 10] == pytest.approx(out[10, 10, 13])


def test_infeasible_separation():
    config = SynthConfig(dims=(30, 30, 30), n_objects=10)
    with pytest.raises(InfeasibleConfigError):
        generate(config)


def test_no_room_inside_clearance():
    with pytest.raises(InfeasibleConfigError):
        generate(SynthConfig(dims=(20, 20, 20), n_objects=1))


def test_save_synth(tmp_path, small_synth):
    volume, points = generate(small_synth)
    save_synth(volume, points, small_synth, str(tmp_path / "case"))
    assert load_volume(tmp_path / "case.json") == volume
    assert load_points(tmp_path / "case.gt.json") == points
    echoed = json.loads((tmp_path / "case.synth.json").read_text())
    assert SynthConfig.from_dict(echoed) == small_synth
