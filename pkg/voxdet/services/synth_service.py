"""
Synthetic volume service - elongated Gaussian blobs in Gaussian noise with
their centers as point annotations.
"""

import json
import logging
import math
import os

import numpy as np

from voxdet.config.settings import SYNTH_ATTEMPTS_PER_OBJECT, SYNTH_CLAMP, SYNTH_ELONGATION
from voxdet.core.errors import InfeasibleConfigError
from voxdet.core.points import PointSet, save_points
from voxdet.core.volume import Volume3, save_volume

logger = logging.getLogger(__name__)


def place_centers(config, rng):
    """Rejection-sample n_objects integer centers with pairwise distance >= min_separation."""
    lo = config.border_clearance
    highs = [n - 1 - lo for n in config.dims]
    if config.n_objects and any(h < lo for h in highs):
        raise InfeasibleConfigError(
            f"border clearance {lo} leaves no room for objects in volume {config.dims}")

    budget = SYNTH_ATTEMPTS_PER_OBJECT * config.n_objects
    min_sq = config.min_separation ** 2
    centers = []
    attempts = 0
    while len(centers) < config.n_objects:
        if attempts >= budget:
            raise InfeasibleConfigError(
                f"placed only {len(centers)}/{config.n_objects} objects after {budget} attempts "
                f"(min_separation={config.min_separation}, dims={config.dims})")
        attempts += 1
        c = rng.integers(lo, np.asarray(highs) + 1)
        if all(float(np.sum((c - p) ** 2)) >= min_sq for p in centers):
            centers.append(c)
    logger.debug(f"[Synth] placed {len(centers)} objects in {attempts} attempts")
    return np.asarray(centers, dtype=np.int64).reshape(-1, 3)


def render_blob(out, center, sigmas, amplitude):
    """Add an axis-aligned Gaussian bump in place (window of +-4 sigma)."""
    slices, grids = [], []
    for c, s, n in zip(center, sigmas, out.shape):
        reach = int(math.ceil(4 * s))
        lo, hi = max(int(c) - reach, 0), min(int(c) + reach + 1, n)
        slices.append(slice(lo, hi))
        grids.append(((np.arange(lo, hi) - c) / s) ** 2)
    q = grids[0][:, None, None] + grids[1][None, :, None] + grids[2][None, None, :]
    out[tuple(slices)] += amplitude * np.exp(-0.5 * q)


def generate(config):
    """Returns (Volume3, PointSet) - deterministic given config.seed."""
    rng = np.random.default_rng(config.seed)
    centers = place_centers(config, rng)
    long_axes = rng.integers(0, 3, size=len(centers))

    data = np.zeros(config.dims, dtype=np.float64)
    sigma = config.object_radius_voxels / 2.0
    for c, axis in zip(centers, long_axes):
        sigmas = [sigma] * 3
        sigmas[int(axis)] = sigma * SYNTH_ELONGATION
        render_blob(data, c, sigmas, config.object_intensity)

    if config.background_noise_std > 0:
        data += rng.normal(0.0, config.background_noise_std, size=config.dims)
    np.clip(data, SYNTH_CLAMP[0], SYNTH_CLAMP[1], out=data)

    logger.info(f"[Synth] {len(centers)} objects in {config.dims} volume (seed {config.seed})")
    return Volume3(data), PointSet(centers)


def save_synth(volume, points, config, prefix):
    """`<prefix>.json/.raw` volume, `<prefix>.gt.json` points, `<prefix>.synth.json` config echo."""
    save_volume(volume, prefix + ".json")
    save_points(points, prefix + ".gt.json")
    os.makedirs(os.path.dirname(os.path.abspath(prefix)) or ".", exist_ok=True)
    with open(prefix + ".synth.json", "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=1, sort_keys=True)
        f.write("\n")
