"""
Multi-scale patch features.

For each scale s the (2r+1)^3 cube around position // s is read from the
factor-s downsampled volume; cubes are concatenated in scale order, each
flattened x-fastest. Raw intensities - standardization lives in the model.
"""

import numpy as np

from voxdet.core.errors import ValidationError
from voxdet.core.geometry import offset_grid
from voxdet.core.volume import downsample_avg


class FeaturePyramid:
    """Downsampled levels of one volume, computed once and shared by all lookups."""

    def __init__(self, volume, spec):
        self.spec = spec
        self.dims = volume.dims
        self.levels = [downsample_avg(volume, s).data for s in spec.scales]
        dx, dy, dz = offset_grid(spec.patch_radius)
        # x-fastest flattening of the cube offsets
        self._offsets = tuple(d.ravel(order="F") for d in (dx, dy, dz))

    def check_position(self, position):
        r = self.spec.receptive_radius
        for c, n in zip(position, self.dims):
            if c < r or c > n - 1 - r:
                raise ValidationError(
                    f"position {tuple(int(v) for v in position)} is closer than {r} voxels "
                    f"to the border of volume {self.dims}")

    def features(self, position):
        """Feature vector (float64) for one interior position."""
        self.check_position(position)
        return self.batch(np.asarray([position], dtype=np.int64))[0]

    def batch(self, positions):
        """(n, feature_dim) features for an (n, 3) array of interior positions."""
        positions = np.asarray(positions, dtype=np.int64).reshape(-1, 3)
        ox, oy, oz = self._offsets
        blocks = []
        for s, level in zip(self.spec.scales, self.levels):
            q = positions // s
            blocks.append(level[q[:, 0:1] + ox[None, :],
                                q[:, 1:2] + oy[None, :],
                                q[:, 2:3] + oz[None, :]])
        return np.concatenate(blocks, axis=1).astype(np.float64)


def extract_features(volume, position, spec):
    return FeaturePyramid(volume, spec).features(position)


def interior_bounds(dims, spec):
    """Per-axis (lo, hi) inclusive range of positions with a full receptive field."""
    r = spec.receptive_radius
    bounds = [(r, n - 1 - r) for n in dims]
    if any(lo > hi for lo, hi in bounds):
        raise ValidationError(
            f"volume {tuple(dims)} is smaller than the receptive field (radius {r})")
    return bounds
