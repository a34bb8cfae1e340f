"""
Lattice geometry shared by labeling, averaging, suppression and matching.

All "within radius" tests go through the same rule: sqrt of the exact integer
squared distance, compared inclusively against the radius. Vectorized helpers
below reproduce euclidean_distance bit for bit.
"""

import math
from typing import NamedTuple

import numpy as np


class Coordinate(NamedTuple):
    x: int
    y: int
    z: int


def euclidean_distance(a, b) -> float:
    """Distance in voxels between two lattice positions."""
    dx = int(a[0]) - int(b[0])
    dy = int(a[1]) - int(b[1])
    dz = int(a[2]) - int(b[2])
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def pairwise_distances(a, b) -> np.ndarray:
    """(len(a), len(b)) matrix of euclidean_distance values."""
    a = np.asarray(a, dtype=np.int64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.int64).reshape(-1, 3)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2).astype(np.float64))


def offset_grid(reach: int):
    """Integer offsets -reach..reach along each axis, indexed [dx, dy, dz]."""
    span = np.arange(-reach, reach + 1, dtype=np.int64)
    return np.meshgrid(span, span, span, indexing="ij")


def ball_mask(radius: float, metric: str = "euclidean") -> np.ndarray:
    """Boolean cube of side 2*floor(radius)+1 marking offsets within radius."""
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    reach = int(math.floor(radius))
    dx, dy, dz = offset_grid(reach)
    if metric == "euclidean":
        dist = np.sqrt((dx * dx + dy * dy + dz * dz).astype(np.float64))
    elif metric == "chebyshev":
        dist = np.maximum(np.maximum(np.abs(dx), np.abs(dy)), np.abs(dz)).astype(np.float64)
    else:
        raise ValueError(f"unknown metric: {metric}")
    return dist <= radius


def clip_window(center, reach: int, dims):
    """Slices of the volume and of a (2*reach+1)^3 stencil that overlap."""
    vol_slices = []
    stencil_slices = []
    for c, n in zip(center, dims):
        lo = int(c) - reach
        hi = int(c) + reach + 1
        vlo, vhi = max(lo, 0), min(hi, n)
        vol_slices.append(slice(vlo, vhi))
        stencil_slices.append(slice(vlo - lo, vhi - lo))
    return tuple(vol_slices), tuple(stencil_slices)
