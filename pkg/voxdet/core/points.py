"""
Point annotations: ground-truth object centers and scored detections.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from voxdet.core import formats
from voxdet.core.errors import FormatError, ValidationError
from voxdet.core.geometry import Coordinate


class Point(NamedTuple):
    coord: Coordinate
    confidence: Optional[float] = None


@dataclass(frozen=True, eq=False)
class PointSet:
    """
    Ordered object centers.

    coords is an (n, 3) int64 array of x, y, z. confidences is None for
    ground truth and an (n,) float64 array for detections.
    """

    coords: np.ndarray
    confidences: Optional[np.ndarray] = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.int64, copy=True).reshape(-1, 3)
        if np.any(coords < 0):
            raise ValidationError("point coordinates must be non-negative")
        coords.flags.writeable = False
        object.__setattr__(self, "coords", coords)

        if self.confidences is not None:
            conf = np.array(self.confidences, dtype=np.float64, copy=True).reshape(-1)
            if conf.shape[0] != coords.shape[0]:
                raise ValidationError(f"{coords.shape[0]} points but {conf.shape[0]} confidences")
            if not np.all((conf >= 0.0) & (conf <= 1.0)):
                raise ValidationError("confidences must lie in [0, 1]")
            conf.flags.writeable = False
            object.__setattr__(self, "confidences", conf)

    @classmethod
    def empty(cls, scored=False):
        return cls(np.zeros((0, 3), dtype=np.int64), np.zeros(0) if scored else None)

    @classmethod
    def from_points(cls, points):
        """Build from an iterable of Point / (coord, confidence) pairs."""
        points = [Point(Coordinate(*p[0]), p[1]) for p in points]
        if not points:
            return cls.empty()
        scored = [p.confidence is not None for p in points]
        if any(scored) and not all(scored):
            raise ValidationError("either every point carries a confidence or none does")
        coords = [tuple(p.coord) for p in points]
        conf = [p.confidence for p in points] if all(scored) else None
        return cls(coords, conf)

    @property
    def scored(self):
        return self.confidences is not None

    def is_sorted(self):
        """True when confidences are non-increasing (vacuously for ground truth)."""
        if self.confidences is None or len(self) < 2:
            return True
        return bool(np.all(np.diff(self.confidences) <= 0))

    def head(self, n):
        conf = None if self.confidences is None else self.confidences[:n]
        return PointSet(self.coords[:n], conf)

    def with_confidence(self, value=1.0):
        """Scored copy; existing confidences are kept."""
        if self.scored:
            return self
        return PointSet(self.coords, np.full(len(self), float(value)))

    def __len__(self):
        return int(self.coords.shape[0])

    def __iter__(self):
        for i, c in enumerate(self.coords):
            conf = None if self.confidences is None else float(self.confidences[i])
            yield Point(Coordinate(int(c[0]), int(c[1]), int(c[2])), conf)

    def __getitem__(self, i):
        c = self.coords[i]
        conf = None if self.confidences is None else float(self.confidences[i])
        return Point(Coordinate(int(c[0]), int(c[1]), int(c[2])), conf)

    def __eq__(self, other):
        if not isinstance(other, PointSet):
            return NotImplemented
        if not np.array_equal(self.coords, other.coords):
            return False
        if self.confidences is None or other.confidences is None:
            return self.confidences is None and other.confidences is None
        return np.array_equal(self.confidences, other.confidences)

    __hash__ = None


def check_inside(points, dims):
    """Raise unless every point lies inside a volume of the given dims."""
    outside = np.any(points.coords >= np.asarray(dims, dtype=np.int64)[None, :], axis=1)
    if np.any(outside):
        bad = points.coords[int(np.argmax(outside))]
        raise ValidationError(f"point {tuple(int(v) for v in bad)} lies outside volume {tuple(dims)}")


# ============================================================
# vpts serialization
# ============================================================


def _point_to_json(point):
    item = {"x": point.coord.x, "y": point.coord.y, "z": point.coord.z}
    if point.confidence is not None:
        item["confidence"] = point.confidence
    return item


def save_points(points, path):
    formats.write_document(path, formats.FORMAT_POINTS, {
        "points": [_point_to_json(p) for p in points],
    })


def load_points(path):
    doc = formats.read_document(path, formats.FORMAT_POINTS)
    items = doc.get("points")
    if not isinstance(items, list):
        raise FormatError("'points' must be a list", path)

    parsed = []
    for k, item in enumerate(items):
        if not isinstance(item, dict):
            raise FormatError(f"point #{k} is not an object", path)
        try:
            coord = tuple(item[axis] for axis in ("x", "y", "z"))
        except KeyError as e:
            raise FormatError(f"point #{k} is missing {e.args[0]!r}", path) from e
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in coord):
            raise FormatError(f"point #{k} has non-integer coordinates", path)
        if min(coord) < 0:
            raise ValidationError(f"point #{k} has negative coordinates {coord} ({path})")
        conf = item.get("confidence")
        if conf is not None:
            if not isinstance(conf, (int, float)) or isinstance(conf, bool) or not math.isfinite(conf):
                raise FormatError(f"point #{k} has a non-numeric confidence", path)
            if not 0.0 <= conf <= 1.0:
                raise ValidationError(f"point #{k} confidence {conf} outside [0, 1] ({path})")
            conf = float(conf)
        parsed.append(Point(Coordinate(*coord), conf))

    return PointSet.from_points(parsed)
