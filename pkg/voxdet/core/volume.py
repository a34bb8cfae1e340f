"""
Dense 3D scalar volumes.

A Volume3 wraps a float32 array indexed [x, y, z]. On disk (and for any
"linear index") voxels are ordered x-fastest, then y, then z.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from voxdet.config.settings import VOXEL_SIZE_NM
from voxdet.core import formats
from voxdet.core.errors import FormatError, InputFileError, SizeMismatchError, ValidationError


@dataclass(frozen=True, eq=False)
class Volume3:
    data: np.ndarray
    voxel_size_nm: float = VOXEL_SIZE_NM

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float32, copy=True)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValidationError(f"volume must be 3D with positive dims, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("volume contains non-finite values")
        try:
            size = float(self.voxel_size_nm)
        except (TypeError, ValueError):
            size = math.nan
        if not (math.isfinite(size) and size > 0):
            raise ValidationError(f"voxel_size_nm must be a positive number, got {self.voxel_size_nm!r}")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "voxel_size_nm", size)

    @property
    def dims(self):
        return tuple(int(n) for n in self.data.shape)

    @property
    def size(self):
        return int(self.data.size)

    def flat(self):
        """Values in x-fastest linear order."""
        return self.data.ravel(order="F")

    def like(self, data):
        """A new volume with the same voxel size."""
        return Volume3(data, self.voxel_size_nm)

    @classmethod
    def zeros(cls, dims, voxel_size_nm=VOXEL_SIZE_NM):
        return cls(np.zeros(tuple(dims), dtype=np.float32), voxel_size_nm)

    @classmethod
    def from_flat(cls, values, dims, voxel_size_nm=VOXEL_SIZE_NM):
        values = np.asarray(values, dtype=np.float32)
        return cls(values.reshape(tuple(dims), order="F"), voxel_size_nm)

    def __eq__(self, other):
        if not isinstance(other, Volume3):
            return NotImplemented
        return (self.dims == other.dims
                and self.voxel_size_nm == other.voxel_size_nm
                and np.array_equal(self.data, other.data))

    __hash__ = None


def check_dims(dims):
    dims = tuple(int(n) for n in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValidationError(f"dims must be three positive integers, got {dims}")
    return dims


# ============================================================
# vvol serialization
# ============================================================


def save_volume(volume, path):
    """Write `<name>.json` header plus `<name>.raw` little-endian float32 payload."""
    head = formats.header_path(path)
    raw = head[: -len(".json")] + ".raw"
    os.makedirs(os.path.dirname(os.path.abspath(head)), exist_ok=True)
    volume.flat().astype("<f4").tofile(raw)
    formats.write_document(head, formats.FORMAT_VOLUME, {
        "dims": list(volume.dims),
        "dtype": formats.VOLUME_DTYPE,
        "order": formats.VOLUME_ORDER,
        "voxel_size_nm": volume.voxel_size_nm,
        "data": os.path.basename(raw),
    })


def load_volume(path):
    head = formats.header_path(path)
    doc = formats.read_document(head, formats.FORMAT_VOLUME)

    dims = doc.get("dims")
    if (not isinstance(dims, list) or len(dims) != 3
            or not all(isinstance(n, int) and n > 0 for n in dims)):
        raise FormatError(f"bad dims {dims!r}", head)
    voxel_size = doc.get("voxel_size_nm", VOXEL_SIZE_NM)
    if (isinstance(voxel_size, bool) or not isinstance(voxel_size, (int, float))
            or not math.isfinite(voxel_size) or voxel_size <= 0):
        raise FormatError(f"bad voxel_size_nm {voxel_size!r}", head)
    if doc.get("dtype") != formats.VOLUME_DTYPE or doc.get("order") != formats.VOLUME_ORDER:
        raise FormatError(f"unsupported dtype/order {doc.get('dtype')!r}/{doc.get('order')!r}", head)
    data_name = doc.get("data")
    if not isinstance(data_name, str) or not data_name:
        raise FormatError("missing raw data file name", head)

    raw = os.path.join(os.path.dirname(os.path.abspath(head)), data_name)
    if not os.path.exists(raw):
        raise InputFileError(raw)
    expected = dims[0] * dims[1] * dims[2] * 4
    actual = os.path.getsize(raw)
    if actual != expected:
        raise SizeMismatchError(f"raw payload is {actual} bytes, header implies {expected}", raw)

    values = np.fromfile(raw, dtype="<f4")
    try:
        return Volume3.from_flat(values.astype(np.float32), dims, voxel_size)
    except ValidationError as e:
        raise FormatError(str(e), raw) from e


# ============================================================
# Scale pyramid
# ============================================================


def downsample_avg(volume, factor):
    """Mean over factor^3 blocks; border blocks are clipped, not padded."""
    factor = int(factor)
    if factor < 1:
        raise ValidationError(f"downsample factor must be >= 1, got {factor}")
    if factor == 1:
        return volume

    sums = volume.data.astype(np.float64)
    counts = []
    for axis, n in enumerate(volume.dims):
        starts = np.arange(0, n, factor)
        sums = np.add.reduceat(sums, starts, axis=axis)
        counts.append(np.minimum(starts + factor, n) - starts)
    cnt = counts[0][:, None, None] * counts[1][None, :, None] * counts[2][None, None, :]
    return volume.like(sums / cnt)
