"""
Typed per-stage configurations. Defaults come from settings; each config
checks its own invariants and round-trips through plain dicts so the CLI can
echo it (--dump-config) or read it back (--config).
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from voxdet.config import settings
from voxdet.core.errors import ValidationError

logger = logging.getLogger(__name__)


class _DictMixin:
    _tuple_fields = ()

    def to_dict(self):
        out = asdict(self)
        for name in self._tuple_fields:
            out[name] = list(out[name])
        return out

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
        kwargs = dict(data)
        for name in cls._tuple_fields:
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


@dataclass(frozen=True)
class LabelingConfig(_DictMixin):
    r_l: float = settings.R_L
    border_margin: int = 0
    negative_ratio: float = settings.NEGATIVE_RATIO
    seed: int = settings.LABEL_SEED
    ignore_radius: Optional[float] = None

    def __post_init__(self):
        if not self.r_l > 0:
            raise ValidationError(f"r_l must be positive, got {self.r_l}")
        if self.border_margin < 0:
            raise ValidationError(f"border_margin must be non-negative, got {self.border_margin}")
        if not self.negative_ratio > 0:
            raise ValidationError(f"negative_ratio must be positive, got {self.negative_ratio}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.ignore_radius is not None and self.ignore_radius < 0:
            raise ValidationError(f"ignore_radius must be non-negative, got {self.ignore_radius}")


@dataclass(frozen=True)
class PatchSpec(_DictMixin):
    scales: tuple = settings.PATCH_SCALES
    patch_radius: int = settings.PATCH_RADIUS

    _tuple_fields = ("scales",)

    def __post_init__(self):
        scales = tuple(int(s) for s in self.scales)
        object.__setattr__(self, "scales", scales)
        if not scales or scales[0] != 1:
            raise ValidationError(f"scales must start at 1, got {scales}")
        if any(b <= a for a, b in zip(scales, scales[1:])):
            raise ValidationError(f"scales must be strictly increasing, got {scales}")
        if self.patch_radius < 1:
            raise ValidationError(f"patch_radius must be positive, got {self.patch_radius}")

    @property
    def receptive_radius(self):
        return max(self.scales) * self.patch_radius

    @property
    def cube_size(self):
        return (2 * self.patch_radius + 1) ** 3

    @property
    def feature_dim(self):
        return len(self.scales) * self.cube_size


@dataclass(frozen=True)
class TrainConfig(_DictMixin):
    hidden_sizes: tuple = settings.HIDDEN_SIZES
    learning_rate: float = settings.LEARNING_RATE
    epochs: int = settings.EPOCHS
    minibatch_size: int = settings.MINIBATCH_SIZE
    seed: int = settings.TRAIN_SEED
    l2_penalty: float = settings.L2_PENALTY

    _tuple_fields = ("hidden_sizes",)

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if any(h < 1 for h in self.hidden_sizes):
            raise ValidationError(f"hidden sizes must be positive, got {self.hidden_sizes}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1 or self.minibatch_size < 1:
            raise ValidationError("epochs and minibatch_size must be positive")
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")
        if self.l2_penalty < 0:
            raise ValidationError(f"l2_penalty must be >= 0, got {self.l2_penalty}")


@dataclass(frozen=True)
class PostprocConfig(_DictMixin):
    r_a: float = settings.R_A
    r_n: float = settings.R_N
    confidence_floor: float = settings.CONFIDENCE_FLOOR
    max_detections: Optional[int] = None
    window: str = "ball"
    metric: str = "euclidean"

    def __post_init__(self):
        if not self.r_a > 0 or not self.r_n > 0:
            raise ValidationError(f"r_a and r_n must be positive, got {self.r_a}, {self.r_n}")
        if not 0.0 <= self.confidence_floor < 1.0:
            raise ValidationError(f"confidence_floor must lie in [0, 1), got {self.confidence_floor}")
        if self.max_detections is not None and self.max_detections < 1:
            raise ValidationError(f"max_detections must be positive, got {self.max_detections}")
        if self.window not in settings.AVERAGING_WINDOWS:
            raise ValidationError(f"window must be one of {settings.AVERAGING_WINDOWS}, got {self.window!r}")
        if self.metric not in settings.NMS_METRICS:
            raise ValidationError(f"metric must be one of {settings.NMS_METRICS}, got {self.metric!r}")
        if self.r_n < self.r_a:
            logger.warning(f"[Detect] r_n={self.r_n} is smaller than r_a={self.r_a}")


@dataclass(frozen=True)
class SynthConfig(_DictMixin):
    dims: tuple = settings.SYNTH_DIMS
    n_objects: int = settings.SYNTH_N_OBJECTS
    object_radius_voxels: float = settings.SYNTH_OBJECT_RADIUS
    object_intensity: float = settings.SYNTH_OBJECT_INTENSITY
    background_noise_std: float = settings.SYNTH_NOISE_STD
    min_separation: float = settings.SYNTH_MIN_SEPARATION
    border_clearance: Optional[int] = None
    seed: int = 0

    _tuple_fields = ("dims",)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(n) for n in self.dims))
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValidationError(f"dims must be three positive integers, got {self.dims}")
        if self.n_objects < 0:
            raise ValidationError(f"n_objects must be >= 0, got {self.n_objects}")
        if not self.object_radius_voxels > 0:
            raise ValidationError("object_radius_voxels must be positive")
        if self.background_noise_std < 0:
            raise ValidationError("background_noise_std must be >= 0")
        if not self.min_separation > 2 * self.object_radius_voxels:
            raise ValidationError(
                f"min_separation {self.min_separation} must exceed 2 * object_radius "
                f"({2 * self.object_radius_voxels})")
        if self.border_clearance is None:
            clearance = PatchSpec().receptive_radius + int(round(self.object_radius_voxels))
            object.__setattr__(self, "border_clearance", clearance)
        if self.border_clearance < 0:
            raise ValidationError("border_clearance must be >= 0")
        if self.seed < 0:
            raise ValidationError(f"seed must be non-negative, got {self.seed}")


@dataclass(frozen=True)
class PipelineConfig:
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    patch: PatchSpec = field(default_factory=PatchSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    postproc: PostprocConfig = field(default_factory=PostprocConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    r_match: float = settings.R_MATCH
    seed: int = settings.PIPELINE_SEED
    n_train_volumes: int = settings.N_TRAIN_VOLUMES
    n_test_volumes: int = settings.N_TEST_VOLUMES

    _sections = {
        "labeling": LabelingConfig,
        "patch": PatchSpec,
        "train": TrainConfig,
        "postproc": PostprocConfig,
        "synth": SynthConfig,
    }

    def __post_init__(self):
        if not self.r_match >= 0:
            raise ValidationError(f"r_match must be >= 0, got {self.r_match}")
        if self.n_train_volumes < 1 or self.n_test_volumes < 1:
            raise ValidationError("pipeline needs at least one training and one test volume")

    def to_dict(self):
        out = {name: getattr(self, name).to_dict() for name in self._sections}
        out.update({
            "r_match": self.r_match,
            "seed": self.seed,
            "n_train_volumes": self.n_train_volumes,
            "n_test_volumes": self.n_test_volumes,
        })
        return out

    @classmethod
    def from_dict(cls, data):
        kwargs = {}
        for name, value in data.items():
            if name in cls._sections:
                kwargs[name] = cls._sections[name].from_dict(value)
            elif name in ("r_match", "seed", "n_train_volumes", "n_test_volumes"):
                kwargs[name] = value
            else:
                raise ValidationError(f"unknown pipeline config key: {name!r}")
        return cls(**kwargs)
