"""
Classifier service - feature collection, MLP training, voxel-wise inference
and the ground-truth oracle, behind the VoxelClassifier interface.
"""

import logging

import numpy as np

from voxdet.config.settings import INFER_SLAB_DEPTH
from voxdet.core.errors import ValidationError
from voxdet.models.base import VoxelClassifier
from voxdet.models.features import FeaturePyramid, interior_bounds
from voxdet.models.mlp import MlpModel, fit_mlp, predict_batch
from voxdet.services.labeling_service import make_label_volume
from voxdet.utils.parallel import ordered_map

logger = logging.getLogger(__name__)


def sample_features(samples, volume, spec):
    """(features, labels) for a list of LabeledSample drawn from one volume."""
    if not samples:
        raise ValidationError("no training samples")
    positions = np.asarray([s.position for s in samples], dtype=np.int64)
    (xlo, xhi), (ylo, yhi), (zlo, zhi) = interior_bounds(volume.dims, spec)
    lo = np.array([xlo, ylo, zlo])
    hi = np.array([xhi, yhi, zhi])
    bad = np.any((positions < lo) | (positions > hi), axis=1)
    if np.any(bad):
        p = tuple(int(v) for v in positions[int(np.argmax(bad))])
        raise ValidationError(f"sample at {p} is closer than {spec.receptive_radius} voxels to the border")
    features = FeaturePyramid(volume, spec).batch(positions)
    labels = np.asarray([s.label for s in samples], dtype=np.float64)
    return features, labels


def stack_training_data(volume_samples, spec):
    """Concatenate sample_features over (volume, samples) pairs, in order."""
    parts = [sample_features(samples, volume, spec) for volume, samples in volume_samples]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def train_mlp(samples, volume, spec, config):
    features, labels = sample_features(samples, volume, spec)
    model, _ = fit_mlp(features, labels, config)
    return model


def predict_voxelwise(volume, model, spec, threads=None):
    """
    mlp_forward at every interior voxel; voxels within receptive_radius of a
    face are 0.0.
    """
    if model.input_dim != spec.feature_dim:
        raise ValidationError(f"model expects {model.input_dim} features, patch spec gives {spec.feature_dim}")
    (xlo, xhi), (ylo, yhi), (zlo, zhi) = interior_bounds(volume.dims, spec)
    pyramid = FeaturePyramid(volume, spec)
    xs = np.arange(xlo, xhi + 1)
    ys = np.arange(ylo, yhi + 1)

    def run_slab(z0):
        zs = np.arange(z0, min(z0 + INFER_SLAB_DEPTH, zhi + 1))
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        positions = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
        probs = predict_batch(model, pyramid.batch(positions))
        return zs, probs.reshape(gx.shape)

    out = np.zeros(volume.dims, dtype=np.float32)
    for zs, block in ordered_map(run_slab, range(zlo, zhi + 1, INFER_SLAB_DEPTH), threads):
        out[xlo:xhi + 1, ylo:yhi + 1, zs[0]:zs[-1] + 1] = block
    return volume.like(out)


def oracle_predict(ground_truth, dims, r_l):
    """Ground-truth balls as a prediction map (test double for a learned classifier)."""
    return make_label_volume(ground_truth, dims, r_l)


class MlpClassifier(VoxelClassifier):
    name = "mlp"

    def __init__(self, model, spec, threads=None):
        self.model = model
        self.spec = spec
        self.threads = threads

    @classmethod
    def untrained(cls, spec, hidden_sizes, threads=None):
        sizes = (spec.feature_dim,) + tuple(hidden_sizes) + (1,)
        return cls(MlpModel.zeros(sizes), spec, threads)

    def predict_volume(self, volume):
        return predict_voxelwise(volume, self.model, self.spec, self.threads)


class OracleClassifier(VoxelClassifier):
    name = "oracle"

    def __init__(self, ground_truth, r_l):
        self.ground_truth = ground_truth
        self.r_l = r_l

    def predict_volume(self, volume):
        return oracle_predict(self.ground_truth, volume.dims, self.r_l)


CLASSIFIERS = {
    "mlp": MlpClassifier,
    "oracle": OracleClassifier,
}
