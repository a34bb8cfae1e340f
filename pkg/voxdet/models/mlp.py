"""
Multilayer perceptron voxel classifier: standardize -> (affine + ReLU)* ->
affine + logistic. Trained with mean binary cross-entropy plus an L2 penalty
on weights by seeded minibatch SGD.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from voxdet.config.settings import STD_FLOOR
from voxdet.config.stages import PatchSpec
from voxdet.core import formats
from voxdet.core.errors import FormatError, TrainingDivergedError, ValidationError

logger = logging.getLogger(__name__)

# expit returns exactly 1.0 above a logit of ~37 and 0.0 below ~-745
PROB_MIN = np.finfo(np.float64).tiny
PROB_MAX = np.nextafter(1.0, 0.0)


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Weights are (n_in, n_out) matrices; biases are (n_out,) vectors."""

    layer_sizes: tuple
    weights: tuple
    biases: tuple
    feature_mean: np.ndarray
    feature_std: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1 or sizes[-1] != 1:
            raise ValidationError(f"layer sizes must be positive and end in 1, got {sizes}")
        weights = tuple(np.array(w, dtype=np.float64) for w in self.weights)
        biases = tuple(np.array(b, dtype=np.float64).reshape(-1) for b in self.biases)
        if len(weights) != len(sizes) - 1 or len(biases) != len(weights):
            raise ValidationError(f"{len(sizes)} layer sizes need {len(sizes) - 1} weight/bias pairs")
        for k, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[k], sizes[k + 1]) or b.shape != (sizes[k + 1],):
                raise ValidationError(
                    f"layer {k}: weight {w.shape} / bias {b.shape} inconsistent with sizes {sizes}")
        mean = np.array(self.feature_mean, dtype=np.float64).reshape(-1)
        std = np.array(self.feature_std, dtype=np.float64).reshape(-1)
        if mean.shape != (sizes[0],) or std.shape != (sizes[0],):
            raise ValidationError("feature_mean/feature_std must match the input layer size")
        if not np.all(std > 0):
            raise ValidationError("feature_std must be strictly positive")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        object.__setattr__(self, "feature_mean", mean)
        object.__setattr__(self, "feature_std", std)

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @classmethod
    def zeros(cls, layer_sizes):
        """All-zero weights; predicts 0.5 everywhere."""
        sizes = tuple(int(n) for n in layer_sizes)
        return cls(
            sizes,
            tuple(np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])),
            tuple(np.zeros(b) for b in sizes[1:]),
            np.zeros(sizes[0]),
            np.ones(sizes[0]),
        )

    def with_params(self, weights, biases):
        return MlpModel(self.layer_sizes, weights, biases, self.feature_mean, self.feature_std)


def _check_width(model, features):
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != model.input_dim:
        raise ValidationError(f"feature length {features.shape[-1]} != model input size {model.input_dim}")
    return features


def standardize(model, features):
    return (features - model.feature_mean) / model.feature_std


def _logits(weights, biases, xs):
    h = xs
    for w, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    return (h @ weights[-1] + biases[-1])[:, 0]


def predict_batch(model, features):
    """Probabilities for an (n, d) feature matrix, strictly inside (0, 1)."""
    features = _check_width(model, features).reshape(-1, model.input_dim)
    p = expit(_logits(model.weights, model.biases, standardize(model, features)))
    return np.clip(p, PROB_MIN, PROB_MAX)


def mlp_forward(model, features):
    """Probability for a single feature vector."""
    features = _check_width(model, features)
    if features.ndim != 1:
        raise ValidationError(f"expected one feature vector, got shape {features.shape}")
    return float(predict_batch(model, features[None, :])[0])


def _bce(z, y):
    # log(1 + e^z) - y z == -[y log s(z) + (1-y) log(1 - s(z))]
    return np.logaddexp(0.0, z) - y * z


def _loss_grad(weights, biases, xs, y, l2):
    """Loss and (dW, db) on standardized inputs."""
    acts = [xs]
    pres = []
    h = xs
    for w, b in zip(weights[:-1], biases[:-1]):
        pre = h @ w + b
        pres.append(pre)
        h = np.maximum(pre, 0.0)
        acts.append(h)
    z = (h @ weights[-1] + biases[-1])[:, 0]

    n = xs.shape[0]
    loss = float(np.mean(_bce(z, y)) + l2 * sum(float(np.sum(w * w)) for w in weights))

    dws = [None] * len(weights)
    dbs = [None] * len(weights)
    delta = ((expit(z) - y) / n)[:, None]
    for k in range(len(weights) - 1, -1, -1):
        dws[k] = acts[k].T @ delta + 2.0 * l2 * weights[k]
        dbs[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ weights[k].T) * (pres[k - 1] > 0)
    return loss, dws, dbs


def loss_and_gradients(model, features, labels, l2_penalty=0.0):
    """Mean cross-entropy + l2 * sum ||W||^2, and its gradients w.r.t. every W and b."""
    xs = standardize(model, _check_width(model, features).reshape(-1, model.input_dim))
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    return _loss_grad(model.weights, model.biases, xs, y, l2_penalty)


def cross_entropy(model, features, labels):
    """Mean binary cross-entropy (no penalty term)."""
    xs = standardize(model, _check_width(model, features).reshape(-1, model.input_dim))
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    return float(np.mean(_bce(_logits(model.weights, model.biases, xs), y)))


def feature_statistics(features):
    mean = features.mean(axis=0)
    std = np.maximum(features.std(axis=0), STD_FLOOR)
    return mean, std


def _init_params(sizes, rng):
    weights = []
    for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        gain = 2.0 if k < len(sizes) - 2 else 1.0
        weights.append(rng.standard_normal((a, b)) * np.sqrt(gain / a))
    biases = [np.zeros(b) for b in sizes[1:]]
    return weights, biases


def fit_mlp(features, labels, config):
    """
    Train on a precomputed feature matrix.
    Returns (model, losses) where losses[e] is the full-set cross-entropy
    after epoch e.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[0] != y.shape[0]:
        raise ValidationError(f"need a non-empty (n, d) feature matrix with n labels, got {x.shape} / {y.shape}")
    classes = set(np.unique(y).tolist())
    if not classes <= {0.0, 1.0}:
        raise ValidationError(f"labels must be 0/1, got {sorted(classes)}")
    if len(classes) < 2:
        raise ValidationError("training data contains a single class")

    mean, std = feature_statistics(x)
    xs = (x - mean) / std
    sizes = (x.shape[1],) + tuple(config.hidden_sizes) + (1,)
    rng = np.random.default_rng(config.seed)
    weights, biases = _init_params(sizes, rng)

    n = x.shape[0]
    bs = config.minibatch_size
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for step, start in enumerate(range(0, n, bs)):
            idx = order[start:start + bs]
            loss, dws, dbs = _loss_grad(weights, biases, xs[idx], y[idx], config.l2_penalty)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1}, step {step + 1} "
                    f"(learning_rate={config.learning_rate}); lower the learning rate")
            for k in range(len(weights)):
                weights[k] = weights[k] - config.learning_rate * dws[k]
                biases[k] = biases[k] - config.learning_rate * dbs[k]

        epoch_loss = float(np.mean(_bce(_logits(weights, biases, xs), y)))
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(f"non-finite training loss after epoch {epoch + 1}")
        losses.append(epoch_loss)
        level = logging.INFO if (epoch + 1) % 10 == 0 or epoch + 1 == config.epochs else logging.DEBUG
        logger.log(level, f"[Train] epoch {epoch + 1}/{config.epochs} loss={epoch_loss:.4f}")

    return MlpModel(sizes, tuple(weights), tuple(biases), mean, std), losses


# ============================================================
# vmlp serialization
# ============================================================


def save_model(model, spec, path):
    formats.write_document(path, formats.FORMAT_MODEL, {
        "patch_spec": spec.to_dict(),
        "layer_sizes": list(model.layer_sizes),
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in zip(model.weights, model.biases)],
    })


def load_model(path):
    """Returns (MlpModel, PatchSpec)."""
    doc = formats.read_document(path, formats.FORMAT_MODEL)
    try:
        spec = PatchSpec.from_dict(doc["patch_spec"])
        layers = doc["layers"]
        model = MlpModel(
            tuple(doc["layer_sizes"]),
            tuple(layer["w"] for layer in layers),
            tuple(layer["b"] for layer in layers),
            doc["feature_mean"],
            doc["feature_std"],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed model file: {e}", path) from e
    except ValidationError as e:
        raise FormatError(str(e), path) from e
    if model.input_dim != spec.feature_dim:
        raise FormatError(f"model input size {model.input_dim} != patch feature size {spec.feature_dim}", path)
    return model, spec
