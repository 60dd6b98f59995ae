"""Multinomial logistic regression trained by momentum SGD.

The objective is mean softmax cross-entropy plus ``weight_decay / 2 *
||W||^2`` (the bias is not decayed).  Updates follow the classic
heavy-ball form ``v <- momentum * v - lr * grad; W <- W + v``.  Inputs are
standardized per feature with training-set statistics before the linear
map.
"""
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataio import MODEL_MAGIC, _atomic_write, pack_container, unpack_container
from .errors import DataError, DivergenceError, FormatError, ParameterError

# training-set size -> mini-batch size; the largest row not above n applies
BATCH_SCHEDULE = ((300, 5), (500, 5), (1000, 10), (2000, 20), (5000, 50),
                  (10000, 100), (25000, 100), (50000, 100))
DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 5


def default_batch_size(n):
    size = BATCH_SCHEDULE[0][1]
    for rows, b in BATCH_SCHEDULE:
        if n >= rows:
            size = b
    return max(1, min(size, n))


@dataclass(frozen=True)
class ProbeHyperparams:
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 0.0005
    epochs: int = 300
    batch_size: int = None  # None: pick from BATCH_SCHEDULE
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ParameterError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ParameterError("momentum must lie in [0, 1)")
        if not self.weight_decay >= 0:
            raise ParameterError("weight_decay must be >= 0")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ParameterError("epochs must be a positive integer")
        if self.batch_size is not None and self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")

    def resolved_batch_size(self, n):
        b = default_batch_size(n) if self.batch_size is None else self.batch_size
        if b > n:
            raise ParameterError(f"batch size {b} exceeds the {n} training samples")
        return b


@dataclass
class ProbeModel:
    weights: np.ndarray   # (classes, dim)
    bias: np.ndarray      # (classes,)
    mean: np.ndarray      # (dim,)
    scale: np.ndarray     # (dim,)  standard deviation, 1 where constant
    hyper: ProbeHyperparams = field(default_factory=ProbeHyperparams)
    loss_curve: list = field(default_factory=list)

    @property
    def classes(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]

    def scores(self, features):
        x = _flatten(features)
        if x.shape[1] != self.dim:
            raise ParameterError(f"feature dimension {x.shape[1]} does not match model ({self.dim})")
        return standardize(x, self.mean, self.scale) @ self.weights.T + self.bias

    def predict(self, features):
        # np.argmax returns the first maximum: ties go to the lowest class
        return np.argmax(self.scores(features), axis=1)


def _flatten(features):
    x = np.asarray(features, dtype=np.float64)
    x = x.reshape(x.shape[0], -1) if x.ndim != 2 else x
    if not np.all(np.isfinite(x)):
        raise DataError("features contain NaN or Inf")
    return x


def standardization(x):
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[~(scale > 0)] = 1.0
    return mean, scale


def standardize(x, mean, scale):
    return (x - mean) / scale


def loss_and_grad(weights, bias, x, labels, weight_decay):
    """Mean cross-entropy + L2 penalty, with gradients for W and b."""
    logits = x @ weights.T + bias
    logits -= logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(logits).sum(axis=1))
    n = x.shape[0]
    rows = np.arange(n)
    loss = np.mean(logz - logits[rows, labels]) + 0.5 * weight_decay * np.sum(weights * weights)
    p = np.exp(logits - logz[:, None])
    p[rows, labels] -= 1.0
    p /= n
    return loss, p.T @ x + weight_decay * weights, p.sum(axis=0)


def _check_labels(labels, n, classes=None):
    y = np.asarray(labels)
    if y.shape != (n,) or not np.issubdtype(y.dtype, np.integer):
        raise DataError(f"need {n} integer labels")
    if y.size and y.min() < 0:
        raise DataError("labels must be non-negative")
    if np.unique(y).size < 2:
        raise DataError("training needs at least two classes")
    return y, int(y.max()) + 1 if classes is None else classes


def train_probe(features, labels, hyper=None, classes=None):
    """Fit a probe; returns the model (its ``loss_curve`` holds the mean
    training loss per epoch, preceded by the loss at initialisation)."""
    hyper = hyper or ProbeHyperparams()
    x = _flatten(features)
    y, classes = _check_labels(labels, x.shape[0], classes)
    if y.max() >= classes:
        raise DataError(f"label {y.max()} outside {classes} classes")
    mean, scale = standardization(x)
    xs = standardize(x, mean, scale)
    n, dim = xs.shape
    batch = hyper.resolved_batch_size(n)
    w = np.zeros((classes, dim))
    b = np.zeros(classes)
    vw = np.zeros_like(w)
    vb = np.zeros_like(b)
    rng = np.random.default_rng(hyper.seed)
    initial = loss_and_grad(w, b, xs, y, hyper.weight_decay)[0]
    curve = [float(initial)]
    strikes = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            loss, gw, gb = loss_and_grad(w, b, xs[idx], y[idx], hyper.weight_decay)
            vw *= hyper.momentum
            vw -= hyper.learning_rate * gw
            vb *= hyper.momentum
            vb -= hyper.learning_rate * gb
            w += vw
            b += vb
            total += loss * idx.size
        epoch_loss = total / n
        curve.append(float(epoch_loss))
        if not np.isfinite(epoch_loss):
            raise DivergenceError("training loss became non-finite", curve)
        strikes = strikes + 1 if epoch_loss > DIVERGENCE_FACTOR * initial else 0
        if strikes >= DIVERGENCE_PATIENCE:
            raise DivergenceError(
                f"loss above {DIVERGENCE_FACTOR:g}x its initial value {initial:.4g} "
                f"for {DIVERGENCE_PATIENCE} epochs (last {epoch_loss:.4g})", curve)
    return ProbeModel(w, b, mean, scale, hyper, curve)


@dataclass(frozen=True)
class Evaluation:
    error: float
    confusion: np.ndarray  # rows: true class, columns: predicted class

    @property
    def accuracy(self):
        return 1.0 - self.error


def evaluate_probe(model, features, labels):
    pred = model.predict(features)
    y = np.asarray(labels)
    if y.shape != pred.shape:
        raise ParameterError(f"{y.size} labels for {pred.size} samples")
    classes = max(model.classes, int(y.max()) + 1 if y.size else 0)
    confusion = np.zeros((classes, classes), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    error = float(np.mean(pred != y)) if y.size else 0.0
    return Evaluation(error, confusion)


def save_model(model, path, extra=None):
    """Model container: magic ``SCATLP01`` framing identical to feature
    files; payload ``(1, 1, classes + 2, dim + 1)`` float64 holding rows
    ``[W | b]``, then ``[mean | 0]`` and ``[scale | 1]``."""
    c, d = model.weights.shape
    block = np.zeros((c + 2, d + 1))
    block[:c, :d] = model.weights
    block[:c, d] = model.bias
    block[c, :d] = model.mean
    block[c + 1, :d] = model.scale
    block[c + 1, d] = 1.0
    manifest = {"hyperparams": asdict(model.hyper), "loss_curve": model.loss_curve,
                "extra": extra or {}}
    _atomic_write(path, pack_container(MODEL_MAGIC, block[None, None], 8, manifest))


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    data, _, manifest = unpack_container(MODEL_MAGIC, blob, str(path))
    if data.shape[:2] != (1, 1) or data.shape[2] < 4:
        raise FormatError(f"{path}: unexpected model payload shape {data.shape}")
    block = np.array(data[0, 0])
    c = block.shape[0] - 2
    try:
        hyper = ProbeHyperparams(**manifest["hyperparams"])
    except (KeyError, TypeError, ParameterError) as exc:
        raise FormatError(f"{path}: bad hyperparameter record ({exc})") from None
    return ProbeModel(block[:c, :-1], block[:c, -1], block[c, :-1], block[c + 1, :-1],
                      hyper, list(manifest.get("loss_curve", [])))

