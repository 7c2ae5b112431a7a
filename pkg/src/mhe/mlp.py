"""A small ReLU classifier trained with cross-entropy plus MHE regularizers.

Layer ``l`` maps ``a_l -> a_l @ W_l + b_l`` with ``W_l`` of shape
``(fan_in, fan_out)``; the neurons of a layer are the *columns* of ``W_l``.
The last layer produces logits and its columns are the classifier neurons.

The training objective is

    cross_entropy
    + lambda_w * weight decay (mean neuron norm over all layers)
    + lambda_h * sum over hidden layers of the pair-normalized energy
    + lambda_o * output-layer energy (full sum, or the batch-label form)
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .data import SyntheticDataset
from .energy import (
    EnergySpec,
    energy_and_gradient,
    output_minibatch_energy,
    output_minibatch_gradient,
    pairwise_angles,
    validate_spec,
)
from .errors import DimensionMismatch, InvalidConfig

ACTIVATIONS = ("relu", "identity")
OUTPUT_MODES = ("full_sum", "data_dependent_minibatch")
WEIGHT_DECAY_FORMS = ("norm", "squared")


@dataclass
class MlpModel:
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str = "relu"
    feature_activation: str = "relu"

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        if not self.weights or len(self.weights) != len(self.biases):
            raise InvalidConfig("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DimensionMismatch(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise DimensionMismatch(f"layer {i} expects {w.shape[0]} inputs, "
                                        f"previous layer gives {self.weights[i - 1].shape[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidConfig(f"layer {i} has non-finite parameters")
        for a in (self.activation, self.feature_activation):
            if a not in ACTIVATIONS:
                raise InvalidConfig(f"unknown activation {a!r}")

    @property
    def sizes(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def feature_dim(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                        self.activation, self.feature_activation)

    def to_dict(self) -> dict:
        return {
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "activation": self.activation,
            "feature_activation": self.feature_activation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        return cls(**d)


def init_mlp(sizes: Sequence[int], seed, feature_activation: str = "relu") -> MlpModel:
    """He-initialized weights (variance ``2 / fan_in``) and zero biases."""
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2 or min(sizes) < 1:
        raise InvalidConfig("sizes needs an input and an output width, all positive")
    rng = np.random.default_rng(seed)
    weights = [rng.standard_normal((a, b)) * np.sqrt(2.0 / a) for a, b in zip(sizes, sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return MlpModel(weights, biases, feature_activation=feature_activation)


def _act(name: str, z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) if name == "relu" else z


def _act_grad(name: str, z: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    return upstream * (z > 0) if name == "relu" else upstream


def _layer_activation(model: MlpModel, layer: int) -> str:
    last_hidden = len(model.weights) - 2
    return model.feature_activation if layer == last_hidden else model.activation


def forward(model: MlpModel, x):
    """Logits plus the cached ``(inputs, pre_activations)`` per layer.

    ``inputs[l]`` enters layer ``l``; ``inputs[-1]`` are the penultimate
    features.
    """
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != model.sizes[0]:
        raise DimensionMismatch(f"input has {a.shape[1]} features, model expects {model.sizes[0]}")
    inputs, pre = [], []
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        inputs.append(a)
        z = a @ w + b
        pre.append(z)
        if layer < len(model.weights) - 1:
            a = _act(_layer_activation(model, layer), z)
    return pre[-1], (inputs, pre)


def features(model: MlpModel, x) -> np.ndarray:
    """Penultimate-layer features (the classifier's input)."""
    return forward(model, x)[1][0][-1]


def predict(model: MlpModel, x) -> np.ndarray:
    return np.argmax(forward(model, x)[0], axis=1)


@dataclass(frozen=True)
class RegularizerConfig:
    """Weights and energy variants of the regularization terms.

    ``weight_decay="norm"`` uses the mean neuron norm; ``"squared"`` the mean
    squared norm.  ``divide_hidden_by_layers`` averages instead of sums the
    hidden-layer energies.
    """

    lambda_w: float = 0.0
    lambda_h: float = 0.0
    lambda_o: float = 0.0
    hidden_spec: EnergySpec = field(default_factory=EnergySpec)
    output_spec: EnergySpec = field(default_factory=EnergySpec)
    output_mode: str = "full_sum"
    weight_decay: str = "norm"
    divide_hidden_by_layers: bool = False

    def __post_init__(self):
        for name in ("lambda_w", "lambda_h", "lambda_o"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise InvalidConfig(f"{name} must be finite and >= 0")
        if isinstance(self.hidden_spec, dict):
            object.__setattr__(self, "hidden_spec", EnergySpec.from_dict(self.hidden_spec))
        if isinstance(self.output_spec, dict):
            object.__setattr__(self, "output_spec", EnergySpec.from_dict(self.output_spec))
        validate_spec(self.hidden_spec, "hidden")
        validate_spec(self.output_spec, "output")
        if self.hidden_spec.beta is not None or self.output_spec.beta is not None:
            raise InvalidConfig("per-neuron weights are not supported for network layers")
        if self.output_mode not in OUTPUT_MODES:
            raise InvalidConfig(f"output_mode must be one of {OUTPUT_MODES}")
        if self.output_mode == "data_dependent_minibatch" and self.output_spec.distance != "euclidean":
            raise InvalidConfig("the data-dependent output energy is euclidean only")
        if self.weight_decay not in WEIGHT_DECAY_FORMS:
            raise InvalidConfig(f"weight_decay must be one of {WEIGHT_DECAY_FORMS}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_spec"] = self.hidden_spec.to_dict()
        d["output_spec"] = self.output_spec.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RegularizerConfig":
        return cls(**d)


@dataclass
class LossTerms:
    """Unweighted loss components; ``total`` applies the lambdas."""

    total: float
    data: float
    weight_decay: float
    hidden: float
    output: float

    def to_dict(self) -> dict:
        return asdict(self)


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean softmax cross-entropy and its gradient w.r.t. the logits."""
    m = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(m), labels]))
    probs = np.exp(shifted - log_norm[:, None])
    probs[np.arange(m), labels] -= 1.0
    return loss, probs / m


def _weight_decay(model: MlpModel, form: str):
    count = sum(w.shape[1] for w in model.weights)
    value, grads = 0.0, []
    for w in model.weights:
        norms = np.linalg.norm(w, axis=0)
        if form == "norm":
            value += norms.sum()
            grads.append(w / np.where(norms > 0, norms, 1.0) / count)
        else:
            value += np.sum(norms**2)
            grads.append(2.0 * w / count)
    return value / count, grads


def _layer_energy(w: np.ndarray, spec: EnergySpec):
    """Pair-normalized energy of the columns of ``w`` and its gradient."""
    if w.shape[1] < 2 and spec.space == "full":
        return 0.0, np.zeros_like(w)
    value, grad = energy_and_gradient(w.T, spec)
    return value.normalized, grad.T / value.pair_count


def composite_loss(model: MlpModel, x, y, reg: RegularizerConfig = RegularizerConfig()):
    """Loss terms and parameter gradients ``(LossTerms, dW list, db list)``.

    Terms with a zero lambda are skipped entirely, so an all-zero config is
    plain cross-entropy.
    """
    y = np.asarray(y, dtype=int).ravel()
    logits, (inputs, pre) = forward(model, x)
    if len(y) != logits.shape[0] or len(y) == 0:
        raise DimensionMismatch("need one label per input and a non-empty batch")
    if y.min() < 0 or y.max() >= model.n_classes:
        raise InvalidConfig("labels out of range for this model")

    data, dz = cross_entropy(logits, y)
    n_layers = len(model.weights)
    dW = [None] * n_layers
    db = [None] * n_layers
    for layer in range(n_layers - 1, -1, -1):
        dW[layer] = inputs[layer].T @ dz
        db[layer] = dz.sum(axis=0)
        if layer:
            upstream = dz @ model.weights[layer].T
            dz = _act_grad(_layer_activation(model, layer - 1), pre[layer - 1], upstream)

    wd = hidden = out = 0.0
    total = data
    if reg.lambda_w:
        wd, grads = _weight_decay(model, reg.weight_decay)
        for layer, g in enumerate(grads):
            dW[layer] = dW[layer] + reg.lambda_w * g
        total += reg.lambda_w * wd
    if reg.lambda_h and n_layers > 1:
        scale = 1.0 / (n_layers - 1) if reg.divide_hidden_by_layers else 1.0
        for layer in range(n_layers - 1):
            e, g = _layer_energy(model.weights[layer], reg.hidden_spec)
            hidden += scale * e
            dW[layer] = dW[layer] + (reg.lambda_h * scale) * g
        total += reg.lambda_h * hidden
    if reg.lambda_o:
        w_out = model.weights[-1]
        if reg.output_mode == "full_sum":
            out, g = _layer_energy(w_out, reg.output_spec)
        else:
            out = output_minibatch_energy(w_out.T, y, reg.output_spec.s)
            g = output_minibatch_gradient(w_out.T, y, reg.output_spec.s).T
        dW[-1] = dW[-1] + reg.lambda_o * g
        total += reg.lambda_o * out
    return LossTerms(total, data, wd, hidden, out), dW, db


def classifier_neuron_angles(model: MlpModel, degrees: bool = True) -> np.ndarray:
    """``(c, c)`` matrix of angles between the normalized classifier neurons."""
    ang = pairwise_angles(model.weights[-1].T)
    return np.degrees(ang) if degrees else ang


def min_classifier_angle(model: MlpModel, degrees: bool = True) -> float:
    ang = classifier_neuron_angles(model, degrees)
    return float(ang[~np.eye(len(ang), dtype=bool)].min())


def per_class_recall(model: MlpModel, data: SyntheticDataset) -> List[float]:
    pred = predict(model, data.points)
    return [float(np.mean(pred[data.labels == k] == k)) if np.any(data.labels == k) else float("nan")
            for k in range(data.n_classes)]


@dataclass
class TrainReport:
    epochs: List[LossTerms]
    accuracy: float
    per_class_recall: List[float]
    classifier_angles: np.ndarray
    features: Optional[np.ndarray] = None
    feature_labels: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "epochs": [e.to_dict() for e in self.epochs],
            "accuracy": float(self.accuracy),
            "per_class_recall": [float(r) for r in self.per_class_recall],
            "classifier_angles": np.asarray(self.classifier_angles).tolist(),
            "features": None if self.features is None else self.features.tolist(),
            "feature_labels": None if self.feature_labels is None else self.feature_labels.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainReport":
        return cls(
            epochs=[LossTerms(**e) for e in d["epochs"]],
            accuracy=d["accuracy"],
            per_class_recall=list(d["per_class_recall"]),
            classifier_angles=np.asarray(d["classifier_angles"], dtype=float),
            features=None if d.get("features") is None else np.asarray(d["features"], dtype=float),
            feature_labels=(None if d.get("feature_labels") is None
                            else np.asarray(d["feature_labels"], dtype=int)),
        )


def train(
    model: MlpModel,
    dataset: SyntheticDataset,
    reg: RegularizerConfig = RegularizerConfig(),
    epochs: int = 10,
    batch_size: int = 64,
    lr: float = 0.1,
    seed=0,
    test: Optional[SyntheticDataset] = None,
    dump_features: bool = False,
    grad_clip: Optional[float] = None,
):
    """Plain mini-batch gradient descent; returns ``(trained_model, TrainReport)``.

    ``grad_clip`` rescales any step whose global gradient norm exceeds it.
    The energy kernels blow up for nearly coincident neurons, so fixed-rate
    descent needs this when neurons are few and low-dimensional.

    Each epoch row holds the batch-averaged loss terms.  Accuracy and recall
    are measured on ``test`` when given, otherwise on ``dataset``; the
    feature dump always covers ``dataset``.
    """
    if epochs < 1 or batch_size < 1 or not lr > 0:
        raise InvalidConfig("epochs and batch_size must be >= 1 and lr > 0")
    if grad_clip is not None and not grad_clip > 0:
        raise InvalidConfig("grad_clip must be > 0")
    if dataset.points.shape[1] != model.sizes[0]:
        raise DimensionMismatch("dataset dimension does not match the model input")
    model = model.copy()
    rng = np.random.default_rng(seed)
    m = len(dataset)
    history = []
    for _ in range(epochs):
        order = rng.permutation(m)
        sums = np.zeros(5)
        n_batches = 0
        for start in range(0, m, batch_size):
            idx = order[start:start + batch_size]
            terms, dW, db = composite_loss(model, dataset.points[idx], dataset.labels[idx], reg)
            step = lr
            if grad_clip is not None:
                gnorm = np.sqrt(sum(np.sum(g * g) for g in dW + db))
                if gnorm > grad_clip:
                    step = lr * grad_clip / gnorm
            for layer in range(len(model.weights)):
                model.weights[layer] -= step * dW[layer]
                model.biases[layer] -= step * db[layer]
            sums += (terms.total, terms.data, terms.weight_decay, terms.hidden, terms.output)
            n_batches += 1
        history.append(LossTerms(*(float(v) for v in sums / n_batches)))

    evaluation = test if test is not None else dataset
    pred = predict(model, evaluation.points)
    report = TrainReport(
        epochs=history,
        accuracy=float(np.mean(pred == evaluation.labels)),
        per_class_recall=per_class_recall(model, evaluation),
        classifier_angles=classifier_neuron_angles(model),
    )
    if dump_features:
        report.features = features(model, dataset.points)
        report.feature_labels = dataset.labels.copy()
    return model, report
