"""Configuration experiments on small spheres.

* :func:`compare_regularizers` runs MHE, half-space MHE and orthonormal
  regularization from identical random starts and measures how well each
  spreads the neurons.
* :func:`weighted_displacement_experiment` tracks how far each neuron travels
  under weighted MHE.
* :func:`imbalance_experiment` trains a baseline and an MHE-regularized MLP on
  blobs with one rare class and reports rare-class recall and classifier
  geometry for both.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .energy import (
    EnergySpec,
    half_space_expand,
    min_pairwise_angle,
    normalize,
    orthonormal_reg,
)
from .data import make_imbalanced_blobs, sample_blobs
from .errors import InvalidConfig
from .mlp import RegularizerConfig, init_mlp, min_classifier_angle, train
from .optimizer import OptimizerConfig, Trajectory, descend, minimize, random_sphere_init

METHODS = ("mhe", "half_mhe", "orthonormal")


def orthonormal_objective(x: np.ndarray):
    """``|U^T U - I|_F^2`` on the normalized neurons, gradient w.r.t. ``x``."""
    norms = np.linalg.norm(x, axis=1)
    u = x / norms[:, None]
    value, grad_w = orthonormal_reg(u.T)
    g = grad_w.T
    radial = np.einsum("ij,ij->i", g, u)
    return value, (g - radial[:, None] * u) / norms[:, None]


@dataclass
class SeedComparison:
    seed: int
    min_angle: dict
    min_angle_half: dict
    final_points: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "min_angle": {k: float(v) for k, v in self.min_angle.items()},
            "min_angle_half": {k: float(v) for k, v in self.min_angle_half.items()},
            "final_points": {k: np.asarray(v).tolist() for k, v in self.final_points.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeedComparison":
        return cls(
            seed=d["seed"],
            min_angle=dict(d["min_angle"]),
            min_angle_half=dict(d["min_angle_half"]),
            final_points={k: np.asarray(v, dtype=float) for k, v in d.get("final_points", {}).items()},
        )


@dataclass
class ComparisonReport:
    """Per-seed minimum pairwise angles (radians) for every method.

    ``min_angle`` is measured among the neurons themselves; ``min_angle_half``
    among the neurons together with their negations.
    """

    n: int
    dim_ambient: int
    s: float
    precondition_ok: bool
    runs: List[SeedComparison]

    def median_min_angle(self, method: str, half: bool = False) -> float:
        key = "min_angle_half" if half else "min_angle"
        return float(np.median([getattr(r, key)[method] for r in self.runs]))

    def to_dict(self) -> dict:
        return {
            "n": int(self.n),
            "dim_ambient": int(self.dim_ambient),
            "s": float(self.s),
            "precondition_ok": bool(self.precondition_ok),
            "runs": [r.to_dict() for r in self.runs],
            "median_min_angle": {m: self.median_min_angle(m) for m in METHODS},
            "median_min_angle_half": {m: self.median_min_angle(m, half=True) for m in METHODS},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ComparisonReport":
        return cls(
            n=d["n"],
            dim_ambient=d["dim_ambient"],
            s=d["s"],
            precondition_ok=d["precondition_ok"],
            runs=[SeedComparison.from_dict(r) for r in d["runs"]],
        )


def compare_regularizers(
    n: int,
    dim_ambient: int,
    seeds: Sequence[int],
    s: float = 2.0,
    opt: OptimizerConfig = OptimizerConfig(),
) -> ComparisonReport:
    """Descend MHE, half-space MHE and orthonormal regularization per seed.

    All three start from ``random_sphere_init(n, dim_ambient, seed)`` and use
    the same projected descent.  Orthonormal regularization is applied to the
    normalized neurons so that every method moves directions only.
    """
    ok = n > dim_ambient
    if not ok:
        warnings.warn(
            f"n={n} <= dim_ambient={dim_ambient}: orthonormal regularization can reach "
            "an exact orthonormal set here, so the comparison is not informative",
            stacklevel=2,
        )
    objectives = {
        "mhe": lambda x0: minimize(x0, EnergySpec(s=s), opt),
        "half_mhe": lambda x0: minimize(x0, EnergySpec(s=s, space="half"), opt),
        "orthonormal": lambda x0: descend(x0, orthonormal_objective, opt),
    }
    runs = []
    for seed in seeds:
        init = random_sphere_init(n, dim_ambient, seed)
        finals = {m: run(init).final for m, run in objectives.items()}
        runs.append(SeedComparison(
            seed=int(seed),
            min_angle={m: min_pairwise_angle(p) for m, p in finals.items()},
            min_angle_half={m: min_pairwise_angle(half_space_expand(p)) for m, p in finals.items()},
            final_points=finals,
        ))
    return ComparisonReport(n=n, dim_ambient=dim_ambient, s=float(s), precondition_ok=ok, runs=runs)


def beta_profile(n: int, heavy: dict) -> tuple:
    """All-ones weights except the ``{index: beta}`` entries in ``heavy``."""
    beta = [1.0] * n
    for i, b in heavy.items():
        beta[int(i)] = float(b)
    return tuple(beta)


def weighted_trajectory(n: int, dim_ambient: int, beta: Optional[Sequence[float]], seed,
                        s: float = 2.0, opt: OptimizerConfig = OptimizerConfig()) -> Trajectory:
    spec = EnergySpec(s=s, beta=None if beta is None else tuple(beta))
    return minimize(random_sphere_init(n, dim_ambient, seed), spec, opt)


def weighted_displacement_experiment(
    n: int,
    dim_ambient: int,
    beta_profile: Sequence[float],
    seed,
    s: float = 2.0,
    opt: OptimizerConfig = OptimizerConfig(),
) -> np.ndarray:
    """Total angular path length of every neuron under weighted MHE."""
    beta = np.asarray(beta_profile, dtype=float)
    if beta.shape != (n,):
        raise InvalidConfig(f"beta_profile must have length {n}")
    if np.any(beta <= 0):
        raise InvalidConfig("beta_profile entries must be > 0")
    if np.all(beta == beta[0]):
        warnings.warn("all weights are equal; weighted MHE reduces to plain MHE", stacklevel=2)
    return weighted_trajectory(n, dim_ambient, beta, seed, s, opt).path_length


@dataclass
class ImbalanceReport:
    """Per-seed rare-class recall and minimum classifier angle (degrees)."""

    seeds: List[int]
    rare_recall: dict
    min_angle: dict
    accuracy: dict
    settings: dict

    def mean_recall(self, arm: str) -> float:
        return float(np.mean(self.rare_recall[arm]))

    def angle_wins(self) -> int:
        return int(np.sum(np.asarray(self.min_angle["mhe"]) > np.asarray(self.min_angle["baseline"])))

    def to_dict(self) -> dict:
        return {
            "seeds": [int(s) for s in self.seeds],
            "rare_recall": {k: [float(v) for v in vs] for k, vs in self.rare_recall.items()},
            "min_angle": {k: [float(v) for v in vs] for k, vs in self.min_angle.items()},
            "accuracy": {k: [float(v) for v in vs] for k, vs in self.accuracy.items()},
            "settings": dict(self.settings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ImbalanceReport":
        return cls(seeds=list(d["seeds"]), rare_recall=dict(d["rare_recall"]),
                   min_angle=dict(d["min_angle"]), accuracy=dict(d["accuracy"]),
                   settings=dict(d["settings"]))


def imbalance_experiment(
    seeds: Sequence[int],
    n_classes: int = 10,
    rare_count: int = 20,
    common_count: int = 1000,
    dim: int = 16,
    spread: float = 0.15,
    hidden: int = 32,
    feature_dim: int = 2,
    epochs: int = 30,
    batch_size: int = 64,
    lr: float = 0.1,
    grad_clip: float = 5.0,
    test_per_class: int = 200,
    mhe: Optional[RegularizerConfig] = None,
) -> ImbalanceReport:
    """Baseline vs MHE training on blobs where class 0 is rare.

    Both arms share data, initialization and batch order per seed.  The
    default MHE arm uses ``lambda_h = lambda_o = 1`` with half-space energy
    on the hidden layers.  Recall is measured on a balanced test set.
    """
    mhe = mhe or RegularizerConfig(lambda_h=1.0, lambda_o=1.0, hidden_spec=EnergySpec(space="half"))
    arms = {"baseline": RegularizerConfig(), "mhe": mhe}
    recall = {k: [] for k in arms}
    angle = {k: [] for k in arms}
    acc = {k: [] for k in arms}
    counts = [rare_count] + [common_count] * (n_classes - 1)
    for seed in seeds:
        data = make_imbalanced_blobs(n_classes, counts, dim, spread, seed)
        test = sample_blobs(data.means, test_per_class, spread, np.random.SeedSequence([int(seed), 1]))
        model = init_mlp([dim, hidden, feature_dim, n_classes], seed, feature_activation="identity")
        for arm, reg in arms.items():
            trained, rep = train(model, data, reg, epochs, batch_size, lr, seed, test=test,
                                 grad_clip=grad_clip)
            recall[arm].append(rep.per_class_recall[0])
            angle[arm].append(min_classifier_angle(trained))
            acc[arm].append(rep.accuracy)
    settings = dict(n_classes=n_classes, rare_count=rare_count, common_count=common_count, dim=dim,
                    spread=spread, hidden=hidden, feature_dim=feature_dim, epochs=epochs,
                    batch_size=batch_size, lr=lr, grad_clip=grad_clip,
                    test_per_class=test_per_class, mhe=mhe.to_dict())
    return ImbalanceReport([int(s) for s in seeds], recall, angle, acc, settings)
