"""Synthetic Gaussian-blob classification data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

from .errors import InvalidConfig


@dataclass
class SyntheticDataset:
    points: np.ndarray
    labels: np.ndarray
    class_counts: List[int]
    means: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        c = len(self.class_counts)
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= c):
            raise InvalidConfig("labels out of range")
        if sum(self.class_counts) != len(self.labels) or len(self.points) != len(self.labels):
            raise InvalidConfig("class_counts, points and labels disagree")

    @property
    def n_classes(self) -> int:
        return len(self.class_counts)

    def __len__(self) -> int:
        return len(self.labels)

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "labels": self.labels.tolist(),
            "class_counts": [int(c) for c in self.class_counts],
            "means": np.asarray(self.means).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticDataset":
        return cls(
            points=np.asarray(d["points"], dtype=float).reshape(len(d["labels"]), -1),
            labels=np.asarray(d["labels"], dtype=int),
            class_counts=list(d["class_counts"]),
            means=np.asarray(d["means"], dtype=float),
        )


def _counts(n_classes: int, per_class: Union[int, Sequence[int]]) -> List[int]:
    if np.isscalar(per_class):
        counts = [int(per_class)] * n_classes
    else:
        counts = [int(c) for c in per_class]
    if len(counts) != n_classes:
        raise InvalidConfig(f"per_class has {len(counts)} entries for {n_classes} classes")
    if any(c < 1 for c in counts):
        raise InvalidConfig("class counts must be positive")
    return counts


def sample_blobs(means, per_class, spread: float, seed) -> SyntheticDataset:
    """Draw ``per_class[k]`` points from ``N(means[k], spread^2 I)``."""
    means = np.asarray(means, dtype=float)
    counts = _counts(len(means), per_class)
    if spread < 0:
        raise InvalidConfig("spread must be >= 0")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(means)), counts)
    noise = rng.standard_normal((len(labels), means.shape[1]))
    return SyntheticDataset(means[labels] + spread * noise, labels, counts, means)


def make_imbalanced_blobs(n_classes: int, per_class, dim: int, spread: float, seed) -> SyntheticDataset:
    """Gaussian clusters around class means drawn uniformly on the unit sphere.

    ``spread`` is the per-coordinate noise standard deviation, so
    ``spread=0`` puts every point exactly on its class mean.
    """
    if n_classes < 2:
        raise InvalidConfig("need at least two classes")
    if dim < 2:
        raise InvalidConfig("dim must be >= 2")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    means_rng, points_seed = root.spawn(2)
    g = np.random.default_rng(means_rng).standard_normal((n_classes, dim))
    means = g / np.linalg.norm(g, axis=1, keepdims=True)
    return sample_blobs(means, per_class, spread, points_seed)
