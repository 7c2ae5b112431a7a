"""Hyperspherical energies and their analytic gradients.

A neuron set is a float array of shape ``(N, D)``: one (unnormalized) weight
vector per row, ``D = d + 1`` ambient dimensions.  Energies are always
evaluated on the row-normalized directions, summed over *ordered* pairs
``i != j``.

Kernels
-------
``s > 0`` uses the Riesz kernel ``f_s(z) = z**-s``; ``s == 0`` uses
``f_0(z) = log(1/z)``.  ``z`` is either the chordal (euclidean) distance or
the geodesic angle between two directions.

Gradients are taken with respect to the unnormalized weights, i.e. they are
pushed through ``w -> w / |w|`` and are therefore orthogonal to each ``w_i``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BatchTooSmall,
    GeodesicWithBeta,
    HalfSpaceOnOutput,
    InvalidConfig,
    LabelOutOfRange,
    NonFiniteEnergy,
    ZeroNormNeuron,
)

NORM_EPS = 1e-12
# sin(theta) floor for the geodesic gradient; equivalent to clamping the
# cosine to [-1 + 1e-12, 1 - 1e-12].
ARCCOS_MARGIN = 1e-12
_SIN_FLOOR = np.sqrt(2.0 * ARCCOS_MARGIN)

DISTANCES = ("euclidean", "geodesic")
SPACES = ("full", "half")


@dataclass(frozen=True)
class EnergySpec:
    """Selects an energy variant.

    Attributes:
        s: Riesz power, ``s >= 0``; ``0`` selects the logarithmic kernel.
        distance: ``"euclidean"`` (chordal) or ``"geodesic"`` (angle).
        space: ``"full"`` or ``"half"`` (adds the negated virtual neurons).
        beta: optional positive per-neuron weights; euclidean distance only.
    """

    s: float = 2.0
    distance: str = "euclidean"
    space: str = "full"
    beta: Optional[tuple] = None

    def __post_init__(self):
        if not np.isfinite(self.s) or self.s < 0:
            raise InvalidConfig(f"s must be a finite real >= 0, got {self.s}")
        if self.distance not in DISTANCES:
            raise InvalidConfig(f"distance must be one of {DISTANCES}, got {self.distance!r}")
        if self.space not in SPACES:
            raise InvalidConfig(f"space must be one of {SPACES}, got {self.space!r}")
        if self.beta is not None:
            beta = tuple(float(b) for b in self.beta)
            if not all(np.isfinite(b) and b > 0 for b in beta):
                raise InvalidConfig("beta entries must be finite and > 0")
            object.__setattr__(self, "beta", beta)
            if self.distance == "geodesic":
                raise GeodesicWithBeta(
                    "weighted points leave the unit sphere; geodesic distance is undefined"
                )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta"] = None if self.beta is None else list(self.beta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EnergySpec":
        d = dict(d)
        if d.get("beta") is not None:
            d["beta"] = tuple(d["beta"])
        return cls(**d)


@dataclass(frozen=True)
class EnergyValue:
    total: float
    pair_count: int
    normalized: float

    @classmethod
    def from_total(cls, total: float, n_points: int) -> "EnergyValue":
        pairs = n_points * (n_points - 1)
        normalized = total / pairs if pairs else 0.0
        return cls(total=float(total), pair_count=int(pairs), normalized=float(normalized))

    @property
    def is_finite(self) -> bool:
        return bool(np.isfinite(self.total))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyValue":
        return cls(total=float(d["total"]), pair_count=int(d["pair_count"]),
                   normalized=float(d["normalized"]))


def validate_spec(spec: EnergySpec, layer_role: str = "hidden") -> None:
    """Reject energy variants that make no sense for a layer role."""
    if layer_role not in ("hidden", "output"):
        raise InvalidConfig(f"layer_role must be 'hidden' or 'output', got {layer_role!r}")
    if spec.space == "half" and layer_role == "output":
        raise HalfSpaceOnOutput("half-space MHE can only regularize hidden layers")
    if spec.beta is not None and spec.distance == "geodesic":
        raise GeodesicWithBeta("weighted MHE is defined for euclidean distance only")


def as_neurons(weights) -> np.ndarray:
    """Coerce ``weights`` to a float ``(N, D)`` array, ``D >= 2``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 2:
        raise InvalidConfig(f"expected an (N, D) array with N >= 1 and D >= 2, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise InvalidConfig("weights must be finite")
    return w


def _norms(w: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.einsum("ij,ij->i", w, w))
    bad = np.flatnonzero(norms <= NORM_EPS)
    if bad.size:
        raise ZeroNormNeuron(int(bad[0]))
    return norms


def normalize(weights) -> np.ndarray:
    """Project every row onto the unit sphere."""
    w = as_neurons(weights)
    return w / _norms(w)[:, None]


def half_space_expand(weights) -> np.ndarray:
    """Append the negation of every neuron, keeping the original order first."""
    w = as_neurons(weights)
    return np.concatenate([w, -w], axis=0)


def _kernel(z: np.ndarray, s: float):
    """Return ``f_s(z)`` and ``f_s'(z)`` elementwise."""
    if s == 0:
        return -np.log(z), -1.0 / z
    fz = z ** (-s)
    return fz, -s * fz / z


def _chords(p: np.ndarray, sign: float = -1.0) -> np.ndarray:
    """``|p_i - p_j|`` (or ``|p_i + p_j|`` with ``sign=+1``) for all pairs."""
    diff = p[:, None, :] + sign * p[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def geodesic_angles(unit: np.ndarray) -> np.ndarray:
    """Pairwise angles between unit vectors, accurate near 0 and near pi."""
    return 2.0 * np.arctan2(_chords(unit), _chords(unit, 1.0))


def pairwise_angles(weights) -> np.ndarray:
    """Symmetric ``(N, N)`` matrix of angles (radians) between neuron directions."""
    ang = geodesic_angles(normalize(weights))
    np.fill_diagonal(ang, 0.0)
    return ang


def min_pairwise_angle(weights) -> float:
    ang = pairwise_angles(weights)
    n = ang.shape[0]
    return float(ang[~np.eye(n, dtype=bool)].min())


def _check_beta(spec: EnergySpec, n: int) -> Optional[np.ndarray]:
    if spec.beta is None:
        return None
    if len(spec.beta) != n:
        raise InvalidConfig(f"beta has length {len(spec.beta)} but there are {n} neurons")
    return np.asarray(spec.beta, dtype=float)


def _points(unit: np.ndarray, spec: EnergySpec, beta: Optional[np.ndarray]) -> np.ndarray:
    p = unit if beta is None else beta[:, None] * unit
    if spec.space == "half":
        p = np.concatenate([p, -p], axis=0)
    return p


def _evaluate(weights, spec: EnergySpec, want_grad: bool, floor: float = NORM_EPS):
    w = as_neurons(weights)
    n = w.shape[0]
    norms = _norms(w)
    unit = w / norms[:, None]
    beta = _check_beta(spec, n)
    p = _points(unit, spec, beta)
    m = p.shape[0]
    off = ~np.eye(m, dtype=bool)

    chord = _chords(p)
    if m > 1 and chord[off].min() <= floor:
        if want_grad:
            raise NonFiniteEnergy("coincident neurons: energy and gradient diverge")
        return EnergyValue.from_total(np.inf, m), None

    if spec.distance == "geodesic":
        plus = _chords(p, 1.0)
        z = 2.0 * np.arctan2(chord, plus)
    else:
        z = chord
    z = np.where(off, z, 1.0)
    fz, dfz = _kernel(z, spec.s)
    total = float(np.sum(fz, where=off))
    value = EnergyValue.from_total(total, m)
    if not want_grad:
        return value, None

    # dE/dp_i = 2 sum_j f'(z_ij) dz_ij/dp_i  (each unordered pair counted twice)
    if spec.distance == "geodesic":
        sin_z = chord * plus / 2.0
        ok = off & (sin_z > _SIN_FLOOR)
        coef = np.where(ok, -dfz / np.where(ok, sin_z, 1.0), 0.0)
        g_p = 2.0 * (coef @ p)
    else:
        coef = np.where(off, dfz / z, 0.0)
        g_p = 2.0 * (coef.sum(axis=1)[:, None] * p - coef @ p)

    if spec.space == "half":
        g_p = g_p[:n] - g_p[n:]
    if beta is not None:
        g_p = beta[:, None] * g_p
    radial = np.einsum("ij,ij->i", g_p, unit)
    grad = (g_p - radial[:, None] * unit) / norms[:, None]
    return value, grad


def energy(weights, spec: EnergySpec = EnergySpec()) -> EnergyValue:
    """Hyperspherical energy of a neuron set.

    Coincident directions give ``total == inf`` for every kernel.

    Examples
    --------
    >>> energy([[0, 0, 1], [0, 0, -1]], EnergySpec(s=1)).total
    1.0
    """
    return _evaluate(weights, spec, want_grad=False)[0]


def energy_gradient(weights, spec: EnergySpec = EnergySpec()) -> np.ndarray:
    """Gradient of :func:`energy` with respect to the unnormalized weights.

    Raises :class:`NonFiniteEnergy` at coincident configurations.
    """
    return _evaluate(weights, spec, want_grad=True)[1]


def energy_and_gradient(weights, spec: EnergySpec = EnergySpec()):
    """``(EnergyValue, gradient)`` from a single pass over the pairs."""
    return _evaluate(weights, spec, want_grad=True)


def log_surrogate(weights, s: float) -> float:
    """Sum over ordered pairs of ``log f_s(|u_i - u_j|)`` for ``s > 0``.

    This equals ``s`` times the logarithmic energy and lower-bounds the log of
    the Riesz energy after the mean-over-pairs rescaling.
    """
    if s <= 0:
        raise InvalidConfig("the log surrogate needs s > 0")
    unit = normalize(weights)
    n = unit.shape[0]
    off = ~np.eye(n, dtype=bool)
    z = np.where(off, _chords(unit), 1.0)
    return float(np.sum(-s * np.log(z), where=off))


# -- mini-batch approximations ---------------------------------------------


def sample_batch(n: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly sample ``batch_size`` distinct neuron indices, sorted."""
    if batch_size < 2:
        raise BatchTooSmall(f"a batch needs at least 2 neurons, got {batch_size}")
    if batch_size > n:
        raise InvalidConfig(f"batch size {batch_size} exceeds neuron count {n}")
    return np.sort(rng.choice(n, size=batch_size, replace=False))


def _resolve_batch(n, batch_indices, batch_size, seed) -> np.ndarray:
    if batch_indices is None:
        if batch_size is None:
            raise InvalidConfig("give either batch_indices or batch_size")
        return sample_batch(n, batch_size, np.random.default_rng(seed))
    idx = np.asarray(batch_indices, dtype=int).ravel()
    if idx.size < 2:
        raise BatchTooSmall(f"a batch needs at least 2 neurons, got {idx.size}")
    if len(np.unique(idx)) != idx.size:
        raise InvalidConfig("batch indices must be distinct")
    if idx.min() < 0 or idx.max() >= n:
        raise InvalidConfig(f"batch indices must lie in [0, {n})")
    return idx


def _subspec(spec: EnergySpec, idx: np.ndarray) -> EnergySpec:
    if spec.beta is None:
        return spec
    return EnergySpec(spec.s, spec.distance, spec.space, tuple(np.asarray(spec.beta)[idx]))


def minibatch_energy(
    weights,
    spec: EnergySpec = EnergySpec(),
    batch_indices: Optional[Sequence[int]] = None,
    *,
    batch_size: Optional[int] = None,
    seed=None,
) -> EnergyValue:
    """Energy of a sub-set of neurons.

    Pass ``batch_indices`` explicitly, or ``batch_size`` and ``seed`` to draw
    a uniform batch without replacement.
    """
    w = as_neurons(weights)
    idx = _resolve_batch(w.shape[0], batch_indices, batch_size, seed)
    return energy(w[idx], _subspec(spec, idx))


def minibatch_gradient(
    weights,
    spec: EnergySpec = EnergySpec(),
    batch_indices: Optional[Sequence[int]] = None,
    *,
    batch_size: Optional[int] = None,
    seed=None,
) -> np.ndarray:
    """Full-size gradient of :func:`minibatch_energy`; zero outside the batch.

    Over uniform batches of size ``b`` the expectation is
    ``b(b-1) / (N(N-1))`` times the full gradient, since every ordered pair is
    kept with that probability.
    """
    w = as_neurons(weights)
    idx = _resolve_batch(w.shape[0], batch_indices, batch_size, seed)
    grad = np.zeros_like(w)
    grad[idx] = energy_gradient(w[idx], _subspec(spec, idx))
    return grad


def _output_minibatch(classifier, labels, s: float, want_grad: bool):
    w = as_neurons(classifier)
    n = w.shape[0]
    if n < 2:
        raise InvalidConfig("need at least two classifier neurons")
    y = np.asarray(labels, dtype=int).ravel()
    if y.size < 1:
        raise InvalidConfig("batch_labels must be non-empty")
    bad = np.flatnonzero((y < 0) | (y >= n))
    if bad.size:
        raise LabelOutOfRange(f"label {int(y[bad[0]])} not in [0, {n})")
    if s < 0:
        raise InvalidConfig("s must be >= 0")
    norms = _norms(w)
    unit = w / norms[:, None]
    m = y.size
    scale = 1.0 / (m * (n - 1))

    # Each class row of the (n, n) kernel matrix is used once per occurrence.
    counts = np.bincount(y, minlength=n).astype(float)
    off = ~np.eye(n, dtype=bool)
    diff = unit[:, None, :] - unit[None, :, :]
    z = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    used = off & (counts[:, None] > 0)
    if np.any(z[used] <= NORM_EPS):
        if want_grad:
            raise NonFiniteEnergy("coincident classifier neurons")
        return np.inf, None
    z = np.where(off, z, 1.0)
    fz, dfz = _kernel(z, s)
    value = scale * float(np.sum(counts[:, None] * fz, where=off))
    if not want_grad:
        return value, None
    coef = np.where(off, counts[:, None] * dfz / z, 0.0)
    # d/du_a of f(|u_a - u_b|) is f' (u_a - u_b)/z; u_b receives the negative.
    sym = coef + coef.T
    g_u = scale * (sym.sum(axis=1)[:, None] * unit - sym @ unit)
    radial = np.einsum("ij,ij->i", g_u, unit)
    return value, (g_u - radial[:, None] * unit) / norms[:, None]


def output_minibatch_energy(classifier_neurons, batch_labels, s: float = 2.0) -> float:
    """Data-dependent mini-batch energy of classifier neurons.

    ``1/(m(N-1)) * sum_i sum_{j != y_i} f_s(|u_{y_i} - u_j|)`` over the ``m``
    labels in the batch; euclidean, full space.
    """
    return _output_minibatch(classifier_neurons, batch_labels, s, want_grad=False)[0]


def output_minibatch_gradient(classifier_neurons, batch_labels, s: float = 2.0) -> np.ndarray:
    return _output_minibatch(classifier_neurons, batch_labels, s, want_grad=True)[1]


def orthonormal_reg(weight_matrix):
    """Squared Frobenius distance of the Gram matrix from identity.

    ``weight_matrix`` holds one neuron per *column*.  Returns the value
    ``|W^T W - I|_F^2`` and its gradient ``4 W (W^T W - I)``.
    """
    W = np.asarray(weight_matrix, dtype=float)
    if W.ndim != 2 or W.shape[1] < 1:
        raise InvalidConfig(f"expected a (D, N) matrix, got shape {W.shape}")
    resid = W.T @ W - np.eye(W.shape[1])
    return float(np.sum(resid * resid)), 4.0 * W @ resid
