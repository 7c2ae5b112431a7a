"""Empirical checks of the large-N behaviour of minimal energies.

Two statistics are computed for optimized configurations:

* the minimal energy divided by its growth rate ``p(N)``, whose limit exists
  (and equals the continuous energy integral of the uniform measure when
  ``0 < s < d``);
* a spherical-cap discrepancy, which tends to zero for asymptotically
  uniform point sets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.special import betainc, gammaln

from .energy import EnergySpec, normalize
from .errors import InvalidConfig, InvalidRegime
from .optimizer import OptimizerConfig, best_of_restarts, random_sphere_init


def regime(s: float, d: int) -> str:
    """Which growth law applies: ``"sub"`` (s<d), ``"critical"`` or ``"super"``."""
    if s < 0 or d < 1 or not np.isfinite(s):
        raise InvalidRegime(f"no growth law for s={s}, d={d}")
    if s < d:
        return "sub"
    return "critical" if s == d else "super"


def growth_rate(s: float, d: int, n) -> np.ndarray:
    """``p(N)``: ``N^2``, ``N^2 log N`` or ``N^(1 + s/d)`` by regime."""
    n = np.asarray(n, dtype=float)
    r = regime(s, d)
    if r == "sub":
        return n**2
    if r == "critical":
        return n**2 * np.log(n)
    return n ** (1.0 + s / d)


def _correction_scale(s: float, d: int, n) -> np.ndarray:
    """Leading correction of ``energy / p(N)``, used to extrapolate the limit."""
    n = np.asarray(n, dtype=float)
    r = regime(s, d)
    if r == "critical":
        return 1.0 / np.log(n)
    return n ** (s / d - 1.0) if r == "sub" else n ** (1.0 - s / d)


def riesz_integral(s: float, d: int) -> float:
    """Closed form of the ``s``-energy integral of the uniform measure on ``S^d``.

    Finite only for ``0 < s < d``.
    """
    if not 0 < s < d:
        raise InvalidConfig("the energy integral is finite only for 0 < s < d")
    log_val = ((d - 1 - s) * math.log(2) + gammaln((d + 1) / 2) + gammaln((d - s) / 2)
               - 0.5 * math.log(math.pi) - gammaln(d - s / 2))
    return float(math.exp(log_val))


def riesz_integral_mc(s: float, d: int, n_samples: int = 1_000_000, seed=0) -> float:
    """Monte Carlo estimate of the same integral from independent point pairs."""
    rng = np.random.default_rng(seed)
    u = normalize(rng.standard_normal((n_samples, d + 1)))
    v = normalize(rng.standard_normal((n_samples, d + 1)))
    return float(np.mean(np.linalg.norm(u - v, axis=1) ** (-s)))


def cap_measure(heights, d: int) -> np.ndarray:
    """Uniform measure of the caps ``{x in S^d : <x, c> >= h}``."""
    h = np.clip(np.asarray(heights, dtype=float), -1.0, 1.0)
    return betainc(d / 2.0, d / 2.0, (1.0 - h) / 2.0)


def random_caps(n_caps: int, d: int, seed):
    """Cap centres uniform on ``S^d`` and heights uniform on ``[-1, 1]``."""
    rng = np.random.default_rng(seed)
    centers = normalize(rng.standard_normal((n_caps, d + 1)))
    return centers, rng.uniform(-1.0, 1.0, size=n_caps)


def cap_discrepancy(points, n_caps: int = 1000, seed=0) -> float:
    """Max deviation between empirical and exact measure over random caps."""
    x = normalize(points)
    d = x.shape[1] - 1
    centers, heights = random_caps(n_caps, d, seed)
    empirical = np.mean(x @ centers.T >= heights, axis=0)
    return float(np.max(np.abs(empirical - cap_measure(heights, d))))


@dataclass
class AsymptoticReport:
    s: float
    d: int
    sample_counts: List[int]
    energies: List[float]
    min_energies: List[float]
    fitted_limit: float
    uniformity_stat: float
    random_uniformity_stat: float
    regime: str
    configuration: np.ndarray

    def to_dict(self) -> dict:
        return {
            "s": float(self.s),
            "d": int(self.d),
            "sample_counts": [int(n) for n in self.sample_counts],
            "energies": [float(e) for e in self.energies],
            "min_energies": [float(e) for e in self.min_energies],
            "fitted_limit": float(self.fitted_limit),
            "uniformity_stat": float(self.uniformity_stat),
            "random_uniformity_stat": float(self.random_uniformity_stat),
            "regime": self.regime,
            "configuration": self.configuration.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AsymptoticReport":
        d = dict(d)
        d["configuration"] = np.asarray(d["configuration"], dtype=float)
        return cls(**d)


def asymptotic_check(
    s: float,
    d: int,
    sample_counts: Sequence[int],
    restarts: int = 3,
    opt: OptimizerConfig = OptimizerConfig(),
    n_caps: int = 1000,
    cap_seed: int = 0,
) -> AsymptoticReport:
    """Minimize for each ``N`` and report ``energy / p(N)`` plus uniformity.

    ``fitted_limit`` extrapolates ``energy / p(N)`` linearly in the leading
    correction term (``N^(s/d-1)``, ``1/log N`` or ``N^(1-s/d)``).  The
    uniformity statistic is the cap discrepancy of the largest configuration;
    a uniform random set of equal size is scored on the same caps.
    """
    kind = regime(s, d)
    counts = [int(n) for n in sample_counts]
    if len(counts) < 1 or any(b <= a for a, b in zip(counts, counts[1:])):
        raise InvalidConfig("sample_counts must be strictly increasing")
    if counts[0] < 2:
        raise InvalidConfig("sample_counts must be >= 2")

    spec = EnergySpec(s=s)
    energies, best = [], None
    for n in counts:
        best = best_of_restarts(n, d, spec, restarts, opt)
        energies.append(best.final_energy)
    ratios = list(np.asarray(energies) / growth_rate(s, d, counts))

    if len(counts) >= 2:
        x = _correction_scale(s, d, counts)
        slope, intercept = np.polyfit(x, ratios, 1)
        limit = float(intercept)
    else:
        limit = float(ratios[-1])

    config = best.final
    reference = random_sphere_init(counts[-1], d + 1, np.random.SeedSequence([opt.seed, 10**6]))
    return AsymptoticReport(
        s=float(s),
        d=int(d),
        sample_counts=counts,
        energies=[float(e) for e in energies],
        min_energies=[float(r) for r in ratios],
        fitted_limit=limit,
        uniformity_stat=cap_discrepancy(config, n_caps, cap_seed),
        random_uniformity_stat=cap_discrepancy(reference, n_caps, cap_seed),
        regime=kind,
        configuration=config,
    )
