"""Projected gradient descent for point configurations on the unit sphere."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .energy import (
    EnergySpec,
    _evaluate,
    as_neurons,
    normalize,
)
from .errors import InvalidConfig, NonFiniteEnergy

# Trial steps closer than this to a coincidence are rejected outright.
COINCIDENCE_TOL = 1e-9
# Below this displacement a step cannot change a unit vector in float64.
_STALL_DISPLACEMENT = 1e-15

Objective = Callable[[np.ndarray], Optional[Tuple[float, np.ndarray]]]


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for :func:`minimize`.

    ``step_decay`` shrinks the step after a rejected trial; ``step_growth``
    enlarges it after an accepted one (``1.0`` keeps it fixed).
    ``record_every`` is the snapshot stride of the trajectory; the initial
    and final iterates are always kept.
    """

    step_size: float = 0.1
    max_iters: int = 20_000
    grad_tol: float = 1e-8
    step_decay: float = 0.5
    step_growth: float = 1.1
    seed: int = 0
    record_every: int = 0

    def __post_init__(self):
        if not self.step_size > 0:
            raise InvalidConfig("step_size must be > 0")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InvalidConfig("max_iters must be an integer >= 1")
        if not self.grad_tol > 0:
            raise InvalidConfig("grad_tol must be > 0")
        if not 0 < self.step_decay <= 1:
            raise InvalidConfig("step_decay must lie in (0, 1]")
        if not self.step_growth >= 1:
            raise InvalidConfig("step_growth must be >= 1")
        if self.record_every < 0:
            raise InvalidConfig("record_every must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Trajectory:
    """History of one descent run.

    ``iterates`` holds ``(iteration, points, energy)`` snapshots; ``energies``
    holds the energy after every accepted step (index 0 is the start).
    ``path_length`` is each neuron's summed angular displacement.
    """

    iterates: List[Tuple[int, np.ndarray, float]]
    energies: List[float]
    converged: bool
    final_grad_norm: float
    path_length: np.ndarray
    stop_reason: str
    n_iters: int
    n_rejected: int
    step_sizes: List[float] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.iterates[-1][1]

    @property
    def final_energy(self) -> float:
        return self.energies[-1]

    def to_dict(self) -> dict:
        return {
            "iterates": [
                {"iteration": int(i), "points": p.tolist(), "energy": float(e)}
                for i, p, e in self.iterates
            ],
            "energies": [float(e) for e in self.energies],
            "converged": bool(self.converged),
            "final_grad_norm": float(self.final_grad_norm),
            "path_length": self.path_length.tolist(),
            "stop_reason": self.stop_reason,
            "n_iters": int(self.n_iters),
            "n_rejected": int(self.n_rejected),
            "step_sizes": [float(h) for h in self.step_sizes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            iterates=[(it["iteration"], np.asarray(it["points"], dtype=float), it["energy"])
                      for it in d["iterates"]],
            energies=list(d["energies"]),
            converged=d["converged"],
            final_grad_norm=d["final_grad_norm"],
            path_length=np.asarray(d["path_length"], dtype=float),
            stop_reason=d["stop_reason"],
            n_iters=d["n_iters"],
            n_rejected=d["n_rejected"],
            step_sizes=list(d.get("step_sizes", [])),
        )


def random_sphere_init(n: int, dim_ambient: int, seed=None) -> np.ndarray:
    """``n`` points uniform on the unit sphere in ``R^dim_ambient``.

    Normalized standard Gaussians; ``seed`` may be anything accepted by
    :func:`numpy.random.default_rng`.
    """
    if n < 2 or dim_ambient < 2:
        raise InvalidConfig("need n >= 2 and dim_ambient >= 2")
    rng = np.random.default_rng(seed)
    return normalize(rng.standard_normal((n, dim_ambient)))


def _angles_moved(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    minus = np.linalg.norm(a - b, axis=1)
    plus = np.linalg.norm(a + b, axis=1)
    return 2.0 * np.arctan2(minus, plus)


def energy_objective(spec: EnergySpec) -> Objective:
    """Energy objective that returns ``None`` near coincidences."""

    def objective(x):
        try:
            value, grad = _evaluate(x, spec, want_grad=True, floor=COINCIDENCE_TOL)
        except NonFiniteEnergy:
            return None
        return value.total, grad

    return objective


def descend(init, objective: Objective, opt: OptimizerConfig) -> Trajectory:
    """Monotone projected gradient descent with backtracking.

    Each trial is ``normalize(x - eta * grad)``; it is accepted only if the
    objective strictly decreases, otherwise ``eta`` is multiplied by
    ``step_decay`` and the trial repeats.
    """
    x = normalize(init)
    start = objective(x)
    if start is None or not np.isfinite(start[0]):
        raise NonFiniteEnergy("initial configuration has infinite energy")
    value, grad = start

    iterates = [(0, x.copy(), value)]
    energies = [value]
    steps = []
    path = np.zeros(x.shape[0])
    eta = float(opt.step_size)
    rejected = 0
    stop = "max_iters"
    it = 0
    gnorm = float(np.max(np.linalg.norm(grad, axis=1)))

    while it < opt.max_iters:
        if gnorm < opt.grad_tol:
            stop = "grad_tol"
            break
        accepted = False
        while eta * gnorm >= _STALL_DISPLACEMENT:
            trial = normalize(x - eta * grad)
            result = objective(trial)
            if result is not None and result[0] < value:
                accepted = True
                break
            rejected += 1
            if opt.step_decay == 1.0:
                break
            eta *= opt.step_decay
        if not accepted:
            stop = "stalled"
            break
        it += 1
        path += _angles_moved(x, trial)
        steps.append(eta)
        x = trial
        value, grad = result
        gnorm = float(np.max(np.linalg.norm(grad, axis=1)))
        energies.append(value)
        if opt.record_every and it % opt.record_every == 0:
            iterates.append((it, x.copy(), value))
        eta *= opt.step_growth
    else:
        if gnorm < opt.grad_tol:
            stop = "grad_tol"

    if iterates[-1][0] != it:
        iterates.append((it, x.copy(), value))
    return Trajectory(
        iterates=iterates,
        energies=energies,
        converged=stop == "grad_tol",
        final_grad_norm=gnorm,
        path_length=path,
        stop_reason=stop,
        n_iters=it,
        n_rejected=rejected,
        step_sizes=steps,
    )


def minimize(init, spec: EnergySpec = EnergySpec(), opt: OptimizerConfig = OptimizerConfig()) -> Trajectory:
    """Minimize a hyperspherical energy starting from ``init``."""
    return descend(as_neurons(init), energy_objective(spec), opt)


def restart_seed(seed: int, restart: int) -> np.random.SeedSequence:
    """Independent RNG stream for one restart of a seeded experiment."""
    return np.random.SeedSequence([int(seed), int(restart)])


def best_of_restarts(n: int, d: int, spec: EnergySpec, restarts: int,
                     opt: OptimizerConfig = OptimizerConfig()) -> Trajectory:
    """Lowest-energy trajectory over ``restarts`` random starts on ``S^d``."""
    if restarts < 1:
        raise InvalidConfig("restarts must be >= 1")
    best = None
    for r in range(restarts):
        init = random_sphere_init(n, d + 1, restart_seed(opt.seed, r))
        traj = minimize(init, spec, opt)
        if best is None or traj.final_energy < best.final_energy:
            best = traj
    return best


def empirical_minimum_energy(n: int, d: int, s: float, restarts: int = 5,
                             opt: OptimizerConfig = OptimizerConfig(),
                             spec: Optional[EnergySpec] = None) -> float:
    """Upper bound on the minimal ``s``-energy of ``n`` points on ``S^d``."""
    spec = spec or EnergySpec(s=s)
    return best_of_restarts(n, d, spec, restarts, opt).final_energy
