"""Derivative-free search over projective measurements for the least entropy at a fixed resolution."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .bounds import RESOLUTION_POINTS, TV_TOL, average_entropy_increase, theorem1_bound, total_variation
from .clock import ClockInstance
from .dynamics import energy_bandwidth
from .linalg import ValidationError, is_unitary
from .measurement import ProjectiveMeasurement, measurement_from_basis

MAX_SEARCH_DIM = 8


def hermitian_basis(d: int) -> np.ndarray:
    """Hilbert-Schmidt orthonormal basis of d x d Hermitian matrices, shape (d^2, d, d).

    Order: diagonal units, then symmetric and antisymmetric off-diagonal pairs.
    """
    basis = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[i, j] = s[j, i] = 1 / math.sqrt(2)
            a = np.zeros((d, d), dtype=complex)
            a[i, j], a[j, i] = -1j / math.sqrt(2), 1j / math.sqrt(2)
            basis += [s, a]
    return np.array(basis)


@dataclass(frozen=True)
class MeasurementParametrization:
    theta: np.ndarray
    base_partition: tuple[int, ...]

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        d = sum(self.base_partition)
        if theta.size != d * d:
            raise ValidationError(f"theta needs {d * d} entries for dimension {d}, got {theta.size}")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "base_partition", tuple(int(r) for r in self.base_partition))

    @property
    def dim(self) -> int:
        return sum(self.base_partition)

    def unitary(self) -> np.ndarray:
        a = np.tensordot(self.theta, hermitian_basis(self.dim), axes=1)
        w, v = np.linalg.eigh(a)
        return (v * np.exp(1j * w)) @ v.conj().T


def realize_measurement(param: MeasurementParametrization) -> ProjectiveMeasurement:
    """The family U Pi_j U^dagger for U = exp(i A(theta))."""
    u = param.unitary()
    if not is_unitary(u, 1e-9):
        raise ValidationError("parametrized transformation is not unitary")
    return measurement_from_basis(u, param.base_partition)


@dataclass(frozen=True)
class SearchConfig:
    delta_t: float
    restarts: int = 4
    max_iterations: int = 200
    initial_step: float = 0.5
    init_scale: float = 1.0
    penalty_weight: float = 1e3
    escalations: int = 2
    rng_seed: int = 0
    base_partition: tuple[int, ...] | None = None
    resolution_points: int = RESOLUTION_POINTS + 1
    quadrature_points: int = 129
    jobs: int = 1

    def __post_init__(self):
        for name in ("delta_t", "restarts", "max_iterations", "initial_step", "init_scale",
                     "penalty_weight", "resolution_points", "quadrature_points", "jobs"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"search config field {name} must be positive")
        if self.escalations < 0 or self.rng_seed < 0:
            raise ValidationError("escalations and rng_seed must be non-negative")


@dataclass
class Evaluation:
    restart: int
    index: int
    objective: float
    mean_entropy: float
    min_tv: float
    feasible: bool
    penalty_weight: float


@dataclass
class SearchResult:
    measurement: ProjectiveMeasurement
    theta: np.ndarray
    mean_entropy: float
    min_tv: float
    feasible: bool
    bound: float
    trace: list[Evaluation] = field(default_factory=list)
    seed: int = 0

    @property
    def gap_ratio(self) -> float:
        return self.mean_entropy / self.bound


class Objective:
    """Mean entropy increase plus a quadratic hinge on the resolution shortfall."""

    def __init__(self, instance: ClockInstance, config: SearchConfig):
        if instance.dim > MAX_SEARCH_DIM:
            raise ValidationError(f"search dimension capped at {MAX_SEARCH_DIM}, clock has {instance.dim}")
        self.instance = instance
        self.config = config
        self.partition = config.base_partition or (1,) * instance.dim
        if not config.delta_t <= instance.horizon:
            raise ValidationError(f"delta_t {config.delta_t} exceeds the horizon {instance.horizon}")
        self.starts = np.linspace(0.0, instance.horizon - config.delta_t, config.resolution_points)

    def parts(self, theta) -> tuple[float, float]:
        m = realize_measurement(MeasurementParametrization(theta, self.partition))
        clock = replace(self.instance, measurement=m)
        tv = float(np.min(total_variation(clock.probabilities(self.starts),
                                          clock.probabilities(self.starts + self.config.delta_t))))
        mean = average_entropy_increase(clock, self.config.quadrature_points).value
        return mean, tv

    def __call__(self, theta, weight: float | None = None) -> float:
        mean, tv = self.parts(theta)
        w = self.config.penalty_weight if weight is None else weight
        return mean + w * max(0.0, 0.5 - tv) ** 2


def objective(instance: ClockInstance, param: MeasurementParametrization, config: SearchConfig) -> float:
    return Objective(instance, config)(param.theta)


def _run_restart(obj: Objective, restart: int) -> list[tuple[np.ndarray, Evaluation]]:
    cfg = obj.config
    rng = np.random.default_rng([cfg.rng_seed, restart])
    n = obj.instance.dim ** 2
    start = rng.normal(scale=cfg.init_scale, size=n)
    evaluated: list[tuple[np.ndarray, Evaluation]] = []
    weight = cfg.penalty_weight

    def f(theta):
        mean, tv = obj.parts(theta)
        value = mean + weight * max(0.0, 0.5 - tv) ** 2
        ev = Evaluation(restart, len(evaluated), value, mean, tv, tv >= 0.5 - TV_TOL, weight)
        evaluated.append((np.array(theta), ev))
        return value

    x = start
    for escalation in range(cfg.escalations + 1):
        simplex = np.vstack([x, x + cfg.initial_step * np.eye(n)])
        res = scipy_minimize(f, x, method="Nelder-Mead",
                             options={"maxiter": cfg.max_iterations, "initial_simplex": simplex,
                                      "xatol": 1e-8, "fatol": 1e-12})
        x = res.x
        best = min(evaluated, key=lambda e: (not e[1].feasible, e[1].mean_entropy if e[1].feasible else e[1].objective))
        if best[1].feasible or escalation == cfg.escalations:
            break
        weight *= 2.0
    return evaluated


def minimize(instance: ClockInstance, config: SearchConfig) -> SearchResult:
    """Nelder-Mead restarts; the best feasible evaluation wins, ties by restart then order.

    If no evaluation is feasible the result is flagged ``feasible=False``.
    """
    obj = Objective(instance, config)
    runs = range(config.restarts)
    if config.jobs > 1:
        with ThreadPoolExecutor(config.jobs) as pool:
            results = list(pool.map(lambda r: _run_restart(obj, r), runs))
    else:
        results = [_run_restart(obj, r) for r in runs]
    evaluated = [e for run in results for e in run]
    feasible = [e for e in evaluated if e[1].feasible]
    if feasible:
        theta, ev = min(feasible, key=lambda e: (e[1].mean_entropy, e[1].restart, e[1].index))
    else:
        theta, ev = min(evaluated, key=lambda e: (e[1].objective, e[1].restart, e[1].index))
    dE = energy_bandwidth(instance.hamiltonian, instance.rho0)
    part = obj.partition
    return SearchResult(realize_measurement(MeasurementParametrization(theta, part)), theta, ev.mean_entropy,
                        ev.min_tv, ev.feasible, theorem1_bound(config.delta_t, dE),
                        [e[1] for e in evaluated], config.rng_seed)
