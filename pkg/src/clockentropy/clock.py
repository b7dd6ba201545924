"""A single clock experiment: dynamics, initial state, measurement and horizon."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SemigroupGenerator, eigen_groups, energy_bandwidth, evolve
from .linalg import ValidationError, hermitian_eig, as_density_matrix, eigvals_entropy, entropy_of_probabilities
from .measurement import ProjectiveMeasurement, dephase, is_pure, outcome_probabilities, pure_disturbance

CHUNK = 256


class PureOrbit:
    """Outcome statistics of a pure state under a Hamiltonian, without d x d states.

    The state is split into its components on the occupied energy levels;
    p_j(t) is then a trigonometric polynomial with frequencies E_a - E_b.
    """

    def __init__(self, h: np.ndarray, rho0: np.ndarray, m: ProjectiveMeasurement):
        w, v = hermitian_eig(h)
        evals, evecs = np.linalg.eigh(rho0)
        psi = evecs[:, -1] * math.sqrt(max(evals[-1], 0.0))
        coeff = v.conj().T @ psi
        comps, energies = [], []
        for g in eigen_groups(w):
            part = v[:, g] @ coeff[g]
            if np.vdot(part, part).real > 1e-24:
                comps.append(part)
                energies.append(float(np.mean(w[g])))
        self.energies = np.array(energies)
        comps = np.array(comps)  # (K, d)
        self.blocks = np.array([comps.conj() @ p @ comps.T for p in m.projections])

    def _phases(self, times):
        return np.exp(-1j * np.multiply.outer(np.asarray(times, dtype=float), self.energies))

    def probabilities(self, times) -> np.ndarray:
        return np.clip(self._quadratic(times, self.blocks), 0.0, 1.0)

    def rates(self, times) -> np.ndarray:
        freq = 1j * (self.energies[:, None] - self.energies[None, :])
        return self._quadratic(times, self.blocks * freq)

    def _quadratic(self, times, blocks) -> np.ndarray:
        # sum_kl conj(ph_k) B_kl ph_l for each block B, as matrix products
        ph = self._phases(times)
        return np.stack([((ph.conj() @ b) * ph).sum(axis=1).real for b in blocks], axis=1)


@dataclass(frozen=True)
class ClockInstance:
    name: str
    generator: object
    rho0: np.ndarray
    measurement: ProjectiveMeasurement
    horizon: float
    declared_bandwidth: float
    parameter_name: str = "time t"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        rho0 = as_density_matrix(self.rho0, "initial state")
        if rho0.shape[0] != self.measurement.dim:
            raise ValidationError("measurement and state dimensions differ")
        if not self.horizon > 0:
            raise ValidationError("horizon must be positive")
        object.__setattr__(self, "rho0", rho0)
        h = self.hamiltonian
        if h is not None and math.isfinite(self.declared_bandwidth):
            actual = energy_bandwidth(h, rho0)
            if abs(actual - self.declared_bandwidth) > 1e-9:
                raise ValidationError(
                    f"declared bandwidth {self.declared_bandwidth} differs from computed {actual}"
                )

    @property
    def dim(self) -> int:
        return self.rho0.shape[0]

    @property
    def hamiltonian(self) -> np.ndarray | None:
        if isinstance(self.generator, SemigroupGenerator):
            return self.generator.hamiltonian
        if isinstance(self.generator, np.ndarray):
            return self.generator
        return None

    @property
    def is_closed(self) -> bool:
        return isinstance(self.generator, np.ndarray)

    def relabel(self, parameter_name: str) -> "ClockInstance":
        # copy without re-validating so the state matrix stays bit-identical
        twin = copy.copy(self)
        object.__setattr__(twin, "parameter_name", parameter_name)
        object.__setattr__(twin, "params", dict(self.params))
        return twin

    def _pure_orbit(self) -> PureOrbit | None:
        if not (self.is_closed and is_pure(self.rho0)):
            return None
        cached = self.__dict__.get("_orbit_cache")
        if cached is None:
            cached = PureOrbit(self.generator, self.rho0, self.measurement)
            object.__setattr__(self, "_orbit_cache", cached)
        return cached

    def states(self, times) -> np.ndarray:
        return evolve(self.generator, self.rho0, times)

    def _chunks(self, times):
        times = np.asarray(times, dtype=float)
        for start in range(0, len(times), CHUNK):
            yield self.states(times[start:start + CHUNK])

    def probabilities(self, times) -> np.ndarray:
        orbit = self._pure_orbit()
        if orbit is not None:
            return orbit.probabilities(times)
        return np.concatenate([outcome_probabilities(self.measurement, s) for s in self._chunks(times)])

    def rates(self, times) -> np.ndarray:
        """Exact dp_j/dt from the Hamiltonian part: tr(i[H, P_j] rho_t)."""
        h = self.hamiltonian
        if h is None:
            raise ValidationError(f"clock {self.name!r} has no Hamiltonian part")
        orbit = self._pure_orbit()
        if orbit is not None:
            return orbit.rates(times)
        ops = np.array([1j * (h @ p - p @ h) for p in self.measurement.projections])
        return np.concatenate([np.einsum("jab,tba->tj", ops, s).real for s in self._chunks(times)])

    def _dense(self, times, fn) -> np.ndarray:
        ps = self.measurement.projections
        out = []
        for s in self._chunks(times):
            dephased = dephase(ps, s)
            out.append(fn(s, dephased))
        return np.concatenate(out)

    def _use_pure(self, method: str) -> bool:
        if method == "pure":
            if self._pure_orbit() is None:
                raise ValidationError("pure fast path needs a pure state on a Hamiltonian orbit")
            return True
        if method not in ("auto", "dense"):
            raise ValueError(f"unknown method {method!r}")
        return method == "auto" and self._pure_orbit() is not None

    def entropy_increase(self, times, method: str = "auto") -> np.ndarray:
        """S(rho~_t) - S(rho_t) along the orbit."""
        if self._use_pure(method):
            return entropy_of_probabilities(self.probabilities(times))

        def fn(s, ds):
            return eigvals_entropy(np.linalg.eigvalsh(ds)) - eigvals_entropy(np.linalg.eigvalsh(s))

        return self._dense(times, fn)

    def disturbance(self, times, method: str = "auto") -> np.ndarray:
        """Trace norm of rho_t - rho~_t along the orbit."""
        if self._use_pure(method):
            return pure_disturbance(self.probabilities(times))

        def fn(s, ds):
            diff = s - ds
            diff = 0.5 * (diff + np.conj(np.swapaxes(diff, -1, -2)))
            return np.abs(np.linalg.eigvalsh(diff)).sum(axis=-1)

        return self._dense(times, fn)
