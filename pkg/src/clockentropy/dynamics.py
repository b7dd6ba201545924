"""Hamiltonian orbits, spectral measures and dephasing semigroups (hbar = 1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .linalg import (
    ValidationError,
    as_density_matrix,
    as_operator,
    hermitian_eig,
    require_hermitian,
)
from .measurement import ProjectiveMeasurement, dephase, outcome_probabilities

MERGE_RTOL = 1e-9
OCCUPATION_TOL = 1e-12


def _same_dim(h: np.ndarray, rho: np.ndarray):
    if h.shape != rho.shape:
        raise ValidationError(f"dimension mismatch: generator {h.shape}, state {rho.shape}")


class Atom(NamedTuple):
    energy: float
    weight: float
    rank: int


@dataclass(frozen=True)
class SpectralMeasure:
    atoms: tuple[Atom, ...]

    @property
    def energies(self) -> np.ndarray:
        return np.array([a.energy for a in self.atoms])

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms])


def eigen_groups(w: np.ndarray) -> list[np.ndarray]:
    """Index groups of ascending eigenvalues closer than MERGE_RTOL * spread."""
    tol = MERGE_RTOL * (w[-1] - w[0])
    groups, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > tol:
            groups.append(np.arange(start, i))
            start = i
    return groups


def spectral_measure(h, rho) -> SpectralMeasure:
    """Occupation of each distinct energy of ``h`` in the state ``rho``."""
    h = require_hermitian(h, "Hamiltonian")
    rho = as_density_matrix(rho)
    _same_dim(h, rho)
    w, v = hermitian_eig(h)
    occ = np.real(np.einsum("ai,ab,bi->i", v.conj(), rho, v, optimize=True))
    atoms = tuple(
        Atom(float(np.mean(w[g])), float(max(occ[g].sum(), 0.0)), len(g)) for g in eigen_groups(w)
    )
    return SpectralMeasure(atoms)


def energy_bandwidth(h, rho, occupation_tol: float = OCCUPATION_TOL) -> float:
    """Length of the smallest interval carrying all occupied energies."""
    occupied = [a.energy for a in spectral_measure(h, rho).atoms if a.weight > occupation_tol]
    if not occupied:
        raise RuntimeError("no energy level is occupied above the tolerance")
    return max(occupied) - min(occupied)


def rescale_hamiltonian(h, rho, occupation_tol: float = OCCUPATION_TOL) -> np.ndarray:
    """Bounded Hamiltonian with the same orbit and norm at most half the bandwidth.

    The occupied band [E_min, E_max] is shifted to [-dE/2, dE/2]; energies
    outside the band (never visited by the orbit) are mapped to -dE/2.
    """
    h = require_hermitian(h, "Hamiltonian")
    atoms = [a for a in spectral_measure(h, rho).atoms if a.weight > occupation_tol]
    e_min, e_max = atoms[0].energy, atoms[-1].energy
    width = e_max - e_min
    if width <= 0:
        raise ValidationError("state is stationary (zero energy bandwidth): it cannot serve as a clock")
    w, v = hermitian_eig(h)
    slack = MERGE_RTOL * max(w[-1] - w[0], 1.0)
    inside = (w >= e_min - slack) & (w <= e_max + slack)
    shifted = np.where(inside, w - e_min, 0.0) - 0.5 * width
    return (v * shifted) @ v.conj().T


def unitary(h, t: float) -> np.ndarray:
    w, v = hermitian_eig(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def propagate(h, rho, t: float) -> np.ndarray:
    """rho_t = exp(-iHt) rho exp(iHt)."""
    h = require_hermitian(h, "Hamiltonian")
    rho = as_density_matrix(rho)
    _same_dim(h, rho)
    if t == 0:
        return rho
    return as_density_matrix(hamiltonian_states(h, rho, np.array([t]))[0])


def hamiltonian_states(h: np.ndarray, rho: np.ndarray, times) -> np.ndarray:
    """Batched unitary orbit, shape ``(len(times), d, d)``; inputs assumed valid."""
    w, v = hermitian_eig(h)
    r = v.conj().T @ rho @ v
    times = np.asarray(times, dtype=float)
    phase = np.exp(-1j * np.multiply.outer(times, w[:, None] - w[None, :]))
    return np.einsum("ia,tab,jb->tij", v, r * phase, v.conj(), optimize=True)


# Pade [13/13] coefficients and the matching norm threshold for scaling and squaring.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0, 10559470521600.0, 670442572800.0, 33522128640.0, 1323241920.0,
    40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def expm(a) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a fixed [13/13] Pade approximant."""
    a = as_operator(a)
    norm = np.linalg.norm(a, 1)
    s = max(0, int(math.ceil(math.log2(norm / _THETA13)))) if norm > 0 else 0
    a = a / 2.0**s
    b = _PADE13
    ident = np.eye(a.shape[0], dtype=complex)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


@dataclass(frozen=True)
class SemigroupGenerator:
    """F(rho) = -i[H, rho] + rate * (G(rho) - rho), G the dephasing of ``dephasing``."""

    hamiltonian: np.ndarray
    dephasing: ProjectiveMeasurement
    rate: float = 0.0

    def __post_init__(self):
        h = require_hermitian(self.hamiltonian, "Hamiltonian")
        if self.rate < 0 or not math.isfinite(self.rate):
            raise ValidationError(f"dephasing rate must be finite and >= 0, got {self.rate}")
        if h.shape[0] != self.dephasing.dim:
            raise ValidationError("Hamiltonian and dephasing measurement dimensions differ")
        object.__setattr__(self, "hamiltonian", h)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def superoperator(self) -> np.ndarray:
        """Row-major vectorized generator: vec(A X B) = (A kron B^T) vec(X)."""
        h, d = self.hamiltonian, self.dim
        one = np.eye(d)
        f = -1j * (np.kron(h, one) - np.kron(one, h.T))
        if self.rate:
            g = sum(np.kron(p, p.T) for p in self.dephasing.projections)
            f = f + self.rate * (g - np.eye(d * d))
        return f

    def apply(self, rho) -> np.ndarray:
        h = self.hamiltonian
        ps = self.dephasing.projections
        dephased = dephase(ps, rho)
        return -1j * (h @ rho - rho @ h) + self.rate * (dephased - rho)


def semigroup_propagate(gen: SemigroupGenerator, rho, t: float) -> np.ndarray:
    """exp(F t)(rho) for t >= 0."""
    if t < 0:
        raise ValidationError("semigroup dynamics is only defined forward in time (t >= 0)")
    rho = as_density_matrix(rho)
    _same_dim(gen.hamiltonian, rho)
    return as_density_matrix(semigroup_states(gen, rho, [t])[0], "propagated state")


def semigroup_states(gen: SemigroupGenerator, rho: np.ndarray, times) -> np.ndarray:
    d = gen.dim
    f = gen.superoperator()
    vec = rho.reshape(d * d)
    out = np.empty((len(times), d, d), dtype=complex)
    for i, t in enumerate(times):
        out[i] = (expm(f * t) @ vec).reshape(d, d) if t else rho
    return out


def evolve(generator, rho: np.ndarray, times) -> np.ndarray:
    """States of any supported generator at ``times``, each computed from ``rho``.

    ``generator`` is a Hermitian matrix, a :class:`SemigroupGenerator`, or any
    object exposing ``states(rho, times)``.
    """
    times = np.asarray(times, dtype=float)
    if isinstance(generator, SemigroupGenerator):
        if np.any(times < 0):
            raise ValidationError("semigroup dynamics is only defined forward in time (t >= 0)")
        return semigroup_states(generator, rho, times)
    if hasattr(generator, "states"):
        return generator.states(rho, times)
    h = require_hermitian(generator, "Hamiltonian")
    _same_dim(h, rho)
    return hamiltonian_states(h, rho, times)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray | None = None
    probabilities: np.ndarray | None = None
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise ValidationError("trajectory time grid must be strictly increasing with >= 2 points")
        object.__setattr__(self, "times", t)


def sample_orbit(generator, rho0, horizon: float, n_steps: int,
                 measurement: ProjectiveMeasurement | None = None) -> Trajectory:
    """Uniform-grid trajectory on [0, horizon] including both endpoints.

    With ``measurement`` given, only outcome distributions are stored.
    """
    if n_steps < 2:
        raise ValidationError("n_steps must be >= 2")
    rho0 = as_density_matrix(rho0)
    times = np.linspace(0.0, horizon, n_steps)
    states = evolve(generator, rho0, times)
    desc = {"generator": type(generator).__name__, "horizon": horizon, "n_steps": n_steps}
    if measurement is not None:
        return Trajectory(times, probabilities=outcome_probabilities(measurement, states), description=desc)
    return Trajectory(times, np.array([as_density_matrix(s) for s in states]), description=desc)
