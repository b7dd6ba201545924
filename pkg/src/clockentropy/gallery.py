"""Constructors for the worked clock examples, each returning a :class:`ClockInstance`."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .clock import ClockInstance
from .dynamics import SemigroupGenerator, energy_bandwidth, semigroup_states
from .linalg import ValidationError, eigvals_entropy, pure_state
from .measurement import ProjectiveMeasurement, compose_with_apparatus, measurement_from_basis, z_basis

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)


def make_rabi_clock(bandwidth: float = 1.0) -> ClockInstance:
    """Two-level clock H = (dE/2) sigma_x from |0>, read out in the Z basis.

    p_1(t) = sin^2(dE t / 2); the horizon is the half period pi / dE.
    """
    if not bandwidth > 0:
        raise ValidationError("bandwidth must be positive")
    return ClockInstance("rabi", 0.5 * bandwidth * SIGMA_X, pure_state(KET0), z_basis(2),
                         math.pi / bandwidth, bandwidth, params={"bandwidth": bandwidth})


def sector_boundaries(n_sectors: int) -> np.ndarray:
    return 2 * np.pi * np.arange(n_sectors + 1) / n_sectors


def sector_matrices(k: int, n_sectors: int = 4) -> np.ndarray:
    """Sector projections compressed to span{|0>, ..., |k-1>}.

    With |j> represented by e^{i j phi} / sqrt(2 pi) on the circle, entry
    (j, j') of sector m is (1/2pi) * integral over the arc of e^{i (j' - j) phi}.
    """
    j = np.arange(k)
    diff = j[None, :] - j[:, None]
    edges = sector_boundaries(n_sectors)
    out = np.empty((n_sectors, k, k), dtype=complex)
    safe = np.where(diff == 0, 1, diff)
    for m in range(n_sectors):
        a, b = edges[m], edges[m + 1]
        block = (np.exp(1j * diff * b) - np.exp(1j * diff * a)) / (2j * np.pi * safe)
        out[m] = np.where(diff == 0, (b - a) / (2 * np.pi), block)
    return out


def _psd_sqrt(c: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (c + c.conj().T))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def make_circle_clock(k: int, n_sectors: int = 4) -> ClockInstance:
    """Uniform packet on k levels of H|j> = j|j>, read out by sectors of the circle.

    The sector projections do not leave the k-level block invariant, so the
    clock lives in the span of the vectors P_m|j> (dimension n_sectors * k),
    where each sector is an exact coordinate block.  The k-level block embeds
    isometrically via the stacked square roots of the compressed sectors.
    """
    if k < 2 or n_sectors < 2:
        raise ValidationError("circle clock needs k >= 2 and n_sectors >= 2")
    comp = sector_matrices(k, n_sectors)
    embed = np.vstack([_psd_sqrt(c) for c in comp])  # (n k, k), isometry
    h = embed @ np.diag(np.arange(k, dtype=float)) @ embed.conj().T
    h = 0.5 * (h + h.conj().T)
    psi = embed @ (np.ones(k) / math.sqrt(k))
    d = n_sectors * k
    ps = np.zeros((n_sectors, d, d), dtype=complex)
    for m in range(n_sectors):
        ps[m, m * k:(m + 1) * k, m * k:(m + 1) * k] = np.eye(k)
    m = ProjectiveMeasurement(ps, tuple(f"sector{s}" for s in range(n_sectors)))
    return ClockInstance("circle", h, pure_state(psi), m, 2 * math.pi, float(k - 1),
                         params={"k": k, "n_sectors": n_sectors})


def circle_density(phi, t: float, k: int) -> np.ndarray:
    """|psi_t(phi)|^2 of the circle clock packet, for quadrature checks."""
    j = np.arange(k)
    amp = np.exp(1j * np.multiply.outer(np.asarray(phi) - t, j)).sum(axis=-1)
    return np.abs(amp) ** 2 / (2 * np.pi * k)


class RelaxationDynamics:
    """Qubit relaxation |1> -> |0>: populations of |1> decay as exp(-rate t)."""

    def __init__(self, rate: float):
        if not rate > 0:
            raise ValidationError("relaxation rate must be positive")
        self.rate = rate

    def states(self, rho: np.ndarray, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        if np.any(times < 0):
            raise ValidationError("relaxation is only defined forward in time")
        decay = np.exp(-self.rate * times)
        out = np.empty((len(times), 2, 2), dtype=complex)
        out[:, 1, 1] = rho[1, 1] * decay
        out[:, 0, 0] = 1.0 - out[:, 1, 1]
        out[:, 0, 1] = rho[0, 1] * np.sqrt(decay)
        out[:, 1, 0] = np.conj(out[:, 0, 1])
        return out


def make_relaxation_clock(rate: float = 1.0, horizon: float | None = None) -> ClockInstance:
    """Dissipative clock from |1>: rho_t = e^{-rate t}|1><1| + (1 - e^{-rate t})|0><0|."""
    dyn = RelaxationDynamics(rate)
    return ClockInstance("relaxation", dyn, pure_state(KET1), z_basis(2),
                         1.0 / rate if horizon is None else horizon, math.inf, params={"rate": rate})


def phase_basis(dim: int) -> np.ndarray:
    """Columns e_m = sum_j e^{-2 pi i j m / dim} |j> / sqrt(dim)."""
    j = np.arange(dim)
    return np.exp(-2j * np.pi * np.outer(j, j) / dim) / math.sqrt(dim)


def make_spin_rotation_clock(k: int, delta_alpha: float | None = None,
                             horizon: float | None = None) -> ClockInstance:
    """Spin-k/2 rotated about z: generator diag(-k/2, ..., k/2) on C^(k+1).

    Starts from the uniform superposition of all L_z eigenstates and is read
    out in the discrete phase basis (the k + 1 rotated copies of that state).
    ``delta_alpha`` is the angular resolution to be certified, kept in params.
    The default horizon is the full turn 2 pi, except for k = 1: two outcome
    probabilities on a qubit repeat within any full turn, so the qubit clock
    uses the half turn.
    """
    if k < 1:
        raise ValidationError("spin clock needs k >= 1")
    if horizon is None:
        horizon = math.pi if k == 1 else 2 * math.pi
    lz = np.diag(np.arange(k + 1) - k / 2.0).astype(complex)
    psi = np.ones(k + 1) / math.sqrt(k + 1)
    m = measurement_from_basis(phase_basis(k + 1), labels=tuple(f"phase{j}" for j in range(k + 1)))
    params = {"k": k}
    if delta_alpha is not None:
        params["delta_alpha"] = delta_alpha
    return ClockInstance("spin", lz, pure_state(psi), m, horizon, float(k), "angle alpha", params)


@dataclass
class SwitchResult:
    instance: ClockInstance
    t1: float
    t2: float
    completed: bool

    @property
    def delta_t(self) -> float:
        return self.t2 - self.t1 if self.completed else math.inf

    def entropies(self) -> tuple[float, float]:
        s = self.instance.states([self.t1, self.t2])
        return tuple(float(eigvals_entropy(np.linalg.eigvalsh(x))) for x in s)


def _first_crossing(f, times: np.ndarray, values: np.ndarray, level: float, start: int,
                    tol: float) -> tuple[float, int] | None:
    above = values >= level
    idx = np.nonzero(above[start:])[0]
    if len(idx) == 0:
        return None
    i = start + int(idx[0])
    if i == 0:
        return float(times[0]), 0
    lo, hi = float(times[i - 1]), float(times[i])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) >= level:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), i


def make_bit_switch(bandwidth: float = 1.0, rate: float = 0.0, horizon: float = 10 * math.pi,
                    n_grid: int = 4001, tol: float = 1e-9) -> SwitchResult:
    """Dephased qubit switch and its 1/4 -> 3/4 window for the |1> population.

    The window is located on a uniform grid, then refined by bisection on the
    exactly propagated population.  A switch that never reaches 3/4 within
    the horizon is returned with ``completed=False``.
    """
    if not bandwidth > 0:
        raise ValidationError("bandwidth must be positive")
    if rate < 0:
        raise ValidationError("dephasing rate must be >= 0")
    gen = SemigroupGenerator(0.5 * bandwidth * SIGMA_X, z_basis(2), rate)
    inst = ClockInstance("bit_switch", gen, pure_state(KET0), z_basis(2), horizon, bandwidth,
                         params={"bandwidth": bandwidth, "rate": rate})

    def p1(t: float) -> float:
        return float(semigroup_states(gen, inst.rho0, [t])[0, 1, 1].real)

    times = np.linspace(0.0, horizon, n_grid)
    values = inst.probabilities(times)[:, 1]
    first = _first_crossing(p1, times, values, 0.25, 0, tol)
    second = None if first is None else _first_crossing(p1, times, values, 0.75, first[1], tol)
    if second is None:
        t1 = math.nan if first is None else first[0]
        return SwitchResult(inst, t1, math.nan, False)
    return SwitchResult(inst, first[0], second[0], True)


GALLERY = {
    "rabi": (make_rabi_clock, {"bandwidth": 1.0}),
    "circle": (make_circle_clock, {"k": 16, "n_sectors": 4}),
    "relaxation": (make_relaxation_clock, {"rate": 1.0}),
    "spin": (make_spin_rotation_clock, {"k": 2}),
}


CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def make_apparatus_composite(clock: ClockInstance, gamma=None, h_hat=None, u=None,
                             pointer: ProjectiveMeasurement | None = None) -> ClockInstance:
    """Clock (x) apparatus read out through a pre-measurement ``u`` and pointer projections.

    Defaults: qubit apparatus in |0><0| with H_hat = diag(0, 1), u = CNOT with
    the clock as control, pointer read out in the Z basis.  The composite
    evolves under H (x) 1 + 1 (x) H_hat.
    """
    h = clock.hamiltonian
    if h is None or not clock.is_closed:
        raise ValidationError("composite construction needs a Hamiltonian clock")
    gamma = pure_state(KET0) if gamma is None else gamma
    h_hat = np.diag([0.0, 1.0]).astype(complex) if h_hat is None else np.asarray(h_hat, dtype=complex)
    u = CNOT if u is None else u
    pointer = z_basis(h_hat.shape[0]) if pointer is None else pointer
    state, meas = compose_with_apparatus(clock.rho0, gamma, h_hat, u, pointer)
    h_c = np.kron(h, np.eye(h_hat.shape[0])) + np.kron(np.eye(h.shape[0]), h_hat)
    return ClockInstance(f"{clock.name}+apparatus", h_c, state, meas, clock.horizon,
                         energy_bandwidth(h_c, state), clock.parameter_name, dict(clock.params))
