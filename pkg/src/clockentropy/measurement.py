"""Projective measurements, non-selective (Lueders) updates and entropy increase."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linalg import (
    ValidationError,
    as_density_matrix,
    as_operator,
    commutator,
    entropy_of_probabilities,
    eigvals_entropy,
    is_unitary,
    maxabs,
    require_hermitian,
    tensor,
)

PROJECTION_TOL = 1e-10
PURE_TOL = 1e-12


@dataclass(frozen=True)
class ProjectiveMeasurement:
    """Complete family of mutually orthogonal projections.

    ``projections`` is stored as one array of shape ``(J, d, d)``.
    """

    projections: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        ps = np.array(self.projections, dtype=complex)
        if ps.ndim != 3 or ps.shape[1] != ps.shape[2] or ps.shape[0] == 0:
            raise ValidationError(f"projections must have shape (J, d, d), got {ps.shape}")
        labels = tuple(str(x) for x in self.labels) or tuple(str(j) for j in range(ps.shape[0]))
        if len(labels) != ps.shape[0]:
            raise ValidationError(f"{len(labels)} labels for {ps.shape[0]} projections")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"duplicate outcome labels {labels}")
        d = ps.shape[1]
        for j, p in enumerate(ps):
            require_hermitian(p, f"projection {labels[j]}")
            err = maxabs(p @ p - p)
            if err > PROJECTION_TOL:
                raise ValidationError(f"projection {labels[j]} not idempotent: |P^2 - P| = {err:.3e}")
        for i in range(len(ps)):
            for j in range(i + 1, len(ps)):
                err = maxabs(ps[i] @ ps[j])
                if err > PROJECTION_TOL:
                    raise ValidationError(
                        f"projections {labels[i]} and {labels[j]} not orthogonal: |P_i P_j| = {err:.3e}"
                    )
        err = maxabs(ps.sum(axis=0) - np.eye(d))
        if err > PROJECTION_TOL:
            raise ValidationError(f"projections incomplete: |sum P_j - 1| = {err:.3e}")
        ps.flags.writeable = False
        object.__setattr__(self, "projections", ps)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.projections.shape[1]

    def __len__(self) -> int:
        return self.projections.shape[0]

    def argmax(self, p) -> str:
        """Label of the most likely outcome; ties go to the smallest label."""
        p = np.asarray(p)
        best = np.max(p)
        return min(lab for lab, q in zip(self.labels, p) if q == best)


def measurement_from_basis(u, partition: Sequence[int] | None = None, labels=None) -> ProjectiveMeasurement:
    """Projections onto consecutive groups of columns of the unitary ``u``."""
    u = as_operator(u)
    d = u.shape[0]
    partition = [1] * d if partition is None else list(partition)
    if sum(partition) != d or min(partition) < 1:
        raise ValidationError(f"partition {partition} does not split dimension {d}")
    ps, start = [], 0
    for r in partition:
        cols = u[:, start:start + r]
        ps.append(cols @ cols.conj().T)
        start += r
    return ProjectiveMeasurement(np.array(ps), tuple(labels or ()))


def z_basis(d: int = 2) -> ProjectiveMeasurement:
    return measurement_from_basis(np.eye(d))


def _check_dims(m: ProjectiveMeasurement, rho: np.ndarray):
    if rho.shape[-1] != m.dim:
        raise ValidationError(f"dimension mismatch: measurement acts on {m.dim}, state has {rho.shape[-1]}")


def outcome_distribution(m: ProjectiveMeasurement, rho) -> np.ndarray:
    """Outcome probabilities p_j = tr(P_j rho), clamped to [0, 1]."""
    rho = as_density_matrix(rho)
    _check_dims(m, rho)
    return outcome_probabilities(m, rho)


def outcome_probabilities(m: ProjectiveMeasurement, states: np.ndarray) -> np.ndarray:
    """Unvalidated, batched ``tr(P_j rho)`` over a trailing ``(d, d)`` axis pair."""
    p = np.einsum("jab,...ba->...j", m.projections, states).real
    return np.clip(p, 0.0, 1.0)


def lueders_update(m: ProjectiveMeasurement, rho) -> np.ndarray:
    """Post-measurement state sum_j P_j rho P_j with the outcome ignored."""
    rho = as_density_matrix(rho)
    _check_dims(m, rho)
    return as_density_matrix(dephase(m.projections, rho), "post-measurement state")


def dephase(ps: np.ndarray, states: np.ndarray) -> np.ndarray:
    out = ps[0] @ states @ ps[0]
    for p in ps[1:]:
        out = out + p @ states @ p
    return out


def is_pure(rho: np.ndarray) -> bool:
    return np.linalg.eigvalsh(rho)[-1] >= 1.0 - PURE_TOL


def pure_disturbance(p) -> np.ndarray | float:
    """Trace norm of rho - rho~ for a pure rho with outcome distribution ``p``.

    In the orthonormal basis P_j psi / sqrt(p_j) the state is the rank-one
    projector onto sqrt(p) and its update is diag(p).
    """
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    s = np.sqrt(p)
    diff = s[..., :, None] * s[..., None, :] - p[..., :, None] * np.eye(p.shape[-1])
    return np.abs(np.linalg.eigvalsh(diff)).sum(axis=-1)


def entropy_increase(m: ProjectiveMeasurement, rho, method: str = "auto") -> float:
    """S(rho~) - S(rho) for the non-selective update rho~.

    ``method`` is ``"dense"``, ``"pure"`` or ``"auto"`` (pure path whenever
    rho has rank one).
    """
    rho = as_density_matrix(rho)
    _check_dims(m, rho)
    if method == "pure" or (method == "auto" and is_pure(rho)):
        return float(entropy_of_probabilities(outcome_probabilities(m, rho)))
    if method not in ("dense", "auto"):
        raise ValueError(f"unknown method {method!r}")
    after = np.linalg.eigvalsh(dephase(m.projections, rho))
    before = np.linalg.eigvalsh(rho)
    return float(eigvals_entropy(after) - eigvals_entropy(before))


def disturbance(m: ProjectiveMeasurement, rho, method: str = "auto") -> float:
    """Trace norm of rho - rho~."""
    rho = as_density_matrix(rho)
    _check_dims(m, rho)
    if method == "pure" or (method == "auto" and is_pure(rho)):
        return float(pure_disturbance(outcome_probabilities(m, rho)))
    diff = rho - dephase(m.projections, rho)
    return float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


class DephasingMap:
    """The superoperator gamma -> sum_j P_j gamma P_j as a reusable handle."""

    def __init__(self, m: ProjectiveMeasurement):
        self.measurement = m

    @property
    def dim(self) -> int:
        return self.measurement.dim

    def __call__(self, gamma) -> np.ndarray:
        gamma = as_operator(gamma)
        _check_dims(self.measurement, gamma)
        return dephase(self.measurement.projections, gamma)

    def matrix(self) -> np.ndarray:
        """Row-major vectorization: vec(P X P) = (P kron P^T) vec(X)."""
        ps = self.measurement.projections
        return sum(np.kron(p, p.T) for p in ps)


def dephasing_map(m: ProjectiveMeasurement) -> DephasingMap:
    return DephasingMap(m)


def compose_with_apparatus(rho, gamma, h_hat, u, q: ProjectiveMeasurement, stationarity_tol: float = 1e-9):
    """Reduce a pre-measurement ``u`` plus pointer readout ``q`` to a clock measurement.

    Returns the product state rho (x) gamma and the projections
    u^dagger (1 (x) Q_j) u on the composite space.
    """
    rho = as_density_matrix(rho, "clock state")
    gamma = as_density_matrix(gamma, "apparatus state")
    h_hat = require_hermitian(h_hat, "apparatus Hamiltonian")
    u = as_operator(u)
    if h_hat.shape != gamma.shape or q.dim != gamma.shape[0]:
        raise ValidationError("apparatus state, Hamiltonian and pointer measurement must share a dimension")
    comm = maxabs(commutator(gamma, h_hat))
    if comm > stationarity_tol:
        raise ValidationError(f"apparatus state is not stationary: |[gamma, H_hat]| = {comm:.3e}")
    dim = rho.shape[0] * gamma.shape[0]
    if u.shape != (dim, dim) or not is_unitary(u):
        raise ValidationError("pre-measurement u must be a unitary on the composite space")
    one = np.eye(rho.shape[0])
    ps = np.array([u.conj().T @ tensor(one, qj) @ u for qj in q.projections])
    return tensor(rho, gamma), ProjectiveMeasurement(ps, q.labels)
