"""Dense complex linear algebra and entropy functionals.

Operators are plain ``numpy`` arrays of shape ``(d, d)``.  Functions that
need a density matrix validate (and clamp) their input through
:func:`as_density_matrix`, which returns a fresh read-only array.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np

HERMITIAN_RTOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
SUPPORT_TOL = 1e-12


class ValidationError(ValueError):
    """Raised when an operator fails a structural check."""


class DomainError(ValueError):
    """Raised when a scalar function is undefined on part of a spectrum."""


class Spectrum(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_operator(a) -> np.ndarray:
    op = np.asarray(a, dtype=complex)
    if op.ndim != 2 or op.shape[0] != op.shape[1] or op.shape[0] == 0:
        raise ValidationError(f"expected a non-empty square matrix, got shape {op.shape}")
    return op


def maxabs(a: np.ndarray) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def asymmetry(a: np.ndarray) -> float:
    """Largest entry of ``|A - A^dagger|``."""
    return maxabs(a - a.conj().T)


def is_hermitian(a) -> bool:
    a = as_operator(a)
    return asymmetry(a) <= HERMITIAN_RTOL * max(1.0, maxabs(a))


def require_hermitian(a, name: str = "operator") -> np.ndarray:
    a = as_operator(a)
    asym = asymmetry(a)
    if asym > HERMITIAN_RTOL * max(1.0, maxabs(a)):
        raise ValidationError(f"{name} is not Hermitian: max asymmetry {asym:.3e}")
    return a


def is_unitary(u, tol: float = 1e-10) -> bool:
    u = as_operator(u)
    return maxabs(u.conj().T @ u - np.eye(u.shape[0])) <= tol


def hermitian_eig(a) -> Spectrum:
    """Eigendecomposition of a Hermitian operator, eigenvalues ascending."""
    a = require_hermitian(a)
    # symmetrize so LAPACK sees an exactly Hermitian input
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return Spectrum(w, v)


def matrix_function(a, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Apply ``f`` to a Hermitian operator through its spectral decomposition.

    ``f`` receives the full eigenvalue vector and must return finite values;
    anything else raises :class:`DomainError`.
    """
    w, v = hermitian_eig(a)
    with np.errstate(all="ignore"):
        fw = np.asarray(f(w))
    if fw.shape != w.shape or not np.all(np.isfinite(fw)):
        bad = w[~np.isfinite(fw)] if fw.shape == w.shape else w
        raise DomainError(f"function undefined at eigenvalue(s) {bad}")
    return (v * fw) @ v.conj().T


def as_density_matrix(rho, name: str = "state") -> np.ndarray:
    """Validate a density matrix and clamp tiny negative eigenvalues.

    Returns the input unchanged (as a complex array) when no eigenvalue needs
    clamping, otherwise the reconstructed clamped matrix.
    """
    rho = require_hermitian(rho, name)
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValidationError(f"{name} has trace {tr.real:.12g}, expected 1")
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    if w[0] < -PSD_TOL:
        raise ValidationError(f"{name} has negative eigenvalue {w[0]:.3e}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        rho = (v * w) @ v.conj().T
    out = np.array(rho, dtype=complex)
    out.flags.writeable = False
    return out


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def entropy_of_probabilities(p) -> np.ndarray | float:
    """Shannon entropy in nats along the last axis, with 0 ln 0 = 0."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return terms.sum(axis=-1)


def eigvals_entropy(w) -> np.ndarray | float:
    """Entropy of (stacks of) eigenvalue vectors, after clamping to zero."""
    w = np.asarray(w, dtype=float)
    return entropy_of_probabilities(np.where(w < 0, 0.0, w))


def von_neumann_entropy(rho) -> float:
    """S(rho) = -tr(rho ln rho) in nats."""
    rho = as_density_matrix(rho)
    w = np.linalg.eigvalsh(rho)
    return float(max(eigvals_entropy(w), 0.0))


def relative_entropy(rho, sigma) -> float:
    """K(rho || sigma) = tr(rho ln rho) - tr(rho ln sigma), or ``inf``.

    Evaluated in the eigenbasis of ``sigma``: the part of ``rho`` outside the
    support of ``sigma`` decides finiteness, the support block carries the
    logarithm.
    """
    rho = as_density_matrix(rho, "rho")
    sigma = as_density_matrix(sigma, "sigma")
    if rho.shape != sigma.shape:
        raise ValidationError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    ws, vs = np.linalg.eigh(sigma)
    rot = vs.conj().T @ rho @ vs
    support = ws > SUPPORT_TOL
    outside = ~support
    if np.any(outside) and maxabs(rot[np.ix_(outside, outside)]) > SUPPORT_TOL:
        return math.inf
    wr = np.linalg.eigvalsh(rho)
    neg_s = -float(eigvals_entropy(wr))  # tr(rho ln rho)
    cross = float(np.real(np.sum(np.diag(rot)[support] * np.log(ws[support]))))
    return max(neg_s - cross, 0.0)


def trace_norm(a) -> float:
    """Sum of absolute eigenvalues of a Hermitian operator."""
    a = require_hermitian(a)
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (a + a.conj().T)))))


def tensor(a, b) -> np.ndarray:
    return np.kron(as_operator(a), as_operator(b))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_hermitian(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return scale * 0.5 * (z + z.conj().T)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = d if rank is None else rank
    z = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


def random_pure_state(d: int, rng: np.random.Generator) -> np.ndarray:
    return random_density_matrix(d, rng, rank=1)
