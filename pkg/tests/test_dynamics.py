import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm as scipy_expm

from clockentropy.dynamics import (
    SemigroupGenerator,
    Trajectory,
    energy_bandwidth,
    evolve,
    expm,
    propagate,
    rescale_hamiltonian,
    sample_orbit,
    semigroup_propagate,
    spectral_measure,
    unitary,
)
from clockentropy.gallery import make_circle_clock
from clockentropy.linalg import (
    ValidationError,
    pure_state,
    random_density_matrix,
    random_hermitian,
    random_unitary,
    von_neumann_entropy,
)
from clockentropy.measurement import lueders_update, measurement_from_basis, z_basis
from conftest import seeds

SX = np.array([[0, 1], [1, 0]], dtype=complex)
KET0 = pure_state([1, 0])


def product_formula(gen, rho, t, levels=14):
    """((1 - rate d) U_d + rate d G U_d)^(t/d) with d = t / 2**levels, by repeated squaring."""
    d = gen.dim
    delta = t / 2**levels
    u = unitary(gen.hamiltonian, delta)
    step_u = np.kron(u, u.conj())
    g = sum(np.kron(p, p.T) for p in gen.dephasing.projections)
    step = (1 - gen.rate * delta) * step_u + gen.rate * delta * g @ step_u
    for _ in range(levels):
        step = step @ step
    return (step @ rho.reshape(-1)).reshape(d, d)


def test_propagate_examples(rng):
    rho = random_density_matrix(3, rng)
    np.testing.assert_array_equal(propagate(random_hermitian(3, rng), rho, 0.0), rho)
    for t in np.linspace(0, 7, 15):
        p1 = propagate(SX / 2, KET0, t)[1, 1].real
        assert p1 == pytest.approx(math.sin(t / 2) ** 2, abs=1e-13)
    h = np.diag([0.0, 1.0, 3.0])
    stationary = np.diag([0.2, 0.3, 0.5])
    np.testing.assert_allclose(propagate(h, stationary, 2.3), stationary, atol=1e-14)


def test_propagate_matches_scipy(rng):
    h, rho = random_hermitian(4, rng), random_density_matrix(4, rng)
    u = scipy_expm(-1j * h * 1.3)
    np.testing.assert_allclose(propagate(h, rho, 1.3), u @ rho @ u.conj().T, atol=1e-12)


@given(seeds, st.floats(0, 5), st.floats(0, 5))
def test_group_law(seed, s, t):
    rng = np.random.default_rng(seed)
    h, rho = random_hermitian(3, rng), random_density_matrix(3, rng)
    np.testing.assert_allclose(propagate(h, rho, s + t), propagate(h, propagate(h, rho, s), t), atol=1e-9)


def test_spectral_measure_examples(rng):
    atoms = spectral_measure(np.diag([0.0, 1.0, 2.0]), np.diag([0.5, 0.0, 0.5])).atoms
    assert [(a.energy, a.weight) for a in atoms] == [(0.0, 0.5), (1.0, 0.0), (2.0, 0.5)]
    single = spectral_measure(np.diag([0.0, 1.0, 2.0]), pure_state([0, 1, 0])).atoms
    assert [a.weight for a in single if a.weight > 0] == [1.0]
    degenerate = spectral_measure(np.diag([1.0, 1.0, 2.0]), np.eye(3) / 3).atoms
    assert [(a.rank, round(a.weight, 12)) for a in degenerate] == [(2, round(2 / 3, 12)), (1, round(1 / 3, 12))]


@given(seeds)
def test_spectral_measure_invariant_along_orbit(seed):
    rng = np.random.default_rng(seed)
    h, rho = random_hermitian(4, rng), random_density_matrix(4, rng)
    a, b = spectral_measure(h, rho), spectral_measure(h, propagate(h, rho, 1.7))
    np.testing.assert_allclose(a.energies, b.energies, atol=1e-10)
    np.testing.assert_allclose(a.weights, b.weights, atol=1e-10)
    assert energy_bandwidth(h, rho) == pytest.approx(energy_bandwidth(h, propagate(h, rho, 1.7)), abs=1e-10)


def test_bandwidth_examples():
    assert energy_bandwidth(np.diag([0.0, 1.0, 2.0]), np.diag([0.5, 0.0, 0.5])) == 2.0
    assert energy_bandwidth(SX / 2, KET0) == pytest.approx(1.0, abs=1e-14)
    for k in (4, 8):
        clock = make_circle_clock(k)
        assert energy_bandwidth(clock.hamiltonian, clock.rho0) == pytest.approx(k - 1, abs=1e-9)


def test_rescale_examples(rng):
    np.testing.assert_allclose(rescale_hamiltonian(np.diag([5.0, 6.0]), np.eye(2) / 2),
                               np.diag([-0.5, 0.5]), atol=1e-14)
    h = np.diag([0.0, 1.0, 2.0, 99.0]).astype(complex)
    psi = np.array([1, 1, 1, 0]) / math.sqrt(3)
    rho = pure_state(psi)
    h2 = rescale_hamiltonian(h, rho)
    assert np.linalg.norm(h2, 2) <= 1 + 1e-12
    for t in np.linspace(0.1, 5, 10):
        np.testing.assert_allclose(propagate(h2, rho, t), propagate(h, rho, t), atol=1e-10)
    a = random_hermitian(3, rng)
    centered = a - np.eye(3) * 0.5 * (np.linalg.eigvalsh(a)[0] + np.linalg.eigvalsh(a)[-1])
    full = random_density_matrix(3, rng)
    np.testing.assert_allclose(rescale_hamiltonian(centered, full), centered, atol=1e-12)


def test_rescale_rejects_stationary():
    with pytest.raises(ValidationError, match="stationary"):
        rescale_hamiltonian(np.diag([0.0, 1.0]), KET0)


@given(seeds)
def test_rescaled_norm_is_half_bandwidth(seed):
    rng = np.random.default_rng(seed)
    h, rho = random_hermitian(4, rng, scale=3), random_density_matrix(4, rng, rank=2)
    assert np.linalg.norm(rescale_hamiltonian(h, rho), 2) <= 0.5 * energy_bandwidth(h, rho) + 1e-9


def test_own_expm_matches_scipy(rng):
    for scale in (1e-3, 0.3, 3.0, 40.0):
        a = scale * (rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5)))
        ref = scipy_expm(a)
        assert np.max(np.abs(expm(a) - ref)) <= 1e-11 * max(1.0, np.max(np.abs(ref)))
    np.testing.assert_allclose(expm(np.zeros((3, 3))), np.eye(3), atol=1e-15)


def test_semigroup_closed_limit(rng):
    h, rho = random_hermitian(3, rng), random_density_matrix(3, rng)
    gen = SemigroupGenerator(h, measurement_from_basis(random_unitary(3, rng)), 0.0)
    for t in (0.3, 2.0, 9.0):
        np.testing.assert_allclose(semigroup_propagate(gen, rho, t), propagate(h, rho, t), atol=1e-9)


def test_semigroup_dephasing_decay():
    gen = SemigroupGenerator(np.zeros((2, 2)), z_basis(), 0.7)
    rho = np.full((2, 2), 0.5, dtype=complex)
    for t in np.linspace(0, 6, 13):
        out = semigroup_propagate(gen, rho, t)
        assert out[0, 1] == pytest.approx(0.5 * math.exp(-0.7 * t), abs=1e-9)
        assert out[0, 0].real == pytest.approx(0.5, abs=1e-12)


def test_semigroup_validation():
    with pytest.raises(ValidationError):
        SemigroupGenerator(SX, z_basis(), -1.0)
    gen = SemigroupGenerator(SX, z_basis(), 1.0)
    with pytest.raises(ValidationError, match="forward"):
        semigroup_propagate(gen, KET0, -0.1)


def test_superoperator_matches_apply(rng):
    gen = SemigroupGenerator(random_hermitian(3, rng), measurement_from_basis(random_unitary(3, rng), [1, 2]), 0.4)
    rho = random_density_matrix(3, rng)
    np.testing.assert_allclose((gen.superoperator() @ rho.reshape(-1)).reshape(3, 3), gen.apply(rho), atol=1e-13)


@given(seeds, st.floats(0, 3), st.floats(0, 3))
def test_semigroup_law(seed, s, t):
    rng = np.random.default_rng(seed)
    gen = SemigroupGenerator(random_hermitian(3, rng), measurement_from_basis(random_unitary(3, rng)), 0.8)
    rho = random_density_matrix(3, rng)
    np.testing.assert_allclose(semigroup_propagate(gen, rho, s + t),
                               semigroup_propagate(gen, semigroup_propagate(gen, rho, s), t), atol=1e-8)


def test_product_formula_oracle_small_rate(rng):
    """Plain first-order oracle where its own O(rate t delta) error is below the tolerance."""
    for _ in range(10):
        h = random_hermitian(2, rng)
        h = 0.5 * h / np.linalg.norm(h, 2)
        gen = SemigroupGenerator(h, measurement_from_basis(random_unitary(2, rng)), 0.1)
        rho = random_density_matrix(2, rng)
        assert np.max(np.abs(semigroup_propagate(gen, rho, 0.5) - product_formula(gen, rho, 0.5))) <= 1e-6


def test_product_formula_oracle_extrapolated(rng):
    """Richardson-extrapolated oracle covers strong dephasing and long times."""
    for rate in (0.5, 1.0, 5.0):
        h = random_hermitian(2, rng)
        gen = SemigroupGenerator(h, measurement_from_basis(random_unitary(2, rng)), rate)
        rho = random_density_matrix(2, rng)
        t = 2.0
        oracle = 2 * product_formula(gen, rho, t, 14) - product_formula(gen, rho, t, 13)
        assert np.max(np.abs(semigroup_propagate(gen, rho, t) - oracle)) <= 1e-6


def test_dephasing_preserves_outcome_populations(rng):
    gen = SemigroupGenerator(np.zeros((3, 3)), z_basis(3), 2.0)
    rho = random_density_matrix(3, rng)
    out = semigroup_propagate(gen, rho, 50.0)
    np.testing.assert_allclose(out, lueders_update(z_basis(3), rho), atol=1e-12)


def test_sample_orbit(rng):
    h, rho = random_hermitian(3, rng), random_density_matrix(3, rng)
    traj = sample_orbit(h, rho, 4.0, 2)
    np.testing.assert_array_equal(traj.times, [0.0, 4.0])
    traj = sample_orbit(h, rho, 4.0, 41)
    ent = [von_neumann_entropy(s) for s in traj.states]
    assert np.ptp(ent) <= 1e-9
    gen = SemigroupGenerator(np.zeros((2, 2)), z_basis(), 1.0)
    traj = sample_orbit(gen, np.full((2, 2), 0.5), 5.0, 51)
    ent = np.array([von_neumann_entropy(s) for s in traj.states])
    assert np.all(np.diff(ent) >= -1e-12)
    with_p = sample_orbit(h, rho, 4.0, 5, z_basis(3))
    assert with_p.states is None and with_p.probabilities.shape == (5, 3)


def test_trajectory_validation():
    with pytest.raises(ValidationError):
        Trajectory(np.array([0.0]))
    with pytest.raises(ValidationError):
        Trajectory(np.array([0.0, 1.0, 1.0]))
    with pytest.raises(ValidationError):
        sample_orbit(SX, KET0, 1.0, 1)


def test_evolve_dispatch(rng):
    h, rho = random_hermitian(2, rng), random_density_matrix(2, rng)
    times = [0.0, 0.5, 1.0]
    np.testing.assert_allclose(evolve(h, rho, times)[2], propagate(h, rho, 1.0), atol=1e-13)
    gen = SemigroupGenerator(h, z_basis(), 0.0)
    np.testing.assert_allclose(evolve(gen, rho, times), evolve(h, rho, times), atol=1e-10)
