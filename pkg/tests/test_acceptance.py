"""Acceptance criteria, one test each, at the stated tolerances.

Every test prints a single ``ACCEPTANCE <id> PASS|FAIL: ...`` line.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import quad

from clockentropy.bounds import (
    average_entropy_increase,
    grid_candidates,
    min_resolution,
    theorem1_audit,
    theorem1_bound,
    theorem2_audit,
    switch_bound,
)
from clockentropy.dynamics import SemigroupGenerator, energy_bandwidth, hamiltonian_states, semigroup_propagate, unitary
from clockentropy.gallery import (
    GALLERY,
    make_apparatus_composite,
    make_bit_switch,
    make_circle_clock,
    make_rabi_clock,
    make_relaxation_clock,
    make_spin_rotation_clock,
)
from clockentropy.linalg import (
    random_density_matrix,
    random_hermitian,
    random_pure_state,
    random_unitary,
    relative_entropy,
    trace_norm,
)
from clockentropy.measurement import dephase, entropy_increase, lueders_update, measurement_from_basis, z_basis
from clockentropy.tightness import SearchConfig, minimize

pytestmark = pytest.mark.acceptance

CIRCLE_KS = (8, 16, 32, 64)


def report(capsys, ident, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE {ident} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def random_measurement(d, rng):
    n = int(rng.integers(2, d + 1))
    cuts = np.sort(rng.choice(np.arange(1, d), size=n - 1, replace=False))
    return measurement_from_basis(random_unitary(d, rng), np.diff(np.concatenate([[0], cuts, [d]])))


def corpus(seed=2024, size=500):
    rng = np.random.default_rng(seed)
    for i in range(size):
        d = int(rng.integers(2, 9))
        rho = [random_pure_state, random_density_matrix][i % 2](d, rng)
        yield rho, random_measurement(d, rng), rng


@pytest.fixture(scope="module")
def circle_averages():
    start = time.perf_counter()
    out = {}
    for k in CIRCLE_KS:
        clock = make_circle_clock(k)
        out[k] = (clock, theorem1_audit(clock, math.pi))
    return out, start


def test_1_entropy_equals_relative_entropy(capsys):
    start = time.perf_counter()
    worst, n = 0.0, 0
    for rho, m, _ in corpus():
        k = relative_entropy(rho, lueders_update(m, rho))
        worst = max(worst, abs(entropy_increase(m, rho, "dense") - k))
        n += 1
    elapsed = time.perf_counter() - start
    report(capsys, "1", n >= 500 and worst <= 1e-8 and elapsed < 30,
           f"{n} pairs, max |dS - K| = {worst:.2e} (tol 1e-8), {elapsed:.2f} s (< 30 s)")


def test_2_pinsker(capsys):
    violations, worst = 0, math.inf
    for rho, m, _ in corpus():
        slack = entropy_increase(m, rho, "dense") - 0.5 * trace_norm(rho - lueders_update(m, rho)) ** 2
        worst = min(worst, slack)
        violations += slack < -1e-8
    report(capsys, "2", violations == 0, f"{violations} violations over 500 pairs, min slack {worst:.3e}")


def test_3_disturbance_rate_bound(capsys):
    rng = np.random.default_rng(77)
    violations, checked = 0, 0
    for i in range(500):
        d = int(rng.integers(2, 9))
        h = random_hermitian(d, rng)
        rho = [random_pure_state, random_density_matrix][i % 2](d, rng)
        m = random_measurement(d, rng)
        de = energy_bandwidth(h, rho)
        states = hamiltonian_states(h, rho, rng.uniform(0, 2 * math.pi, 10))
        ops = np.array([1j * (h @ p - p @ h) for p in m.projections])
        rate = np.abs(np.einsum("jab,tba->tj", ops, states).real).sum(axis=1)
        diff = states - dephase(m.projections, states)
        dist = np.abs(np.linalg.eigvalsh(diff)).sum(axis=1)
        violations += int(np.sum(dist < rate / de - 1e-8))
        checked += len(rate)
    rabi = make_rabi_clock()
    times = np.linspace(0, rabi.horizon, 201)
    gap = np.max(np.abs(rabi.disturbance(times, "dense") - np.abs(rabi.rates(times)).sum(axis=1) / 1.0))
    report(capsys, "3", violations == 0 and gap <= 1e-9,
           f"{violations} violations over {checked} points; Rabi equality gap {gap:.2e} (tol 1e-9)")


def test_4_rate_cap(capsys):
    instances = [ctor(**kw) for ctor, kw in GALLERY.values()]
    instances += [make_circle_clock(k) for k in CIRCLE_KS] + [make_spin_rotation_clock(k) for k in (1, 2, 4)]
    instances += [make_rabi_clock(3.0), make_apparatus_composite(make_rabi_clock())]
    worst, bounds_ok = -math.inf, True
    for clock in instances:
        if clock.hamiltonian is None:
            continue
        rate = np.abs(clock.rates(np.linspace(0, clock.horizon, 501))).sum(axis=1)
        worst = max(worst, float(rate.max() - clock.declared_bandwidth))
        audit = theorem1_audit(clock, resolution_points=1025)
        if audit.certificate is not None and audit.certificate.delta_t * audit.bandwidth >= 1:
            bounds_ok &= audit.report.right_side <= 0.5
    report(capsys, "4", worst <= 1e-8 and bounds_ok,
           f"max(||p'||_1 - dE) = {worst:.2e} over {len(instances)} instances; bound <= 1/2: {bounds_ok}")


def test_5_rabi_average(capsys):
    start = time.perf_counter()
    clock = make_rabi_clock(1.0)
    audit = theorem1_audit(clock, math.pi)
    elapsed = time.perf_counter() - start

    def h2(p):
        return 0.0 if p <= 0 or p >= 1 else -p * math.log(p) - (1 - p) * math.log(1 - p)

    oracle = quad(lambda t: h2(math.sin(t / 2) ** 2), 0, math.pi, epsabs=1e-13)[0] / math.pi
    mean = audit.average.value
    ok = (audit.certificate.satisfied and mean >= 1 / (2 * math.pi**2) and abs(mean - oracle) <= 1e-6
          and elapsed < 5)
    report(capsys, "5", ok, f"mean dS = {mean:.10f}, oracle {oracle:.10f}, bound {1 / (2 * math.pi ** 2):.6f}, "
                            f"{elapsed:.2f} s")


def test_6a_circle_bound(capsys, circle_averages):
    audits, _ = circle_averages
    lines = []
    ok = True
    for k, (clock, audit) in audits.items():
        ok &= (audit.report.verdict == "holds" and audit.bandwidth == pytest.approx(k - 1, abs=1e-9)
               and audit.certificate.delta_t == math.pi)
        lines.append(f"k={k}: {audit.report.left_side:.5f} >= {audit.report.right_side:.3e} "
                     f"(min TV {audit.certificate.min_total_variation:.3f})")
    report(capsys, "6a", ok, "; ".join(lines))


def test_6b_circle_decay_rate(capsys, circle_averages):
    audits, start = circle_averages
    means = [audits[k][1].average.value for k in CIRCLE_KS]
    slopes = [math.log2(b / a) for a, b in zip(means, means[1:])]
    decreasing = all(b < a for a, b in zip(means, means[1:]))
    in_window = all(-2.6 <= s <= -1.6 for s in slopes)
    elapsed = time.perf_counter() - start
    report(capsys, "6b", decreasing and in_window and elapsed < 120,
           f"means {[round(x, 5) for x in means]}, strictly decreasing: {decreasing}, "
           f"log2 slopes {[round(s, 3) for s in slopes]} (window [-2.6, -1.6])")


def test_6c_circle_dense_vs_fast(capsys):
    worst = 0.0
    for k in (8, 16):
        clock = make_circle_clock(k)
        times = np.linspace(0, 2 * math.pi, 64)
        worst = max(worst, float(np.max(np.abs(clock.entropy_increase(times, "dense")
                                              - clock.entropy_increase(times, "pure")))))
    report(capsys, "6c", worst <= 1e-8, f"max |dense - fast| = {worst:.2e} at k <= 16")


def test_7_relaxation_counterexample(capsys):
    clock = make_relaxation_clock(1.0)
    times = np.linspace(0, clock.horizon, 1025)
    ds = np.max(np.abs(clock.entropy_increase(times, "dense")))
    res = min_resolution(clock.probabilities(times), times, grid_candidates(times))
    report(capsys, "7", ds <= 1e-12 and math.isfinite(res), f"max dS = {ds:.1e}, min resolution = {res:.4f}")


def test_8_composite(capsys):
    clock = make_rabi_clock()
    base = theorem2_audit(clock.hamiltonian, clock.rho0, make_apparatus_composite(clock))
    scaled = theorem2_audit(clock.hamiltonian, clock.rho0,
                            make_apparatus_composite(clock, h_hat=1e3 * np.diag([0.0, 1.0])))
    invariant = (abs(base.report.left_side - scaled.report.left_side) <= 1e-9
                 and base.report.right_side == scaled.report.right_side
                 and base.certificate.delta_t == scaled.certificate.delta_t)
    ok = base.report.verdict == "holds" and base.bandwidth == 1.0 and invariant
    report(capsys, "8", ok, f"{base.report.left_side:.6f} >= {base.report.right_side:.6f} with clock dE "
                            f"{base.bandwidth}; invariant under H_hat x 1e3: {invariant}")


def test_9_bit_switch(capsys):
    parts, ok = [], True
    limit = make_bit_switch(1.0, 0.0)
    ok &= abs(limit.delta_t - math.pi / 3) <= 1e-3
    for rate in (1e-3, 1e-2):
        res = make_bit_switch(1.0, rate)
        s1, s2 = res.entropies()
        bound = switch_bound(rate, res.delta_t, 1.0)
        ok &= res.completed and s2 - s1 >= bound - 1e-8
        parts.append(f"rate {rate}: dS {s2 - s1:.5f} >= {bound:.5f}, dt {res.delta_t:.5f}")
    ok &= abs(make_bit_switch(1.0, 1e-3).delta_t - math.pi / 3) <= 1e-3
    sweep = [make_bit_switch(1.0, r) for r in (0.1, 1.0, 10.0, 100.0)]
    windows = [r.delta_t for r in sweep]
    ok &= all(b >= a for a, b in zip(windows, windows[1:])) and not sweep[-1].completed
    report(capsys, "9", ok, f"rate 0 dt {limit.delta_t:.6f}; " + "; ".join(parts)
           + f"; Zeno windows {windows}")


def test_10_spin_clock(capsys):
    parts, ok = [], True
    for k in (1, 2, 4):
        clock = make_spin_rotation_clock(k)
        audit = theorem1_audit(clock)
        relabeled = theorem1_audit(clock.relabel("time t"))
        da = audit.certificate.delta_t
        ok &= audit.report.verdict == "holds"
        ok &= audit.report.right_side == pytest.approx(1 / (2 * (k * da) ** 2), rel=1e-14)
        ok &= (relabeled.report.left_side, relabeled.report.right_side, relabeled.certificate.delta_t) == \
              (audit.report.left_side, audit.report.right_side, da)
        parts.append(f"k={k}: d_alpha {da:.4f}, mean {audit.report.left_side:.4f} >= {audit.report.right_side:.4f}")
    report(capsys, "10", ok, "; ".join(parts) + "; relabeled runs identical")


def test_11_semigroup(capsys):
    gen = SemigroupGenerator(np.zeros((2, 2)), z_basis(), 0.9)
    rho = np.array([[0.5, 0.3 - 0.2j], [0.3 + 0.2j, 0.5]])
    decay = max(abs(semigroup_propagate(gen, rho, t)[0, 1] - rho[0, 1] * math.exp(-0.9 * t))
                for t in np.linspace(0, 8, 33))
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(10):
        h = random_hermitian(2, rng)
        h = 0.5 * h / np.linalg.norm(h, 2)
        g = SemigroupGenerator(h, measurement_from_basis(random_unitary(2, rng)), 0.1)
        r0 = random_density_matrix(2, rng)
        # the oracle's own first-order error grows like rate * t * delta; keep it well below 1e-6
        t = 0.5
        delta = t / 2**14
        u = unitary(h, delta)
        step_u = np.kron(u, u.conj())
        deph = sum(np.kron(p, p.T) for p in g.dephasing.projections)
        step = (1 - g.rate * delta) * step_u + g.rate * delta * deph @ step_u
        for _ in range(14):
            step = step @ step
        oracle = (step @ r0.reshape(-1)).reshape(2, 2)
        worst = max(worst, float(np.max(np.abs(semigroup_propagate(g, r0, t) - oracle))))
    report(capsys, "11", decay <= 1e-9 and worst <= 1e-6,
           f"coherence decay error {decay:.1e} (tol 1e-9); product-formula gap {worst:.1e} (tol 1e-6, "
           f"rate 0.1, |H| 1/2, t 1/2)")


def test_12_tightness(capsys):
    clock = make_rabi_clock()
    bound = theorem1_bound(math.pi, 1.0)
    one = minimize(clock, SearchConfig(delta_t=math.pi, restarts=1, rng_seed=3))
    again = minimize(clock, SearchConfig(delta_t=math.pi, restarts=1, rng_seed=3))
    eight = minimize(clock, SearchConfig(delta_t=math.pi, restarts=8, rng_seed=3))
    feasible = [e for r in (one, eight) for e in r.trace if e.feasible]
    respects = all(e.mean_entropy >= bound - 1e-8 for e in feasible)
    identical = ([(e.objective, e.mean_entropy, e.min_tv) for e in one.trace]
                 == [(e.objective, e.mean_entropy, e.min_tv) for e in again.trace])
    ok = respects and identical and eight.mean_entropy <= one.mean_entropy and len(feasible) > 0
    report(capsys, "12", ok, f"{len(feasible)} feasible iterates all >= {bound:.6f}: {respects}; "
                            f"bit-identical: {identical}; 8 restarts {eight.mean_entropy:.10f} <= "
                            f"1 restart {one.mean_entropy:.10f}")
