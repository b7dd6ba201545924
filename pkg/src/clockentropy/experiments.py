"""Experiment runners behind the command line: one function per experiment kind."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .bounds import (
    BoundReport,
    average_entropy_increase,
    resolution_scan,
    theorem1_audit,
    theorem2_audit,
    switch_bound,
)
from .dynamics import energy_bandwidth, hamiltonian_states
from .gallery import (
    CNOT,
    make_apparatus_composite,
    make_bit_switch,
    make_circle_clock,
    make_rabi_clock,
    make_relaxation_clock,
    make_spin_rotation_clock,
)
from .io import instance_to_json, matrix_from_json, matrix_to_json
from .linalg import (
    eigvals_entropy,
    random_density_matrix,
    random_hermitian,
    random_pure_state,
    random_unitary,
    relative_entropy,
    pure_state,
)
from .measurement import (
    dephase,
    measurement_from_basis,
    z_basis,
)
from .tightness import SearchConfig, minimize


BOLTZMANN = 1.380649e-23  # J/K, exact


def report_si(entropy: float, temperature_k: float) -> float:
    """Heat in joules dissipated by an entropy increase (nats) at the given temperature."""
    if not temperature_k > 0:
        raise ValueError(f"temperature must be positive, got {temperature_k}")
    return entropy * BOLTZMANN * temperature_k


class NonConvergence(RuntimeError):
    """A quadrature or search did not reach its tolerance."""


@dataclass
class RunReport:
    config: dict
    reports: list[BoundReport] = field(default_factory=list)
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    nonconverged: list[str] = field(default_factory=list)
    version: str = __version__
    wall_clock: float = 0.0

    @property
    def verdict(self) -> str:
        return "violated" if any(r.verdict == "violated" for r in self.reports) else "holds"


def build_clock(params: dict):
    name = params["name"]
    if name == "rabi":
        return make_rabi_clock(params.get("bandwidth", 1.0))
    if name == "circle":
        return make_circle_clock(params.get("k", 16), params.get("n_sectors", 4))
    if name == "relaxation":
        return make_relaxation_clock(params.get("rate", 1.0), params.get("horizon"))
    if name == "spin":
        return make_spin_rotation_clock(params.get("k", 2), params.get("delta_alpha"), params.get("horizon"))
    raise ValueError(f"unknown clock {name!r}")


def _retol(report: BoundReport, tol: float) -> BoundReport:
    return replace(report, tolerance=tol, verdict="" if report.verdict != "inapplicable" else report.verdict)


def _worst(name: str, anchor: str, lefts, rights, tol: float, **inputs) -> BoundReport:
    lefts, rights = np.asarray(lefts, dtype=float), np.asarray(rights, dtype=float)
    slack = lefts - rights
    i = int(np.argmin(slack))
    inputs.update(samples=int(slack.size), violations=int(np.sum(slack < -tol)), worst_index=i)
    return BoundReport(name, anchor, lefts[i], rights[i], inputs, tolerance=tol)


def _random_measurement(d: int, rng: np.random.Generator):
    n_out = int(rng.integers(2, d + 1))
    cuts = np.sort(rng.choice(np.arange(1, d), size=n_out - 1, replace=False))
    partition = np.diff(np.concatenate([[0], cuts, [d]])).tolist()
    return measurement_from_basis(random_unitary(d, rng), partition)


def _random_state(d: int, rng: np.random.Generator, i: int):
    kind = i % 3
    if kind == 0:
        return random_pure_state(d, rng)
    if kind == 1:
        return random_density_matrix(d, rng, rank=int(rng.integers(1, d + 1)))
    return random_density_matrix(d, rng)


def run_verify(cfg: dict) -> RunReport:
    """Randomized audit of the entropy/relative-entropy identity, Pinsker and the rate bounds."""
    p, tol = cfg["params"], cfg["tolerances"]["violation"]
    rng = np.random.default_rng(cfg["seed"])
    gaps, ds_all, pins, rates, dist_t, bws, caps = [], [], [], [], [], [], []
    rows = []
    for i in range(p["instances"]):
        d = int(rng.integers(p["min_dim"], p["max_dim"] + 1))
        rho = _random_state(d, rng, i)
        m = _random_measurement(d, rng)
        rho_tilde = dephase(m.projections, rho)
        ds = float(eigvals_entropy(np.linalg.eigvalsh(rho_tilde)) - eigvals_entropy(np.linalg.eigvalsh(rho)))
        kl = relative_entropy(rho, rho_tilde)
        diff = rho - rho_tilde
        dist = float(np.abs(np.linalg.eigvalsh(diff)).sum())
        gaps.append(abs(ds - kl))
        ds_all.append(ds)
        pins.append(0.5 * dist**2)
        h = random_hermitian(d, rng)
        bw = energy_bandwidth(h, rho, cfg["tolerances"]["occupation"])
        times = rng.uniform(0.0, 2 * math.pi, p["times_per_instance"])
        states = hamiltonian_states(h, rho, times)
        ops = np.array([1j * (h @ q - q @ h) for q in m.projections])
        r = np.abs(np.einsum("jab,tba->tj", ops, states).real).sum(axis=1)
        tilde = dephase(m.projections, states)
        dd = np.abs(np.linalg.eigvalsh(states - tilde)).sum(axis=-1)
        rates.extend(r / bw)
        dist_t.extend(dd)
        caps.extend(r)
        bws.extend([bw] * len(r))
        rows.append([i, d, len(m), ds, kl, dist, bw, float(r.max())])
    reports = [
        _worst("entropy increase equals relative entropy", "kl_identity", -np.array(gaps), np.zeros(len(gaps)), tol),
        _worst("entropy increase >= disturbance^2 / 2", "pinsker", ds_all, pins, tol),
        _worst("entropy increase >= 0", "entropy_monotone", ds_all, np.zeros(len(ds_all)), tol),
        _worst("disturbance >= speed / bandwidth", "rate_disturbance", dist_t, rates, tol),
        _worst("bandwidth >= ||p'||_1", "rate_cap", bws, caps, tol),
    ]
    header = ["instance", "dim", "outcomes", "entropy_increase", "relative_entropy", "disturbance",
              "bandwidth", "max_rate"]
    return RunReport(cfg, reports, {"verify": (header, rows)},
                     {"instances": p["instances"], "max_identity_gap": max(gaps)})


def run_clock(cfg: dict) -> RunReport:
    """Trajectory table plus pointwise and averaged bounds for one gallery clock."""
    p, tol = cfg["params"], cfg["tolerances"]["violation"]
    grids = cfg["grids"]
    clock = build_clock(p)
    times = np.linspace(0.0, clock.horizon, p["csv_points"])
    probs = clock.probabilities(times)
    h = clock.hamiltonian
    method = p["method"]
    if method == "auto" and not clock.is_closed:
        method = "dense"
    ds = clock.entropy_increase(times, method)
    dist = clock.disturbance(times, method)
    entropy = (np.full(len(times), float(eigvals_entropy(np.linalg.eigvalsh(clock.rho0))))
               if clock.is_closed else eigvals_entropy(np.linalg.eigvalsh(clock.states(times))))
    reports = [_worst("entropy increase >= disturbance^2 / 2", "pinsker", ds, 0.5 * dist**2, tol)]
    if h is not None:
        bw = energy_bandwidth(h, clock.rho0, cfg["tolerances"]["occupation"])
        rate = np.abs(clock.rates(times)).sum(axis=1)
        reports.append(_worst("disturbance >= speed / bandwidth", "rate_disturbance", dist, rate / bw, tol))
        reports.append(_worst("bandwidth >= ||p'||_1", "rate_cap", np.full(len(rate), bw), rate, tol))
        audit = theorem1_audit(clock, p["delta_t"], bw, grids["resolution_points"], grids["quadrature_points"],
                               method, rtol=cfg["tolerances"]["quadrature_rtol"])
        reports.append(_retol(audit.report, tol))
        summary = {"mean_entropy_increase": audit.average.value if audit.average else math.nan,
                   "delta_t": audit.certificate.delta_t if audit.certificate else math.inf,
                   "bandwidth": bw,
                   "theorem1_bound": audit.report.right_side}
        nonconv = [] if audit.average is None or audit.average.converged else ["mean entropy quadrature"]
    else:
        bw = math.inf
        rate = np.full(len(times), math.nan)
        grid = np.linspace(0.0, clock.horizon, grids["resolution_points"])
        dt = resolution_scan(clock.probabilities(grid), grid)
        avg = average_entropy_increase(clock, grids["quadrature_points"], method, cfg["tolerances"]["quadrature_rtol"])
        summary = {"mean_entropy_increase": avg.value, "delta_t": dt, "bandwidth": bw,
                   "theorem1_bound": math.nan}
        nonconv = [] if avg.converged else ["mean entropy quadrature"]
    labels = [f"p_{lab}" for lab in clock.measurement.labels]
    header = ["t", *labels, "S", "dS", "disturbance", "pinsker", "rate", "rate_bound"]
    rows = [[t, *pr, s, d, x, 0.5 * x * x, r, r / bw] for t, pr, s, d, x, r in
            zip(times, probs, entropy, ds, dist, rate)]
    summary.update(clock=clock.name, parameter=clock.parameter_name, horizon=clock.horizon)
    srow = [summary["mean_entropy_increase"], summary["delta_t"], summary["bandwidth"], summary["theorem1_bound"]]
    tables = {"trajectory": (header, rows),
              "summary": (["mean_dS", "delta_t", "bandwidth", "theorem1_bound"], [srow])}
    return RunReport(cfg, reports, tables, summary, {"instance": instance_to_json(clock)}, nonconv)


def run_switch(cfg: dict) -> RunReport:
    """Switching windows, entropy produced inside them and the decoherence bound, over a rate sweep."""
    p, tol = cfg["params"], cfg["tolerances"]["violation"]
    bw = p["bandwidth"]
    rows, reports, windows = [], [], []
    for rate in sorted(p["rates"]):
        res = make_bit_switch(bw, rate, p["horizon"], p["grid_points"])
        if res.completed:
            s1, s2 = res.entropies()
            bound = switch_bound(rate, res.delta_t, bw)
            if rate > 0:
                reports.append(BoundReport("entropy produced while switching >= rate / (2 dt dE^2)",
                                           "decoherence_switch", s2 - s1, bound,
                                           {"rate": rate, "delta_t": res.delta_t, "bandwidth": bw}, tolerance=tol))
        else:
            s1 = s2 = bound = math.nan
        windows.append(res.delta_t)
        rows.append([rate, res.t1, res.t2, res.delta_t, "yes" if res.completed else "no", s1, s2, s2 - s1, bound])
    steps = [b - a if math.isfinite(b) else (0.0 if not math.isfinite(a) else math.inf)
             for a, b in zip(windows, windows[1:])]
    if steps:
        reports.append(BoundReport("switching time nondecreasing in the dephasing rate", "zeno",
                                   min(steps), 0.0, {"rates": sorted(p["rates"])}, tolerance=tol))
    header = ["rate", "t1", "t2", "delta_t", "completed", "S_t1", "S_t2", "dS", "switch_bound"]
    summary = {"completed": [r[4] for r in rows], "delta_t": windows}
    return RunReport(cfg, reports, {"switch": (header, rows)}, summary)


def run_tightness(cfg: dict, jobs: int = 1) -> RunReport:
    p, tol = cfg["params"], cfg["tolerances"]["violation"]
    clock = build_clock(p["clock"])
    part = tuple(p["base_partition"]) if p["base_partition"] else None
    sc = SearchConfig(delta_t=p["delta_t"], restarts=p["restarts"], max_iterations=p["max_iterations"],
                      initial_step=p["initial_step"], init_scale=p["init_scale"],
                      penalty_weight=p["penalty_weight"], escalations=p["escalations"], rng_seed=cfg["seed"],
                      base_partition=part, resolution_points=cfg["grids"]["resolution_points"],
                      quadrature_points=cfg["grids"]["quadrature_points"], jobs=jobs)
    res = minimize(clock, sc)
    feas = [e for e in res.trace if e.feasible]
    reports = []
    if feas:
        reports.append(_worst("every feasible iterate: mean entropy >= bound", "average_entropy",
                              [e.mean_entropy for e in feas], [res.bound] * len(feas), tol,
                              delta_t=p["delta_t"]))
    header = ["restart", "iteration", "objective", "mean_dS", "min_tv", "feasible", "penalty_weight"]
    rows = [[e.restart, e.index, e.objective, e.mean_entropy, e.min_tv, "yes" if e.feasible else "no",
             e.penalty_weight] for e in res.trace]
    summary = {"best_mean_entropy": res.mean_entropy, "feasible": res.feasible, "bound": res.bound,
               "gap_ratio": res.gap_ratio, "min_tv": res.min_tv, "seed": res.seed, "evaluations": len(res.trace)}
    best = {"labels": list(res.measurement.labels),
            "projections": [matrix_to_json(q) for q in res.measurement.projections],
            "theta": res.theta.tolist()}
    return RunReport(cfg, reports, {"trace": (header, rows)}, summary, {"best_measurement": best},
                     [] if res.feasible else ["no feasible measurement found"])


def _matrix_param(value, named: dict, path: str):
    if isinstance(value, str):
        return named[value]
    return matrix_from_json(value, path)


def run_theorem2(cfg: dict) -> RunReport:
    p, tol = cfg["params"], cfg["tolerances"]["violation"]
    clock = make_rabi_clock(p["bandwidth"])
    gamma = _matrix_param(p["gamma"], {"ground": pure_state(np.array([1, 0]))}, "params/gamma")
    h_hat = p["apparatus_scale"] * _matrix_param(p["h_hat"], {"diag01": np.diag([0.0, 1.0]).astype(complex)},
                                                 "params/h_hat")
    u = _matrix_param(p["u"], {"cnot": CNOT, "identity": np.eye(4, dtype=complex)}, "params/u")
    comp = make_apparatus_composite(clock, gamma, h_hat, u, z_basis(h_hat.shape[0]))
    audit = theorem2_audit(clock.hamiltonian, clock.rho0, comp, p["delta_t"],
                           cfg["grids"]["resolution_points"], cfg["grids"]["quadrature_points"])
    summary = {"mean_entropy_increase": audit.average.value if audit.average else math.nan,
               "delta_t": audit.certificate.delta_t if audit.certificate else math.inf,
               "clock_bandwidth": audit.bandwidth, "composite_bandwidth": comp.declared_bandwidth,
               "bound": audit.report.right_side, "verdict": audit.report.verdict}
    nonconv = [] if audit.average is None or audit.average.converged else ["mean entropy quadrature"]
    return RunReport(cfg, [_retol(audit.report, tol)], {}, summary, {"composite": instance_to_json(comp)}, nonconv)


RUNNERS = {
    "verify": run_verify,
    "clock": run_clock,
    "switch": run_switch,
    "tightness": run_tightness,
    "theorem2": run_theorem2,
}
