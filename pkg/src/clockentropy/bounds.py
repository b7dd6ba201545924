"""Evaluation of the entropy / disturbance / rate inequalities and time resolution."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .clock import ClockInstance
from .dynamics import energy_bandwidth
from .dynamics import Trajectory
from .linalg import ValidationError, as_density_matrix, relative_entropy, require_hermitian, trace_norm
from .measurement import (
    ProjectiveMeasurement,
    disturbance,
    entropy_increase,
    lueders_update,
    outcome_probabilities,
)

VIOLATION_TOL = 1e-8
TV_TOL = 1e-9
RESOLUTION_POINTS = 2048
QUADRATURE_RTOL = 1e-6
QUADRATURE_CAP = 2**15


@dataclass
class BoundReport:
    """Evaluated left and right side of one inequality ``left >= right``."""

    name: str
    anchor: str
    left_side: float
    right_side: float
    inputs: dict = field(default_factory=dict)
    verdict: str = ""
    tolerance: float = VIOLATION_TOL

    def __post_init__(self):
        self.left_side, self.right_side = float(self.left_side), float(self.right_side)
        if not self.verdict:
            if math.isnan(self.left_side) or math.isnan(self.right_side):
                self.verdict = "inapplicable"
            else:
                self.verdict = "holds" if self.slack >= -self.tolerance else "violated"

    @property
    def slack(self) -> float:
        return self.left_side - self.right_side

    @property
    def holds(self) -> bool:
        return self.verdict != "violated"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["slack"] = self.slack
        return d


def _check(h: np.ndarray, m: ProjectiveMeasurement, rho: np.ndarray):
    if not (h.shape == rho.shape and m.dim == rho.shape[0]):
        raise ValidationError("Hamiltonian, measurement and state dimensions differ")


def outcome_rate(h, m: ProjectiveMeasurement, rho_t) -> np.ndarray:
    """Exact derivative of the outcome distribution, dp_j/dt = tr(i[H, P_j] rho_t)."""
    h = require_hermitian(h, "Hamiltonian")
    rho_t = as_density_matrix(rho_t)
    _check(h, m, rho_t)
    return np.array([np.trace(1j * (h @ p - p @ h) @ rho_t).real for p in m.projections])


def l1_rate(h, m: ProjectiveMeasurement, rho_t) -> float:
    return float(np.abs(outcome_rate(h, m, rho_t)).sum())


def lemma3_bound(h, m: ProjectiveMeasurement, rho_t, bandwidth: float) -> BoundReport:
    """Disturbance ||rho_t - rho~_t||_1 against the outcome speed ||p'||_1 / dE."""
    if not bandwidth > 0:
        raise ValidationError("energy bandwidth is zero: the state does not move, no clock")
    left = trace_norm(rho_t - lueders_update(m, rho_t))
    right = l1_rate(h, m, rho_t) / bandwidth
    return BoundReport("disturbance >= speed / bandwidth", "rate_disturbance", left, right,
                       {"bandwidth": bandwidth})


def kl_identity_report(m: ProjectiveMeasurement, rho) -> BoundReport:
    """Two-sided check of S(rho~) - S(rho) = K(rho || rho~), stored as -|difference| >= 0."""
    ds = entropy_increase(m, rho, method="dense")
    kl = relative_entropy(rho, lueders_update(m, rho))
    return BoundReport("entropy increase equals relative entropy", "kl_identity",
                       -abs(ds - kl), 0.0, {"entropy_increase": ds, "relative_entropy": kl})


def pinsker_report(m: ProjectiveMeasurement, rho) -> BoundReport:
    ds = entropy_increase(m, rho, method="dense")
    dist = disturbance(m, rho, method="dense")
    return BoundReport("entropy increase >= disturbance^2 / 2", "pinsker", ds, 0.5 * dist**2)


def rate_cap_report(rate: float, bandwidth: float) -> BoundReport:
    return BoundReport("bandwidth >= ||p'||_1", "rate_cap", bandwidth, rate)


# --- time resolution -------------------------------------------------------------


def total_variation(p, q) -> np.ndarray | float:
    return 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum(axis=-1)


@dataclass
class ResolutionCertificate:
    delta_t: float
    horizon: float
    grid_step: float
    min_total_variation: float
    satisfied: bool
    lipschitz_slack: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)


def _grid_shift(times: np.ndarray, delta_t: float) -> int:
    horizon = times[-1] - times[0]
    step = horizon / (len(times) - 1)
    if not np.allclose(np.diff(times), step, rtol=1e-9, atol=1e-12 * max(horizon, 1.0)):
        raise ValidationError("time resolution needs a uniform grid")
    if not 0 < delta_t <= horizon * (1 + 1e-12):
        raise ValidationError(f"delta_t must lie in (0, {horizon}], got {delta_t}")
    shift = int(round(delta_t / step))
    if shift < 1 or abs(shift * step - delta_t) > 1e-9 * max(horizon, 1.0):
        raise ValidationError(f"delta_t = {delta_t} is not a multiple of the grid step {step}")
    return shift


def min_tv_at_shift(probabilities: np.ndarray, shift: int) -> float:
    return float(np.min(total_variation(probabilities[:-shift or None], probabilities[shift:])))


def _unpack(probabilities, times):
    if isinstance(probabilities, Trajectory):
        return probabilities.probabilities, probabilities.times
    if times is None:
        raise ValidationError("times are required unless a Trajectory is given")
    return probabilities, times


def time_resolution(probabilities, times=None, delta_t: float = math.nan,
                    bandwidth: float = math.nan) -> ResolutionCertificate:
    """Certify that outcomes at t and t + delta_t are told apart with error <= 1/4.

    The best (randomized) decision rule reaches success-minus-failure equal to
    the total variation distance, so the criterion is TV >= 1/2 at every grid
    point t in [0, T - delta_t].  ``bandwidth`` bounds |dTV/dt| and sets the
    reported between-grid slack.
    """
    probabilities, times = _unpack(probabilities, times)
    times = np.asarray(times, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    shift = _grid_shift(times, delta_t)
    step = (times[-1] - times[0]) / (len(times) - 1)
    tv = min_tv_at_shift(p, shift)
    return ResolutionCertificate(shift * step, times[-1] - times[0], step, tv, tv >= 0.5 - TV_TOL,
                                 0.5 * bandwidth * step)


def certify_resolution(instance: ClockInstance, delta_t: float, points: int = RESOLUTION_POINTS + 1,
                       bandwidth: float = math.nan) -> ResolutionCertificate:
    """Certificate for an arbitrary delta_t: t runs over a uniform grid on [0, T - delta_t]."""
    horizon = instance.horizon
    if not 0 < delta_t <= horizon * (1 + 1e-12):
        raise ValidationError(f"delta_t must lie in (0, {horizon}], got {delta_t}")
    delta_t = min(delta_t, horizon)
    starts = np.linspace(0.0, horizon - delta_t, points)
    tv = float(np.min(total_variation(instance.probabilities(starts), instance.probabilities(starts + delta_t))))
    step = (horizon - delta_t) / (points - 1)
    return ResolutionCertificate(delta_t, horizon, step, tv, tv >= 0.5 - TV_TOL, 0.5 * bandwidth * step)


def min_resolution(probabilities, times, candidates) -> float:
    """Smallest candidate delta_t that is certified, or ``inf``."""
    probabilities, times = _unpack(probabilities, times)
    candidates = sorted(float(c) for c in candidates)
    if not candidates:
        raise ValidationError("empty candidate grid")
    for dt in candidates:
        if time_resolution(probabilities, times, dt).satisfied:
            return dt
    return math.inf


def grid_candidates(times) -> np.ndarray:
    """All grid multiples, the default candidate set."""
    times = np.asarray(times, dtype=float)
    return times[1:] - times[0]


def resolution_scan(probabilities, times) -> float:
    """Smallest grid multiple certified (same as min_resolution over all multiples)."""
    p = np.asarray(probabilities, dtype=float)
    times = np.asarray(times, dtype=float)
    for shift in range(1, len(times)):
        if min_tv_at_shift(p, shift) >= 0.5 - TV_TOL:
            return float(times[shift] - times[0])
    return math.inf


# --- averaged entropy -----------------------------------------------------------


@dataclass
class QuadratureResult:
    value: float
    change: float
    points: int
    converged: bool

    def __float__(self) -> float:
        return self.value


def simpson(values: np.ndarray, step: float) -> float:
    v = np.asarray(values, dtype=float)
    return float(step / 3.0 * (v[0] + v[-1] + 4.0 * v[1:-1:2].sum() + 2.0 * v[2:-1:2].sum()))


def adaptive_average(fn, horizon: float, points: int = 257, rtol: float = QUADRATURE_RTOL,
                     cap: int = QUADRATURE_CAP) -> QuadratureResult:
    """Mean of ``fn`` over [0, horizon] by composite Simpson, doubling until stable.

    ``fn`` maps an array of abscissae to values; only new midpoints are
    evaluated at each doubling.
    """
    if points < 9:
        raise ValidationError("need at least 9 quadrature points")
    n = points - 1 if (points - 1) % 2 == 0 else points
    values = np.asarray(fn(np.linspace(0.0, horizon, n + 1)), dtype=float)
    old = simpson(values, horizon / n) / horizon
    change = math.inf
    while 2 * n + 1 <= cap + 1:
        mids = (np.arange(n) + 0.5) * (horizon / n)
        new_vals = np.asarray(fn(mids), dtype=float)
        merged = np.empty(2 * n + 1)
        merged[0::2], merged[1::2] = values, new_vals
        values, n = merged, 2 * n
        new = simpson(values, horizon / n) / horizon
        change = abs(new - old)
        old = new
        if change <= rtol * abs(new) or change <= 1e-15:
            return QuadratureResult(new, change, n + 1, True)
    return QuadratureResult(old, change, n + 1, False)


def average_entropy_increase(instance: ClockInstance, quadrature_points: int = 257,
                             method: str = "auto", rtol: float = QUADRATURE_RTOL) -> QuadratureResult:
    """Mean of S(rho~_t) - S(rho_t) over the uniform prior on [0, T]."""
    return adaptive_average(lambda t: instance.entropy_increase(t, method), instance.horizon,
                            quadrature_points, rtol)


def theorem1_bound(delta_t: float, bandwidth: float) -> float:
    """Lower bound (1/2) / (delta_t * dE)^2 on the mean entropy increase, hbar = 1."""
    if not (delta_t > 0 and bandwidth > 0):
        raise ValidationError("delta_t and the bandwidth must be positive")
    return 0.5 / (delta_t * bandwidth) ** 2


def switch_bound(rate: float, delta_t: float, bandwidth: float) -> float:
    """Entropy of a dephased bit switching within delta_t: rate / (2 delta_t dE^2)."""
    if rate < 0:
        raise ValidationError("dephasing rate must be >= 0")
    if not (delta_t > 0 and bandwidth > 0):
        raise ValidationError("delta_t and the bandwidth must be positive")
    return rate / (2.0 * delta_t * bandwidth**2)


# --- full pipelines -------------------------------------------------------------


@dataclass
class AuditResult:
    report: BoundReport
    certificate: ResolutionCertificate | None
    average: QuadratureResult | None
    bandwidth: float


def theorem1_audit(instance: ClockInstance, delta_t: float | None = None, bandwidth: float | None = None,
                   resolution_points: int = RESOLUTION_POINTS + 1, quadrature_points: int = 257,
                   method: str = "auto", name: str = "mean entropy increase >= 1/(2 (dt dE)^2)",
                   anchor: str = "average_entropy", rtol: float = QUADRATURE_RTOL) -> AuditResult:
    """Resolution certificate, mean entropy increase and the lower bound for one clock.

    Without ``delta_t`` the smallest certified multiple of the resolution grid
    step is used.  The
    report is ``inapplicable`` when no resolution can be certified.
    """
    dE = energy_bandwidth(instance.hamiltonian, instance.rho0) if bandwidth is None else bandwidth
    cert = None
    if delta_t is None:
        times = np.linspace(0.0, instance.horizon, resolution_points)
        p = instance.probabilities(times)
        delta_t = resolution_scan(p, times)
        if math.isfinite(delta_t):
            cert = time_resolution(p, times, delta_t, dE)
    else:
        cert = certify_resolution(instance, delta_t, resolution_points, dE)
    inputs = {"clock": instance.name, "parameter": instance.parameter_name, "bandwidth": dE,
              "horizon": instance.horizon}
    if cert is None or not cert.satisfied:
        inputs["delta_t"] = delta_t
        return AuditResult(BoundReport(name, anchor, math.nan, math.nan, inputs), cert, None, dE)
    avg = average_entropy_increase(instance, quadrature_points, method, rtol)
    inputs.update(delta_t=cert.delta_t, min_total_variation=cert.min_total_variation,
                  quadrature_points=avg.points, quadrature_converged=avg.converged)
    report = BoundReport(name, anchor, avg.value, theorem1_bound(cert.delta_t, dE), inputs)
    return AuditResult(report, cert, avg, dE)


def theorem2_audit(clock_hamiltonian, clock_state, composite: ClockInstance, delta_t: float | None = None,
                   resolution_points: int = RESOLUTION_POINTS + 1, quadrature_points: int = 257) -> AuditResult:
    """Averaged-entropy audit of a clock (x) apparatus composite; the bandwidth comes from the clock factor only."""
    dE = energy_bandwidth(clock_hamiltonian, clock_state)
    return theorem1_audit(composite, delta_t, dE, resolution_points, quadrature_points, method="dense",
                          name="composite mean entropy increase >= 1/(2 (dt dE_clock)^2)",
                          anchor="composite_average_entropy")


def pointwise_chain(instance: ClockInstance, times, bandwidth: float | None = None, method: str = "auto"):
    """Entropy increase, Pinsker and rate bounds at each time.

    Returns arrays (dS, ||rho - rho~||_1, ||p'||_1).
    """
    ds = instance.entropy_increase(times, method)
    dist = instance.disturbance(times, method)
    rate = np.abs(instance.rates(times)).sum(axis=-1)
    return ds, dist, rate
