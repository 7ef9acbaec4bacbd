"""Closed-form runtime bounds and the experiments that test them.

Thresholds used throughout: success means ||P_F psi_tau(1)|| >= 1/5, and the
robust bound's survival threshold is 2 sqrt(6)/5 + 2 delta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .evolution import evolve, EvolutionResult
from .operators import SearchInstance, grover_instance
from .schedules import Schedule, robustness_profile, smooth_bump_schedule, linear_schedule
from .spectral import gap_profile

GAMMA = 0.2
SURVIVAL_BASE = 2.0 * math.sqrt(6.0) / 5.0
SOUNDNESS_SLACK = 1e-9
C_RANGE = (1.0 / 3.0, 2.0 / 3.0)


class BoundNotApplicable(ValueError):
    """A theorem's proviso fails, so its bound says nothing."""


# ---------------------------------------------------------------- closed forms


def tau_lower_bound(instance: SearchInstance) -> float:
    """``(1 - 5 delta2) / (5 delta1)``, valid for delta2 < 1/5."""
    d1, d2 = instance.overlaps.delta1, instance.overlaps.delta2
    if d2 >= GAMMA:
        raise BoundNotApplicable(f"delta2 = {d2:.6g} >= 1/5")
    if d1 == 0.0:
        return math.inf
    return (1.0 - 5.0 * d2) / (5.0 * d1)


def tau_upper_time(instance: SearchInstance, C: float) -> float:
    """``C (1 - E_F) / (|E_F| delta2)`` for C in [1/3, 2/3]."""
    if not C_RANGE[0] - 1e-12 <= C <= C_RANGE[1] + 1e-12:
        raise ValueError("C must lie in [1/3, 2/3]")
    d2 = instance.overlaps.delta2
    if d2 == 0.0:
        raise ValueError("delta2 = 0: the ground space is unreachable")
    E_F = instance.E_F
    return C * (1.0 - E_F) / (abs(E_F) * d2)


def repetition_count(N: int, gamma: float = GAMMA) -> float:
    """Repetitions ``ln N / gamma^2`` that boost a gamma-amplitude success."""
    return math.log(N) / gamma ** 2


@dataclass(frozen=True)
class RobustBoundInputs:
    kappa: float
    delta: float
    m: int
    epsilon: float
    threshold: float

    @property
    def vacuous(self) -> bool:
        return self.epsilon >= 1.0


def robust_inputs(kappa: float, delta: float, m: int) -> RobustBoundInputs:
    return RobustBoundInputs(float(kappa), float(delta), int(m),
                             1e3 * (m + 1) * delta, SURVIVAL_BASE + 2.0 * delta)


def robust_inputs_for(instance: SearchInstance, schedule: Schedule) -> RobustBoundInputs:
    prof = robustness_profile(schedule)
    return robust_inputs(prof.kappa, instance.overlaps.delta, instance.rank_final)


def tau_robust_bound(inputs: RobustBoundInputs, constant: float = 1.0) -> float | None:
    """``constant kappa / (-eps^2 ln eps)``, or None when eps >= 1 (vacuous)."""
    if inputs.kappa <= 0:
        raise ValueError("kappa must be positive")
    if inputs.delta <= 0:
        raise ValueError("delta must be positive")
    if inputs.vacuous:
        return None
    eps = inputs.epsilon
    return constant * inputs.kappa / (-(eps ** 2) * math.log(eps))


@dataclass(frozen=True)
class BoundReport:
    tau_lower: float | None
    tau_upper_interval: tuple | None
    tau_robust: float | str
    ratio_lower_upper: float | None
    parameters_used: dict
    hypothesis_flags: dict

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(instance: SearchInstance, schedule: Schedule | None = None, constant: float = 1.0) -> BoundReport:
    """All three closed-form bounds with the hypotheses they rest on."""
    ov = instance.overlaps
    schedule = schedule or smooth_bump_schedule()
    try:
        lower = tau_lower_bound(instance)
    except BoundNotApplicable:
        lower = None
    try:
        upper = (tau_upper_time(instance, C_RANGE[0]), tau_upper_time(instance, C_RANGE[1]))
    except ValueError:
        upper = None
    kappa = robustness_profile(schedule).kappa
    inputs = robust_inputs(kappa, ov.delta, instance.rank_final)
    robust = None
    if kappa > 0 and ov.delta > 0:
        robust = tau_robust_bound(inputs, constant)
    N, m = instance.dim, instance.rank_final
    flags = {
        "delta2_below_fifth": bool(ov.delta2 < GAMMA),
        "delta3_lnN_over_gF": float(ov.delta3 * math.log(N) / instance.g_F),
        "E_I_is_minus_one": bool(abs(instance.E_I + 1.0) < 1e-12),
        "epsilon": inputs.epsilon,
        "epsilon_below_one": bool(not inputs.vacuous),
        "generic_diagnostic": float(ov.delta3 * math.sqrt(N / m)),
        "repetitions": repetition_count(N),
    }
    params = {"delta1": ov.delta1, "delta2": ov.delta2, "delta3": ov.delta3, "delta": ov.delta,
              "E_F": instance.E_F, "kappa": kappa, "m": m, "N": N, "schedule": schedule.kind,
              "constant": float(constant)}
    ratio = lower / upper[1] if lower is not None and upper is not None else None
    return BoundReport(lower, upper, "vacuous" if robust is None else robust, ratio, params, flags)


# ---------------------------------------------------------------- soundness


@dataclass
class SoundnessLog:
    """Collects (tau, amplitude, tau_lower) and flags success below tau_lower."""

    records: list = field(default_factory=list)

    def check(self, instance: SearchInstance, result: EvolutionResult) -> bool:
        try:
            lower = tau_lower_bound(instance)
        except BoundNotApplicable:
            return True
        ok = not (result.success_amplitude >= GAMMA and result.tau < lower - SOUNDNESS_SLACK)
        self.records.append((result.tau, result.success_amplitude, lower, ok))
        return ok

    @property
    def violations(self) -> list:
        return [r for r in self.records if not r[3]]


# ---------------------------------------------------------------- thresholds


def _metric(result: EvolutionResult, metric: str) -> float:
    return float(getattr(result, metric))


def first_success_tau(instance: SearchInstance, schedule: Schedule, tau_start: float = 0.05,
                      tau_max: float = 1e5, growth: float = 1.25, rel_tol: float = 0.01,
                      threshold: float = GAMMA, metric: str = "success_amplitude",
                      mode: str = "reduced", **kw) -> float | None:
    """Smallest tau where ``metric`` first reaches ``threshold``.

    A geometric scan locates the first grid point at or above the threshold;
    bisection inside the last bracket then narrows it to ``rel_tol``. Later
    oscillations are ignored.
    """
    run = lambda t: _metric(evolve(instance, schedule, t, mode=mode, **kw), metric)
    lo, tau = 0.0, float(tau_start)
    while tau <= tau_max:
        if run(tau) >= threshold:
            break
        lo, tau = tau, tau * growth
    else:
        return None
    hi = tau
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if run(mid) >= threshold:
            hi = mid
        else:
            lo = mid
    return hi


def _mode_for(schedule: Schedule, mode: str) -> str:
    return "double_step" if schedule.kind == "double_step" else mode


@dataclass(frozen=True)
class Thm1Report:
    tau_lower: float
    rows: list  # (schedule, tau, success_amplitude)
    violations: list
    tau_star: dict
    ratios: dict

    @property
    def passed(self) -> bool:
        return not self.violations and all(r >= 1.0 for r in self.ratios.values() if r is not None)


def verify_thm1(instance: SearchInstance, schedules, tau_grid, mode: str = "reduced",
                search_threshold: bool = True, tau_max: float = 1e5) -> Thm1Report:
    """Evolve below tau_lower on every schedule and locate empirical thresholds."""
    lower = tau_lower_bound(instance)
    rows, bad, stars, ratios = [], [], {}, {}
    for sched in schedules:
        md = _mode_for(sched, mode)
        for tau in tau_grid:
            amp = evolve(instance, sched, float(tau), mode=md).success_amplitude
            rows.append((sched.kind, float(tau), amp))
            if tau < lower and amp >= GAMMA:
                bad.append((sched.kind, float(tau), amp))
        if search_threshold:
            star = first_success_tau(instance, sched, tau_start=min(0.05, lower / 4), tau_max=tau_max, mode=md)
            stars[sched.kind] = star
            ratios[sched.kind] = None if star is None else star / lower
    return Thm1Report(lower, rows, bad, stars, ratios)


@dataclass(frozen=True)
class Thm5Report:
    delta: float
    threshold: float
    threshold_reachable: bool  # threshold < 1, so tau = 0 satisfies it
    kappa: float
    rows: list  # (tau, survival, range_overlap, survival_above_threshold)
    tau_star: float | None


def verify_thm5(instance: SearchInstance, schedule: Schedule | None = None, tau_grid=(),
                mode: str = "reduced", search_threshold: bool = True, tau_max: float = 1e6) -> Thm5Report:
    """Survival and range overlap along ``tau_grid``, plus the first tau with overlap >= 1/5."""
    schedule = schedule or smooth_bump_schedule()
    if abs(instance.E_I + 1.0) > 1e-12:
        raise ValueError("robust bound requires E_I = -1")
    prof = robustness_profile(schedule)
    if prof.kappa <= 0:
        raise ValueError(f"schedule {schedule.kind!r} has kappa = 0 on J")
    delta = instance.overlaps.delta
    thr = SURVIVAL_BASE + 2.0 * delta
    rows = []
    for tau in tau_grid:
        r = evolve(instance, schedule, float(tau), mode=mode)
        rows.append((float(tau), r.survival, r.range_overlap, bool(r.survival > thr)))
    star = None
    if search_threshold:
        star = first_success_tau(instance, schedule, tau_max=tau_max, metric="range_overlap", mode=mode)
    return Thm5Report(delta, thr, bool(thr < 1.0), prof.kappa, rows, star)


def loglog_slope(x, y) -> float:
    """Least-squares slope of log y against log x."""
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass(frozen=True)
class ScalingReport:
    N: list
    tau_star: list
    slope: float
    theory_shape: list  # kappa N / ln N
    slope_vs_theory: float


def threshold_scaling(Ns, schedule: Schedule, m: int = 1, metric: str = "range_overlap",
                      mode: str = "reduced") -> ScalingReport:
    """First-success tau versus N for GUS instances, with its log-log slope."""
    kappa = robustness_profile(schedule).kappa if schedule.smooth else 0.0
    md = _mode_for(schedule, mode)
    stars = []
    for N in Ns:
        inst = grover_instance(int(N), m=m)
        start = 0.05 * math.sqrt(N)
        stars.append(first_success_tau(inst, schedule, tau_start=start, metric=metric, mode=md))
    shape = [kappa * N / math.log(N) for N in Ns]
    return ScalingReport(list(map(int, Ns)), stars, loglog_slope(Ns, stars), shape,
                         loglog_slope([N / math.log(N) for N in Ns], stars))


@dataclass(frozen=True)
class AdiabaticScan:
    tau: list
    errors: dict  # schedule kind -> dist_to_ground per tau
    slopes: dict
    monotone: dict
    min_gaps: dict


def adiabatic_error_scan(instance: SearchInstance, schedules=None, tau_grid=(1e2, 1e3, 1e4),
                         mode: str = "reduced", gap_floor: float = 1e-8) -> AdiabaticScan:
    """dist(psi_tau(1), Range P_F) against tau, per schedule."""
    schedules = schedules or [linear_schedule(), smooth_bump_schedule()]
    errs, slopes, mono, gaps = {}, {}, {}, {}
    for sched in schedules:
        g = gap_profile(instance, sched, 65).min_gap
        if g <= gap_floor:
            raise ValueError(f"schedule {sched.kind!r} closes the gap (min gap {g:.3g})")
        gaps[sched.kind] = g
        e = [evolve(instance, sched, float(t), mode=mode).dist_to_ground for t in tau_grid]
        errs[sched.kind] = e
        mono[sched.kind] = bool(all(b < a for a, b in zip(e, e[1:])))
        slopes[sched.kind] = loglog_slope(tau_grid, np.maximum(e, 1e-300))
    return AdiabaticScan([float(t) for t in tau_grid], errs, slopes, mono, gaps)
