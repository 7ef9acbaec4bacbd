"""Interpolation schedules f(s) and their robustness quantities.

A schedule is a monotone map [0, 1] -> [0, 1] with f(0) = 0 and f(1) = 1.
`robustness_profile` derives the interval J = [a, b] and the control floor
kappa used by the robust lower bound.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

CONCAVITY_TOL = 1e-8
MONOTONE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Schedule:
    """Vectorized schedule with derivative access.

    ``smooth`` marks schedules that are C^1 on [0, 1]; the others report
    the one-sided derivative of the piece containing ``s``.
    """

    kind: str
    func: Callable
    deriv: Callable
    second: Callable | None = None
    params: dict = field(default_factory=dict)
    smooth: bool = True

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=float))

    def derivative(self, s):
        return self.deriv(np.asarray(s, dtype=float))

    def second_derivative(self, s):
        s = np.asarray(s, dtype=float)
        if self.second is not None:
            return self.second(s)
        h = 1e-5
        lo, hi = np.clip(s - h, 0, 1), np.clip(s + h, 0, 1)
        return (self.deriv(hi) - self.deriv(lo)) / np.maximum(hi - lo, 1e-300)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "double_step":
            d["E_F"] = self.params["E_F"]
        elif self.kind == "table":
            d["points"] = [list(map(float, p)) for p in self.params["points"]]
        elif self.kind not in ("linear", "smooth_bump"):
            raise ValueError(f"schedule kind {self.kind!r} has no file form")
        return d


def _check_schedule(sched: Schedule, grid: int = 1001) -> Schedule:
    s = np.linspace(0.0, 1.0, grid)
    f = sched(s)
    if abs(f[0]) > 1e-12 or abs(f[-1] - 1.0) > 1e-8:
        raise ValueError("schedule must satisfy f(0)=0 and f(1)=1")
    if np.any(np.diff(f) < -MONOTONE_TOL):
        raise ValueError("schedule is not monotone")
    if np.any(f < -1e-12) or np.any(f > 1 + 1e-12):
        raise ValueError("schedule leaves [0, 1]")
    return sched


def linear_schedule() -> Schedule:
    return Schedule(
        "linear",
        lambda s: s.copy() if s.ndim else s * 1.0,
        lambda s: np.ones_like(s),
        lambda s: np.zeros_like(s),
    )


def double_step_schedule(E_F: float) -> Schedule:
    """Jump to alpha = 1/(1 - E_F) at s = 0+, hold, jump to 1 at s = 1."""
    E_F = float(E_F)
    if not -1.0 <= E_F < 0.0:
        raise ValueError("double step needs -1 <= E_F < 0")
    alpha = 1.0 / (1.0 - E_F)

    def f(s):
        return np.where(s <= 0.0, 0.0, np.where(s >= 1.0, 1.0, alpha))

    return Schedule(
        "double_step", f, lambda s: np.zeros_like(s), lambda s: np.zeros_like(s),
        {"E_F": E_F, "alpha": alpha, "jumps": (0.0, 1.0)}, smooth=False,
    )


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0.0) & (s < 1.0)
    si = s[inside]
    with np.errstate(over="ignore", under="ignore"):
        out[inside] = np.exp(1.0 / (si * (si - 1.0)))
    return out


class _BumpIntegral:
    """Cumulative integral of the bump via composite Gauss-Legendre panels."""

    def __init__(self, panels=2048, order=16):
        self.n = panels
        x, w = np.polynomial.legendre.leggauss(order)
        self.x, self.w = (x + 1) / 2, w / 2
        edges = np.linspace(0.0, 1.0, panels + 1)
        h = 1.0 / panels
        nodes = edges[:-1, None] + h * self.x[None, :]
        per_panel = h * (_bump(nodes) @ self.w)
        self.cum = np.concatenate([[0.0], np.cumsum(per_panel)])
        self.total = self.cum[-1]
        self.reference, _ = quad(_bump, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)

    def __call__(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
        k = np.minimum((t * self.n).astype(int), self.n - 1)
        start = k / self.n
        width = t - start
        nodes = start[..., None] + width[..., None] * self.x
        part = width * (_bump(nodes) @ self.w)
        return (self.cum[k] + part) / self.total


_BUMP = None


def smooth_bump_schedule() -> Schedule:
    """C^infinity schedule whose derivative is ``alpha exp(1/(s(s-1)))``."""
    global _BUMP
    if _BUMP is None:
        _BUMP = _BumpIntegral()
    z = _BUMP.total

    def d1(s):
        return _bump(s) / z

    def d2(s):
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = (s > 0.0) & (s < 1.0)
        si = s[inside]
        out[inside] = (1.0 - 2.0 * si) / (si * (1.0 - si)) ** 2 * _bump(si) / z
        return out

    return Schedule("smooth_bump", _BUMP, d1, d2,
                    {"alpha": 1.0 / z, "alpha_quad": 1.0 / _BUMP.reference})


def table_schedule(points) -> Schedule:
    """Piecewise-linear schedule through ``[[s, f], ...]`` breakpoints."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("points must be a list of [s, f] pairs")
    s, f = pts[:, 0], pts[:, 1]
    if s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
        raise ValueError("breakpoints must increase from 0 to 1")
    if np.any(np.diff(f) < 0):
        raise ValueError("table values are not monotone")
    slopes = np.diff(f) / np.diff(s)

    def d1(x):
        k = np.clip(np.searchsorted(s, x, side="right") - 1, 0, len(slopes) - 1)
        return slopes[k]

    sched = Schedule("table", lambda x: np.interp(x, s, f), d1,
                     lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                     {"points": pts.tolist()}, smooth=False)
    return _check_schedule(sched)


def custom_schedule(func, deriv, second=None, name="custom", smooth=True) -> Schedule:
    """Wrap user callables; validated on a 1e-3 grid."""
    return _check_schedule(Schedule(name, func, deriv, second, {}, smooth))


def schedule_from_dict(spec: dict) -> Schedule:
    unknown = set(spec) - {"kind", "E_F", "points"}
    if unknown:
        raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
    kind = spec.get("kind")
    if kind == "linear":
        return linear_schedule()
    if kind == "double_step":
        return double_step_schedule(spec["E_F"])
    if kind == "smooth_bump":
        return smooth_bump_schedule()
    if kind == "table":
        return table_schedule(spec["points"])
    raise ValueError(f"unknown schedule kind {kind!r}")


def load_schedule(path) -> Schedule:
    with open(Path(path)) as fh:
        return schedule_from_dict(json.load(fh))


# ---------------------------------------------------------------- robustness


@dataclass(frozen=True)
class RobustnessProfile:
    """J = [a, b] and the control floor on it.

    ``kappa`` is the floor used downstream. For schedules convex on [0, b]
    it is the convexity bound f(a)/b (since fdot(s) >= f(s)/s there);
    otherwise it is the sampled infimum ``kappa_infimum`` of fdot over J.
    """

    a: float
    b: float
    J: tuple | None
    kappa: float
    kappa_infimum: float
    branch: str  # "concave_tail", "clamped", "empty" or "non_c1"


def _first_crossing(sched, grid, level):
    f = sched(grid)
    idx = int(np.argmax(f >= level))
    if f[idx] < level:
        raise ValueError(f"schedule never reaches {level}")
    if idx == 0:
        return float(grid[0])
    lo, hi = grid[idx - 1], grid[idx]
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if sched(mid) >= level:
            hi = mid
        else:
            lo = mid
    return float(hi)


def robustness_profile(schedule: Schedule, grid_points: int = 10_001) -> RobustnessProfile:
    grid = np.linspace(0.0, 1.0, grid_points)
    a = _first_crossing(schedule, grid, 1.0 / 3.0)
    if not schedule.smooth:
        on_j = grid[grid >= a]
        inf = float(np.min(schedule.derivative(on_j)))
        return RobustnessProfile(a, 1.0, (a, 1.0), inf, inf, "non_c1")

    d2 = schedule.second_derivative(grid)
    convex_pts = np.flatnonzero(d2 > CONCAVITY_TOL)
    if convex_pts.size == 0:
        b = 0.0
    else:
        last = int(convex_pts[-1])
        if last == grid_points - 1:
            b = 1.0
        else:
            lo, hi = grid[last], grid[last + 1]
            if schedule.second is not None:
                b = float(brentq(lambda x: float(schedule.second_derivative(x)), lo, hi, xtol=1e-12)) \
                    if schedule.second_derivative(hi) <= 0.0 else float(hi)
            else:
                b = float(hi)
    if a <= b:
        J, branch = (a, b), "concave_tail"
    elif b == 0.0:
        # weakly concave everywhere: J degenerates to the point a
        J, branch, b = (a, a), "clamped", a
    else:
        J, branch = None, "empty"
    if J is None:
        return RobustnessProfile(a, b, None, 0.0, 0.0, branch)

    inside = grid[(grid >= J[0]) & (grid <= J[1])]
    inside = np.concatenate([[J[0]], inside, [J[1]]])
    inf = float(np.min(schedule.derivative(inside)))
    head = grid[grid <= J[1]]
    convex_head = bool(np.all(schedule.second_derivative(head) >= -CONCAVITY_TOL))
    if convex_head and abs(float(schedule(0.0))) < 1e-15 and J[1] > 0:
        kappa = float(schedule(J[0])) / J[1]
    else:
        kappa = inf
    return RobustnessProfile(a, b, J, min(kappa, inf), inf, branch)


@dataclass(frozen=True)
class ConcavityReport:
    passed: bool
    interval: tuple
    samples: int
    violations: list  # (t, 1 - f(t), fdot(t) (1 - t))


def verify_concavity_relation(schedule: Schedule, samples: int = 1000, interval=None) -> ConcavityReport:
    """Check ``1 - f(t) <= fdot(t) (1 - t)`` on [b, 1] (or `interval`)."""
    if interval is None:
        if not schedule.smooth:
            raise ValueError("concavity relation needs a differentiable schedule")
        interval = (robustness_profile(schedule).b, 1.0)
    t = np.linspace(interval[0], interval[1], samples)
    lhs = 1.0 - schedule(t)
    rhs = schedule.derivative(t) * (1.0 - t)
    bad = np.flatnonzero(lhs > rhs + 1e-8)
    viol = [(float(t[i]), float(lhs[i]), float(rhs[i])) for i in bad]
    return ConcavityReport(not viol, tuple(map(float, interval)), samples, viol)
