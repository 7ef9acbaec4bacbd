"""Scaled Schrodinger evolution ``i psi' = tau H(s) psi`` on s in [0, 1].

Smooth schedules are integrated with exponential integrators: each step
applies exact exponentials of Hermitian combinations of H_I and H_F, so
every step is unitary. The double-step schedule is piecewise
constant and is exponentiated exactly. Reported quantities are moduli, so
the global dynamical phase is never tracked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .operators import SearchInstance
from .schedules import Schedule

DEFAULT_TOL = 1e-9
MAX_STEPS_FULL = 2 ** 15
MAX_STEPS_REDUCED = 2 ** 22
_BATCH_DIM = 16
_CHUNK = 2 ** 14


@dataclass(frozen=True)
class ReducedBasis:
    """Orthonormal basis of span(Range H_F, psi_I).

    The first m columns are H_F eigenvectors (``labels`` holds their
    eigenvalues); the last is the normalized component of psi_I outside
    Range H_F.
    """

    vectors: np.ndarray
    labels: np.ndarray
    m: int


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    final_state: np.ndarray
    success_probability: float
    success_amplitude: float
    survival: float
    range_overlap: float
    dist_to_ground: float
    tau: float
    step_count: int
    norm_drift: float
    mode: str
    error_estimate: float = 0.0
    degraded: bool = False

    def summary(self) -> dict:
        return {k: getattr(self, k) for k in (
            "success_probability", "success_amplitude", "survival", "range_overlap",
            "dist_to_ground", "tau", "step_count", "norm_drift", "mode",
            "error_estimate", "degraded")}


def default_steps(tau: float) -> int:
    return max(64, math.ceil(8 * tau))


# ---------------------------------------------------------------- basis


def build_reduced_basis(instance: SearchInstance) -> ReducedBasis:
    if instance.rank_initial != 1:
        raise ValueError("reduced dynamics needs a rank-one H_I")
    sf = instance.spectral_final
    u = sf.range_basis
    psi = instance.psi_initial
    outside = psi - u @ (u.conj().T @ psi)
    norm = np.linalg.norm(outside)
    if norm < 1e-12:
        raise ValueError("psi_I lies in Range H_F; the last basis vector is undefined")
    vecs = np.column_stack([u.astype(complex), outside / norm])
    vecs.setflags(write=False)
    return ReducedBasis(vecs, sf.range_labels, u.shape[1])


def _reduced_operators(instance, basis):
    e = basis.vectors
    h_i = e.conj().T @ (instance.h_initial.matrix @ e)
    h_f = e.conj().T @ (instance.h_final.matrix @ e)
    psi = e.conj().T @ instance.psi_initial
    return (h_i + h_i.conj().T) / 2, (h_f + h_f.conj().T) / 2, psi


# ---------------------------------------------------------------- propagators


class _Applicator:
    """Cheapest available ``v -> A v`` for a Hermitian operator."""

    def __init__(self, op):
        lowrank = getattr(op, "lowrank", None)
        self.dense = np.asarray(getattr(op, "matrix", op))
        self.dim = self.dense.shape[0]
        self.factors = None
        if lowrank is not None and lowrank[1].shape[1] < self.dim // 4:
            vals, vecs = lowrank
            self.factors = (np.asarray(vals), np.asarray(vecs), np.asarray(vecs).conj().T)
            self.norm = float(np.max(np.abs(vals), initial=0.0))
        elif self.dim <= _BATCH_DIM:
            self.norm = float(np.linalg.norm(self.dense, 2))
        else:
            self.norm = float(np.abs(self.dense).sum(0).max())

    def __matmul__(self, v):
        if self.factors is not None:
            vals, vecs, vecs_h = self.factors
            return vecs @ (vals * (vecs_h @ v))
        return self.dense @ v


def _expm_action(apply, dt, v, norm_bound):
    """exp(-i dt h) v by Taylor series on substeps with ||dt h|| <= 1/2.

    ``apply(w)`` returns ``h w``.
    """
    sub = max(1, math.ceil(abs(dt) * norm_bound / 0.5))
    step = dt / sub
    out = v
    for _ in range(sub):
        term = out
        acc = out.copy()
        k = 1
        while True:
            term = (-1j * step / k) * apply(term)
            acc += term
            if np.linalg.norm(term) <= 1e-17 * np.linalg.norm(acc) or k > 60:
                break
            k += 1
        out = acc
    return out


def _tree_product(us):
    """U_n ... U_2 U_1 for a stack ordered U_1 first."""
    while len(us) > 1:
        if len(us) % 2:
            us = np.concatenate([us, np.eye(us.shape[1])[None]], axis=0)
        us = us[1::2] @ us[0::2]
    return us[0]


_R3 = math.sqrt(3.0)
# (node offsets within a step, weights per exponential) in application order
_RULES = {
    "midpoint": ((0.5,), ((1.0,),)),
    "cfm4": ((0.5 - _R3 / 6, 0.5 + _R3 / 6),
             (((3 + 2 * _R3) / 12, (3 - 2 * _R3) / 12),
              ((3 - 2 * _R3) / 12, (3 + 2 * _R3) / 12))),
}
_ORDER = {"midpoint": 2, "cfm4": 4}


def _coefficients(schedule, steps, method):
    """Coefficients (c_I, c_F) of every exponential, in application order.

    Exponential j of step n is ``exp(-i tau h (c_I H_I + c_F H_F))``.
    """
    nodes, weights = _RULES[method]
    start = np.arange(steps) / steps
    fs = np.stack([schedule(start + c / steps) for c in nodes], axis=1)  # (steps, nodes)
    w = np.asarray(weights)  # (exponentials, nodes)
    c_f = fs @ w.T
    c_i = w.sum(1)[None, :] - c_f
    return c_i.reshape(-1), c_f.reshape(-1)


def _propagate_smooth(a_i, a_f, psi, schedule, tau, steps, method="cfm4"):
    d = a_i.dim
    dt = tau / steps
    c_i, c_f = _coefficients(schedule, steps, method)
    if d <= _BATCH_DIM:
        h_i, h_f = a_i.dense, a_f.dense
        total = np.eye(d, dtype=complex)
        for start in range(0, len(c_i), _CHUNK):
            ci = c_i[start:start + _CHUNK, None, None]
            cf = c_f[start:start + _CHUNK, None, None]
            w, v = np.linalg.eigh(ci * h_i + cf * h_f)
            us = (v * np.exp(-1j * dt * w)[:, None, :]) @ v.conj().transpose(0, 2, 1)
            total = _tree_product(us) @ total
        return total @ psi
    out = psi.astype(complex)
    for ci, cf in zip(c_i, c_f):
        apply = lambda v, ci=ci, cf=cf: ci * (a_i @ v) + cf * (a_f @ v)
        out = _expm_action(apply, dt, out, abs(ci) * a_i.norm + abs(cf) * a_f.norm)
    return out


def _propagate_double_step(a_i, a_f, psi, alpha, tau):
    if a_i.dim <= 256:
        w, v = np.linalg.eigh((1.0 - alpha) * a_i.dense + alpha * a_f.dense)
        return v @ (np.exp(-1j * tau * w) * (v.conj().T @ psi))
    apply = lambda u: (1.0 - alpha) * (a_i @ u) + alpha * (a_f @ u)
    return _expm_action(apply, tau, psi.astype(complex), (1.0 - alpha) * a_i.norm + alpha * a_f.norm)


def _phase_distance(a, b):
    ov = np.vdot(a, b)
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    return float(np.linalg.norm(b - phase * a))


def propagate(h_i, h_f, psi, schedule: Schedule, tau: float, steps: int | None = None,
              tol: float | None = DEFAULT_TOL, max_steps: int = MAX_STEPS_FULL, method: str = "cfm4"):
    """Evolve `psi` under ``(1 - f) h_i + f h_f`` from s = 0 to 1.

    ``h_i`` and ``h_f`` are arrays or `HermitianOperator` objects; exact
    low-rank factorizations are used for matrix-vector products.

    ``method`` is ``"cfm4"`` (fourth-order commutator-free Magnus, two
    exponentials per step) or ``"midpoint"`` (exponential midpoint rule).
    Both apply exact exponentials of Hermitian matrices, so each step is
    unitary. With ``tol`` set, the step count is doubled until the
    phase-invariant difference between successive runs, divided by
    ``2^order - 1``, is below ``tol`` or ``max_steps`` is reached.

    Returns
    -------
    state, steps_used, error_estimate, degraded
    """
    tau = float(tau)
    if tau < 0:
        raise ValueError("tau must be >= 0")
    a_i, a_f = _Applicator(h_i), _Applicator(h_f)
    psi = np.asarray(psi, dtype=complex)
    if tau == 0.0:
        return psi.copy(), 0, 0.0, False
    if schedule.kind == "double_step":
        out = _propagate_double_step(a_i, a_f, psi, schedule.params["alpha"], tau)
        return out, 1, 0.0, False
    if steps is None:
        steps = default_steps(tau)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if method not in _RULES:
        raise ValueError(f"unknown method {method!r}")
    richardson = 2.0 ** _ORDER[method] - 1.0
    out = _propagate_smooth(a_i, a_f, psi, schedule, tau, steps, method)
    if tol is None:
        return out, steps, float("nan"), False
    err = float("inf")
    while 2 * steps <= max_steps:
        finer = _propagate_smooth(a_i, a_f, psi, schedule, tau, 2 * steps, method)
        err = _phase_distance(out, finer) / richardson
        out, steps = finer, 2 * steps
        if err <= tol:
            return out, steps, err, False
    return out, steps, err, True


# ---------------------------------------------------------------- results


def _finalize(instance: SearchInstance, state, tau, steps, mode, err=0.0, degraded=False) -> EvolutionResult:
    sf = instance.spectral_final
    pg = sf.ground_basis
    amp_vec = pg.conj().T @ state
    amp = float(np.linalg.norm(amp_vec))
    outside = state - pg @ amp_vec
    nrm = float(np.linalg.norm(state))
    return EvolutionResult(
        final_state=state,
        success_probability=amp ** 2,
        success_amplitude=amp,
        survival=float(abs(np.vdot(instance.psi_initial, state))),
        range_overlap=instance.range_overlap(state),
        dist_to_ground=float(np.linalg.norm(outside)),
        tau=float(tau),
        step_count=int(steps),
        norm_drift=abs(nrm - 1.0),
        mode=mode,
        error_estimate=float(err),
        degraded=bool(degraded),
    )


def evolve_double_step(instance: SearchInstance, tau: float) -> EvolutionResult:
    """Exact double-step evolution ``exp(-i alpha tau (E_F P_I + H_F)) psi_I``.

    Computed in the (m+1)-dimensional reduced basis. The result differs from
    the Schrodinger solution with ``H_I = -P_I`` by a global phase only.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    basis = build_reduced_basis(instance)
    e = basis.vectors
    psi_r = e.conj().T @ instance.psi_initial
    E_F = instance.E_F
    alpha = 1.0 / (1.0 - E_F)
    gen = E_F * np.outer(psi_r, psi_r.conj()) + np.diag(np.append(basis.labels, 0.0))
    w, v = np.linalg.eigh((gen + gen.conj().T) / 2)
    out_r = v @ (np.exp(-1j * alpha * tau * w) * (v.conj().T @ psi_r))
    return _finalize(instance, e @ out_r, tau, 1, "double_step")


def evolve_full(instance: SearchInstance, schedule: Schedule, tau: float, steps: int | None = None,
                tol: float | None = DEFAULT_TOL, max_steps: int = MAX_STEPS_FULL,
                method: str = "cfm4") -> EvolutionResult:
    """Integrate in the full N-dimensional space."""
    state, n, err, bad = propagate(instance.h_initial, instance.h_final,
                                   instance.psi_initial, schedule, tau, steps, tol, max_steps, method)
    return _finalize(instance, state, tau, n, "full", err, bad)


def evolve_reduced(instance: SearchInstance, schedule: Schedule, tau: float, steps: int | None = None,
                   tol: float | None = DEFAULT_TOL, max_steps: int = MAX_STEPS_REDUCED,
                   method: str = "cfm4") -> EvolutionResult:
    """Integrate the projection onto span(Range H_F, psi_I), which is invariant."""
    basis = build_reduced_basis(instance)
    h_i, h_f, psi_r = _reduced_operators(instance, basis)
    state_r, n, err, bad = propagate(h_i, h_f, psi_r, schedule, tau, steps, tol, max_steps, method)
    return _finalize(instance, basis.vectors @ state_r, tau, n, "reduced", err, bad)


def evolve(instance: SearchInstance, schedule: Schedule, tau: float, mode: str = "reduced", **kw) -> EvolutionResult:
    if mode == "full":
        return evolve_full(instance, schedule, tau, **kw)
    if mode == "reduced":
        return evolve_reduced(instance, schedule, tau, **kw)
    if mode == "double_step":
        return evolve_double_step(instance, tau)
    raise ValueError(f"unknown mode {mode!r}")


def survival_amplitude(instance: SearchInstance, t) -> complex | np.ndarray:
    """``<psi_I| exp(i t (H_F - E_F)) |psi_I>`` from the spectral weights of H_F."""
    sf = instance.spectral_final
    weights = sf.weights(instance.psi_initial)
    shifts = sf.eigenvalues - sf.ground_energy
    t = np.asarray(t, dtype=float)
    val = np.exp(1j * t[..., None] * shifts) @ weights
    return complex(val) if val.ndim == 0 else val
