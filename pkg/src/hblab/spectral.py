"""Gap profiles of H(s) and Krein-formula analysis of H_I + t H_F.

On Range H_F (orthonormal basis U, H_F restricted to diag(lambda)), the
compressed resolvent is

    K(E) = U^H (H_I - E)^{-1} U = sum_n C_n^H C_n / (E_n - E),

with C_n = B_n^H U for the eigenspace bases B_n of H_I. Eigenvalues of
H_t = H_I + t H_F outside sigma(H_I) are exactly the E where
K^{-1}(E) + t diag(lambda) is singular.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .operators import SearchInstance, DEGENERACY_TOL
from .schedules import Schedule, linear_schedule

POLE_TOL = 1e-10
ONE_SIDED = 1e-7  # E_I +- ONE_SIDED * g_I stands in for E_I +- 0
SQRT_FLOOR = 1e-12


# ---------------------------------------------------------------- gap profile


def dynamical_subspace(instance: SearchInstance, tol: float = 1e-10) -> np.ndarray:
    """Smallest subspace containing psi_I that is invariant under H_I and H_F.

    Every H(s) leaves it invariant, so the evolution from psi_I never leaves
    it and only gaps inside it matter for the dynamics.
    """
    basis = instance.psi_initial[:, None].astype(complex)
    new = basis
    mats = (instance.h_initial.matrix, instance.h_final.matrix)
    while new.shape[1]:
        cand = np.hstack([m @ new for m in mats])
        for _ in range(2):
            cand = cand - basis @ (basis.conj().T @ cand)
        u, sv, _ = np.linalg.svd(cand, full_matrices=False)
        new = u[:, sv > tol * max(1.0, sv[0] if sv.size else 1.0)]
        basis = np.hstack([basis, new])
    return basis


def _lowest_two(h, tol):
    w = np.linalg.eigvalsh(h)
    lam1 = w[0]
    above = w[w > lam1 + tol]
    lam2 = above[0] if above.size else np.inf
    return lam1, lam2


@dataclass(frozen=True)
class GapProfile:
    s: np.ndarray
    lambda1: np.ndarray
    lambda2: np.ndarray
    gap: np.ndarray
    min_gap: float
    min_location: float
    grid: dict = field(default_factory=dict)

    def rows(self):
        return np.column_stack([self.s, self.lambda1, self.lambda2, self.gap])


def gap_profile(instance: SearchInstance, schedule: Schedule | None = None, grid_points: int = 257,
                subspace: str = "dynamical", degeneracy_tol: float = DEGENERACY_TOL) -> GapProfile:
    """Sample g(s) = lambda_2(s) - lambda_1(s) and refine its minimum.

    ``subspace="dynamical"`` diagonalizes H(s) on `dynamical_subspace`;
    ``"full"`` uses the whole space, where degenerate marked states that never
    couple to psi_I can close the gap at s = 1.
    """
    if grid_points < 16:
        raise ValueError("grid_points must be >= 16")
    schedule = schedule or linear_schedule()
    if subspace == "dynamical":
        w = dynamical_subspace(instance)
        h_i = w.conj().T @ instance.h_initial.matrix @ w
        h_f = w.conj().T @ instance.h_final.matrix @ w
    elif subspace == "full":
        h_i, h_f = instance.h_initial.matrix, instance.h_final.matrix
    else:
        raise ValueError(f"unknown subspace {subspace!r}")
    h_i, h_f = (h_i + h_i.conj().T) / 2, (h_f + h_f.conj().T) / 2

    def at(s):
        f = float(schedule(s))
        return _lowest_two((1.0 - f) * h_i + f * h_f, degeneracy_tol)

    s = np.linspace(0.0, 1.0, grid_points)
    pairs = np.array([at(x) for x in s])
    lam1, lam2 = pairs[:, 0], pairs[:, 1]
    gap = lam2 - lam1
    k = int(np.argmin(gap))
    g_min, s_min = float(gap[k]), float(s[k])
    refined = False
    if 0 < k < grid_points - 1:
        def gfun(x):
            l1, l2 = at(min(max(x, 0.0), 1.0))
            return l2 - l1
        res = minimize_scalar(gfun, bracket=(s[k - 1], s[k], s[k + 1]), method="golden",
                              options={"xtol": 1e-9})
        if res.fun <= g_min:
            g_min, s_min, refined = float(res.fun), float(res.x), True
    return GapProfile(s, lam1, lam2, gap, g_min, s_min,
                      {"points": grid_points, "subspace": subspace, "refined": refined,
                       "schedule": schedule.kind})


# ---------------------------------------------------------------- Krein


def _range_data(instance):
    sf = instance.spectral_final
    return sf.range_basis, sf.range_labels


def _resolvent_terms(instance):
    """Pairs (E_n, C_n^H C_n) for every distinct eigenvalue of H_I."""
    u, _ = _range_data(instance)
    si = instance.spectral_initial
    terms, implicit = [], None
    for n, e in enumerate(si.eigenvalues):
        b = si.blocks[n]
        if b is None:
            implicit = n
            continue
        c = b.conj().T @ u
        terms.append((float(e), c.conj().T @ c))
    if implicit is not None:
        rest = np.eye(u.shape[1]) - sum(t[1] for t in terms)
        terms.append((float(si.eigenvalues[implicit]), rest))
    return terms


def _check_off_spectrum(instance, E):
    d = np.min(np.abs(instance.spectral_initial.eigenvalues - E))
    if d < POLE_TOL:
        raise ValueError(f"E={E} is within {POLE_TOL} of sigma(H_I)")


def krein_K(instance: SearchInstance, E: float) -> np.ndarray:
    """``K(E) = Q_F (H_I - E)^{-1} Q_F`` in an orthonormal basis of Range H_F."""
    _check_off_spectrum(instance, E)
    k = sum(w / (e - E) for e, w in _resolvent_terms(instance))
    return (k + k.conj().T) / 2


def k_hat(instance: SearchInstance, E: float, derivative: bool = False) -> np.ndarray:
    """K(E) without the ground-state pole of H_I (or its E-derivative)."""
    E_I = instance.E_I
    power = 2 if derivative else 1
    k = sum(w / (e - E) ** power for e, w in _resolvent_terms(instance) if e != E_I)
    if isinstance(k, int):
        k = np.zeros((instance.rank_final, instance.rank_final))
    return (k + k.conj().T) / 2


@dataclass(frozen=True)
class KDecomposition:
    K_hat: np.ndarray
    D: np.ndarray
    delta4: float
    E: float
    lower: float  # 2/(4+g_I) - delta4^2
    upper: float  # 2/g_I
    deriv_lower: float  # 4/(4+g_I)^2 - delta4^2
    deriv_upper: float  # 4/g_I^2
    bounds_hold: bool
    deriv_bounds_hold: bool


def decompose_K(instance: SearchInstance, E: float) -> KDecomposition:
    """Split K(E) into K_hat(E) + delta4^2 D / (E_I - E) and check its brackets."""
    E_I, g_I = instance.E_I, instance.g_I
    if E == E_I or abs(E - E_I) > g_I / 2 + 1e-15:
        raise ValueError("E must lie in [E_I - g_I/2, E_I + g_I/2] and differ from E_I")
    d4 = instance.overlaps.delta4
    ground = [w for e, w in _resolvent_terms(instance) if e == E_I]
    pole = ground[0] if ground else np.zeros((instance.rank_final,) * 2)
    D = pole / d4 ** 2 if d4 > 0 else np.zeros_like(pole)
    kh = k_hat(instance, E)
    dkh = k_hat(instance, E, derivative=True)
    lo, hi = 2 / (4 + g_I) - d4 ** 2, 2 / g_I
    dlo, dhi = 4 / (4 + g_I) ** 2 - d4 ** 2, 4 / g_I ** 2
    ev, dev = np.linalg.eigvalsh(kh), np.linalg.eigvalsh(dkh)
    slack = 1e-10
    return KDecomposition(
        kh, (D + D.conj().T) / 2, d4, float(E), lo, hi, dlo, dhi,
        bool(ev.min() >= lo - slack and ev.max() <= hi + slack),
        bool(dev.min() >= dlo - slack and dev.max() <= dhi + slack),
    )


def _sqrtm_pd(a):
    w, v = np.linalg.eigh(a)
    if w.min() <= SQRT_FLOOR:
        raise ValueError("K_hat(E_I) is not positive definite")
    return (v * np.sqrt(w)) @ v.conj().T


def crossing_times(instance: SearchInstance):
    """Roots t_j > 0 of det(K_hat^{-1}(E_I) + t H_F) = 0.

    Returns
    -------
    times : ascending array of the m_+ roots
    m_plus : number of negative eigenvalues of H_F
    """
    a = k_hat(instance, instance.E_I)
    root = _sqrtm_pd(a)
    _, lam = _range_data(instance)
    mu = np.linalg.eigvalsh(root @ np.diag(lam) @ root)
    neg = mu[mu < 0]
    times = np.sort(-1.0 / neg)
    return times, int(np.sum(lam < 0))


def t_to_s(t):
    return np.asarray(t) / (1.0 + np.asarray(t))


def s_to_t(s):
    s = np.asarray(s)
    return s / (1.0 - s)


# ---------------------------------------------------------------- root finding


def _inv_hf(instance, t):
    _, lam = _range_data(instance)
    return np.diag(1.0 / (t * lam))


def _n_matrix(instance, E, t):
    """Hermitian K(E) + (t H_F)^{-1}; singular exactly where K^{-1} + t H_F is."""
    return krein_K(instance, E) + _inv_hf(instance, t)


def _negatives(instance, E, t):
    return int(np.sum(np.linalg.eigvalsh(_n_matrix(instance, E, t)) < 0))


def _roots_between(instance, t, lo, hi, xtol=1e-13):
    """Roots of det(K^{-1}(E) + t H_F) in [lo, hi], a pole-free interval.

    Every sorted eigenvalue of K(E) + (t H_F)^{-1} increases with E there,
    so each branch crosses zero at most once.
    """
    ev_lo = np.linalg.eigvalsh(_n_matrix(instance, lo, t))
    ev_hi = np.linalg.eigvalsh(_n_matrix(instance, hi, t))
    roots = []
    for j in range(len(ev_lo)):
        if ev_lo[j] < 0 < ev_hi[j]:
            fj = lambda E, j=j: float(np.linalg.eigvalsh(_n_matrix(instance, E, t))[j])
            roots.append(brentq(fj, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))
        elif ev_lo[j] == 0.0:
            roots.append(lo)
    return sorted(roots)


def krein_eigenvalues(instance: SearchInstance, t: float, margin: float = 1e-9) -> np.ndarray:
    """Eigenvalues of H_I + t H_F outside sigma(H_I), located via Krein's formula."""
    if t <= 0:
        raise ValueError("t must be positive")
    poles = instance.spectral_initial.eigenvalues
    bound = 1.0 + t + 0.5
    edges = np.concatenate([[-bound], poles, [bound]])
    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        a = lo + margin * max(1.0, abs(lo)) if lo != -bound else lo
        b = hi - margin * max(1.0, abs(hi)) if hi != bound else hi
        if a < b:
            roots.extend(_roots_between(instance, t, a, b))
    return np.array(roots)


def smallest_modulus_eigenvalue(instance: SearchInstance, E: float, t: float) -> float:
    """Smallest |eigenvalue| of K^{-1}(E) + t H_F."""
    _, lam = _range_data(instance)
    m = np.linalg.inv(krein_K(instance, E)) + t * np.diag(lam)
    return float(np.min(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))


def negative_index(instance: SearchInstance, E: float, t: float) -> int:
    """Number of negative eigenvalues of K^{-1}(E) + t H_F."""
    _, lam = _range_data(instance)
    m = np.linalg.inv(krein_K(instance, E)) + t * np.diag(lam)
    return int(np.sum(np.linalg.eigvalsh((m + m.conj().T) / 2) < 0))


# ---------------------------------------------------------------- certificate


def beta_width(delta4: float, g_I: float) -> float:
    """Half-width 2 (delta4^2 / (4/(4+g_I)^2 - delta4^2))^{1/2} of the root windows."""
    den = 4.0 / (4.0 + g_I) ** 2 - delta4 ** 2
    if den <= 0:
        return float("inf")
    return 2.0 * math.sqrt(delta4 ** 2 / den)


@dataclass(frozen=True)
class Bracket:
    t: float
    s: float
    left_root: float | None
    right_root: float | None
    left_residual: float | None
    right_residual: float | None
    index_left_window: int
    index_right_limit: int

    @property
    def ok(self) -> bool:
        return self.left_root is not None and self.right_root is not None


@dataclass(frozen=True)
class KreinReport:
    A: np.ndarray
    crossing_times: np.ndarray
    crossing_s: np.ndarray
    m_plus: int
    beta: float
    delta4: float
    gI: float
    certified_bound: float
    hypothesis: bool
    beta_below_5delta4: bool
    bracketing: list
    dense_min_gap: float
    dense_min_location: float
    certified: bool
    mode: str  # "certificate" or "advisory"


def certify_gap_bound(instance: SearchInstance, grid_points: int = 257) -> KreinReport:
    """Check the ``g <= 10 delta4`` gap bound through its Krein-formula argument.

    For each crossing time, roots of det(K^{-1}(E) + t_j H_F) are bracketed in
    [E_I - beta, E_I) and (E_I, E_I + beta] by counting negative eigenvalues of
    K(E) + (t_j H_F)^{-1} at the window ends. Without ``g_I > 10 delta4`` the
    report is advisory.
    """
    E_I, g_I, d4 = instance.E_I, instance.g_I, instance.overlaps.delta4
    hypothesis = g_I > 10 * d4
    beta = beta_width(d4, g_I)
    A = k_hat(instance, E_I)
    times, m_plus = crossing_times(instance)
    eps = ONE_SIDED * g_I
    window = min(beta, g_I / 2) if math.isfinite(beta) else g_I / 2
    brackets = []
    for t in np.unique(np.round(times, 12)):
        lo_r = _roots_between(instance, t, E_I - window, E_I - eps)
        hi_r = _roots_between(instance, t, E_I + eps, E_I + window)
        left = lo_r[-1] if lo_r else None
        right = hi_r[0] if hi_r else None
        brackets.append(Bracket(
            float(t), float(t_to_s(t)), left, right,
            smallest_modulus_eigenvalue(instance, left, t) if left is not None else None,
            smallest_modulus_eigenvalue(instance, right, t) if right is not None else None,
            negative_index(instance, E_I - window, t), negative_index(instance, E_I + eps, t),
        ))
    profile = gap_profile(instance, linear_schedule(), grid_points)
    below = beta < 5 * d4
    certified = bool(hypothesis and below and brackets and all(b.ok for b in brackets)
                     and window == beta)
    return KreinReport(
        A, times, t_to_s(times), m_plus, beta, d4, g_I, 10 * d4, bool(hypothesis), bool(below),
        brackets, profile.min_gap, profile.min_location, certified,
        "certificate" if hypothesis else "advisory",
    )
