import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from hblab.schedules import (
    custom_schedule, double_step_schedule, linear_schedule, load_schedule, robustness_profile,
    schedule_from_dict, smooth_bump_schedule, table_schedule, verify_concavity_relation,
)

GRID = np.linspace(0.0, 1.0, 1001)


def all_schedules():
    return [linear_schedule(), smooth_bump_schedule(), double_step_schedule(-1.0),
            double_step_schedule(-0.5), table_schedule([[0, 0], [0.3, 0.6], [0.7, 0.7], [1, 1]])]


@pytest.mark.parametrize("sched", all_schedules(), ids=lambda s: s.kind)
def test_endpoints_range_and_monotone(sched):
    f = sched(GRID)
    assert f[0] == 0.0
    assert f[-1] == pytest.approx(1.0, abs=1e-8)
    assert np.all((f >= 0) & (f <= 1))
    assert np.all(np.diff(f) >= -1e-10)


@given(s1=st.floats(0, 1), s2=st.floats(0, 1), idx=st.integers(0, 4))
def test_monotone_pairs(s1, s2, idx):
    sched = all_schedules()[idx]
    lo, hi = sorted((s1, s2))
    assert sched(lo) <= sched(hi) + 1e-10


def test_linear_values():
    lin = linear_schedule()
    assert lin(0.5) == 0.5
    assert lin.derivative(0.25) == 1.0


def test_linear_profile_clamped():
    prof = robustness_profile(linear_schedule())
    assert prof.a == pytest.approx(1 / 3, abs=1e-10)
    assert prof.kappa == 1.0
    assert prof.branch == "clamped"
    assert prof.J == (prof.a, prof.a)


def test_double_step_plateau():
    assert double_step_schedule(-1.0).params["alpha"] == 0.5
    assert double_step_schedule(-0.5).params["alpha"] == pytest.approx(2 / 3)
    assert double_step_schedule(-1.0)(0.73) == 0.5
    with pytest.raises(ValueError):
        double_step_schedule(0.0)


@given(E_F=st.floats(-1.0, -1e-6))
def test_double_step_phase_identity(E_F):
    a = double_step_schedule(E_F).params["alpha"]
    assert 1 - a == pytest.approx(-E_F * a, abs=1e-12)


def test_double_step_profile_non_c1():
    prof = robustness_profile(double_step_schedule(-1.0))
    assert prof.branch == "non_c1"
    assert prof.J[1] == 1.0
    assert prof.kappa == 0.0


def test_bump_normalization_matches_adaptive_quadrature():
    sb = smooth_bump_schedule()
    assert sb(1.0) == pytest.approx(1.0, abs=1e-8)
    ref, _ = quad(lambda s: np.exp(1 / (s * (s - 1))), 0, 1, epsabs=0, epsrel=1e-12, limit=200)
    assert 1 / sb.params["alpha"] == pytest.approx(ref, rel=1e-10)
    assert sb.params["alpha"] == pytest.approx(sb.params["alpha_quad"], rel=1e-10)


def test_bump_values_against_quad():
    sb = smooth_bump_schedule()
    z = 1 / sb.params["alpha"]
    for t in (0.1, 0.3, 0.5, 0.77, 0.95):
        ref, _ = quad(lambda s: np.exp(1 / (s * (s - 1))), 0, t, epsabs=0, epsrel=1e-12) / np.array(z)
        assert sb(t) == pytest.approx(ref, rel=1e-9, abs=1e-14)


def test_bump_symmetry_and_midpoint():
    sb = smooth_bump_schedule()
    s = np.linspace(0, 1, 101)
    assert np.allclose(sb(s) + sb(1 - s), 1.0, atol=1e-12)
    assert sb(0.5) == pytest.approx(0.5, abs=1e-13)


def test_bump_derivative_matches_finite_difference():
    sb = smooth_bump_schedule()
    s = np.linspace(0.05, 0.95, 181)
    h = 1e-5
    fd = (sb(s + h) - sb(s - h)) / (2 * h)
    assert np.max(np.abs(fd - sb.derivative(s)) / np.abs(sb.derivative(s))) <= 1e-4


def test_bump_profile_worked_example():
    prof = robustness_profile(smooth_bump_schedule())
    assert prof.b == pytest.approx(0.5, rel=0.02)
    assert prof.kappa == pytest.approx(2 / 3, rel=0.02)
    assert 0 < prof.a < 0.5
    a_ref = brentq(lambda t: smooth_bump_schedule()(t) - 1 / 3, 0.01, 0.5, xtol=1e-14)
    assert prof.a == pytest.approx(a_ref, abs=1e-9)
    assert prof.branch == "concave_tail"


def test_bump_profile_invariants():
    sb = smooth_bump_schedule()
    prof = robustness_profile(sb)
    inside = np.linspace(prof.J[0], prof.J[1], 500)
    assert np.all(prof.kappa <= sb.derivative(inside) + 1e-8)
    assert prof.kappa_infimum == pytest.approx(float(sb.derivative(prof.a)), rel=1e-9)
    tail = np.linspace(prof.b, 1, 2001)
    f = sb(tail)
    assert np.all(f[2:] - 2 * f[1:-1] + f[:-2] <= 1e-8)


@pytest.mark.parametrize("sched", [smooth_bump_schedule(), linear_schedule()], ids=lambda s: s.kind)
def test_concavity_relation_holds(sched):
    rep = verify_concavity_relation(sched, samples=1000)
    assert rep.passed
    assert rep.samples == 1000


def test_concavity_relation_linear_is_equality():
    t = np.linspace(0, 1, 11)
    lin = linear_schedule()
    assert np.allclose(1 - lin(t), lin.derivative(t) * (1 - t))
    assert verify_concavity_relation(lin, interval=(0.0, 1.0)).passed


def test_concavity_relation_flags_convex_tail():
    sq = custom_schedule(lambda s: s ** 2, lambda s: 2 * s, lambda s: 2 + 0 * s, name="square")
    rep = verify_concavity_relation(sq, samples=11, interval=(0.5, 1.0))
    assert not rep.passed
    hit = [v for v in rep.violations if abs(v[0] - 0.9) < 1e-12]
    lhs, rhs = hit[0][1], hit[0][2]
    assert lhs == pytest.approx(0.19) and rhs == pytest.approx(0.18)


def test_concavity_relation_needs_differentiable():
    with pytest.raises(ValueError):
        verify_concavity_relation(double_step_schedule(-1.0))


def test_table_schedule_interpolates_and_validates():
    tab = table_schedule([[0, 0], [0.5, 0.8], [1, 1]])
    assert tab(0.25) == pytest.approx(0.4)
    assert tab.derivative(0.75) == pytest.approx(0.4)
    with pytest.raises(ValueError):
        table_schedule([[0, 0], [0.5, 0.9], [0.6, 0.2], [1, 1]])
    with pytest.raises(ValueError):
        table_schedule([[0, 0], [0.5, 0.5]])


def test_custom_schedule_rejects_bad_endpoints():
    with pytest.raises(ValueError):
        custom_schedule(lambda s: 0.5 * s, lambda s: 0.5 + 0 * s)


def test_schedule_round_trip(tmp_path):
    for sched in all_schedules():
        spec = sched.to_dict()
        back = schedule_from_dict(spec)
        assert np.allclose(back(GRID), sched(GRID))
        path = tmp_path / f"{sched.kind}.json"
        path.write_text(__import__("json").dumps(spec))
        assert np.allclose(load_schedule(path)(GRID), sched(GRID))


def test_schedule_from_dict_rejects_unknown():
    with pytest.raises(ValueError):
        schedule_from_dict({"kind": "linear", "speed": 2})
    with pytest.raises(ValueError):
        schedule_from_dict({"kind": "cubic"})
