import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hblab import records
from hblab.bounds import bound_report, robust_inputs
from hblab.counting import estimate_overlap, make_plan
from hblab.evolution import evolve
from hblab.operators import grover_instance
from hblab.schedules import linear_schedule, robustness_profile, smooth_bump_schedule
from hblab.spectral import certify_gap_bound, decompose_K, gap_profile


def _equal(a, b):
    if isinstance(a, np.ndarray):
        return isinstance(b, np.ndarray) and a.dtype == b.dtype and a.shape == b.shape and \
            np.array_equal(a, b, equal_nan=True)
    if hasattr(a, "__dataclass_fields__"):
        return type(a) is type(b) and all(_equal(getattr(a, k), getattr(b, k)) for k in a.__dataclass_fields__)
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(_equal(a[k], b[k]) for k in a)
    if isinstance(a, (list, tuple)):
        return type(a) is type(b) and len(a) == len(b) and all(_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, float) and math.isnan(a):
        return isinstance(b, float) and math.isnan(b)
    return a == b and type(a) is type(b)


def _objects():
    inst = grover_instance(64, m=2)
    plan = make_plan(64, 1.0)
    return [
        evolve(inst, linear_schedule(), 3.0),
        plan,
        estimate_overlap(inst, plan),
        gap_profile(inst, linear_schedule(), 17),
        certify_gap_bound(grover_instance(256, m=1), 17),
        decompose_K(inst, inst.E_I + 0.1),
        bound_report(inst),
        robust_inputs(2 / 3, 1e-7, 1),
        robustness_profile(smooth_bump_schedule()),
        inst.overlaps,
    ]


@pytest.mark.parametrize("obj", _objects(), ids=lambda o: type(o).__name__)
def test_round_trip_domain_records(obj):
    text = records.dumps(obj)
    back = records.loads(text)
    assert _equal(obj, back)
    assert records.dumps(back) == text


def test_complex_arrays_and_scalars():
    obj = {"a": np.array([[1 + 2j, -0.5j]]), "z": 3 - 1j, "t": (1, 2.5), "i": np.int64(4)}
    back = records.loads(records.dumps(obj))
    assert back["a"].dtype == np.complex128 and np.array_equal(back["a"], obj["a"])
    assert back["z"] == 3 - 1j and back["t"] == (1, 2.5) and back["i"] == 4


def test_dumps_is_sorted_and_stable():
    a = records.dumps({"b": 1, "a": [2.0, 3.0]})
    assert a == records.dumps({"a": [2.0, 3.0], "b": 1})
    assert a.index('"a"') < a.index('"b"')


@given(x=st.floats(allow_nan=False, allow_infinity=True))
def test_fmt_round_trips_doubles(x):
    assert float(records.fmt(x)) == x


def test_fmt_special_values():
    assert records.fmt(True) == "1"
    assert records.fmt(None) == ""
    assert records.fmt(7) == "7"
    assert records.fmt(0.1) == "0.10000000000000001"


def test_csv_round_trip():
    text = records.csv_text(("s", "gap"), [(0.0, 1.0), (0.5, 0.25)])
    header, rows = records.read_csv(text)
    assert header == ["s", "gap"]
    assert [[float(v) for v in r] for r in rows] == [[0.0, 1.0], [0.5, 0.25]]
