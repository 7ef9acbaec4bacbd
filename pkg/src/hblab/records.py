"""Lossless JSON records for result dataclasses, plus fixed-precision CSV."""
from __future__ import annotations

import dataclasses
import io
import json
import math

import numpy as np

from .bounds import (BoundReport, Thm1Report, Thm5Report, ScalingReport, AdiabaticScan,
                     RobustBoundInputs)
from .counting import CountingPlan, CountingResult
from .evolution import EvolutionResult
from .operators import Overlaps
from .schedules import RobustnessProfile
from .spectral import GapProfile, KreinReport, Bracket, KDecomposition

TYPES = {cls.__name__: cls for cls in (
    EvolutionResult, CountingPlan, CountingResult, GapProfile, KreinReport, Bracket,
    KDecomposition, BoundReport, Thm1Report, Thm5Report, ScalingReport, AdiabaticScan,
    RobustBoundInputs, RobustnessProfile, Overlaps,
)}


def encode(obj):
    """Convert a result object into JSON-ready primitives, tagging non-JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        body = {f.name: encode(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        return {"__type__": type(obj).__name__, **body}
    if isinstance(obj, np.ndarray):
        rec = {"__ndarray__": obj.dtype.str, "shape": list(obj.shape)}
        flat = obj.ravel()
        if np.iscomplexobj(obj):
            rec["real"], rec["imag"] = flat.real.tolist(), flat.imag.tolist()
        else:
            rec["data"] = flat.tolist()
        return rec
    if isinstance(obj, tuple):
        return {"__tuple__": [encode(x) for x in obj]}
    if isinstance(obj, list):
        return [encode(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): encode(v) for k, v in obj.items()}
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, complex):
        return {"__complex__": [obj.real, obj.imag]}
    return obj


def decode(rec):
    """Inverse of `encode`."""
    if isinstance(rec, list):
        return [decode(x) for x in rec]
    if not isinstance(rec, dict):
        return rec
    if "__ndarray__" in rec:
        dt = np.dtype(rec["__ndarray__"])
        if "real" in rec:
            flat = np.array(rec["real"], float) + 1j * np.array(rec["imag"], float)
        else:
            flat = np.array(rec["data"])
        return flat.astype(dt).reshape(rec["shape"])
    if "__tuple__" in rec:
        return tuple(decode(x) for x in rec["__tuple__"])
    if "__complex__" in rec:
        return complex(*rec["__complex__"])
    if "__type__" in rec:
        cls = TYPES[rec["__type__"]]
        kwargs = {k: decode(v) for k, v in rec.items() if k != "__type__"}
        return cls(**kwargs)
    return {k: decode(v) for k, v in rec.items()}


def dumps(obj) -> str:
    return json.dumps(encode(obj), sort_keys=True, indent=1) + "\n"


def loads(text: str):
    return decode(json.loads(text))


def fmt(x) -> str:
    """17 significant digits; enough to round-trip any double."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def read_csv(text: str):
    lines = [ln for ln in text.splitlines() if ln]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows
