"""File-driven experiment runner: ``hblab <verb> [flags]``.

Exit status: 0 success (advisory warnings included), 1 invariant violated,
2 malformed configuration or missing input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import records
from .bounds import (GAMMA, BoundNotApplicable, bound_report, tau_lower_bound, tau_upper_time,
                     verify_thm1, SoundnessLog, first_success_tau)
from .counting import make_plan, estimate_overlap, offset_sensitivity
from .evolution import evolve
from .operators import grover_instance, instance_from_dict
from .schedules import (schedule_from_dict, linear_schedule, smooth_bump_schedule,
                        double_step_schedule)
from .spectral import gap_profile, certify_gap_bound

OK, VIOLATION, BAD_CONFIG, NUMERICAL = 0, 1, 2, 3
VERBS = ("build", "evolve", "count", "gapscan", "krein", "bounds", "verify", "sweep", "report")
CONFIG_KEYS = {"command", "instance_spec", "schedule_spec", "parameters", "output_dir", "seed"}
PARAMS = {
    "build": set(),
    "evolve": {"tau", "mode", "tol", "steps"},
    "count": {"gf", "ef_perturb"},
    "gapscan": {"grid", "subspace"},
    "krein": {"grid"},
    "bounds": {"c", "constant"},
    "verify": {"tau", "mode"},
    "sweep": {"sweep_command", "N", "m", "tau", "C", "schedule", "pairing", "grid", "mode"},
    "report": set(),
}
GAP_HEADER = ("s", "lambda1", "lambda2", "gap")
COUNT_ENVELOPE = 10.0


class ConfigError(Exception):
    pass


class NumericalFailure(Exception):
    pass


@dataclass
class Outcome:
    status: int = OK
    files: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def fail(self, code, msg):
        self.status = max(self.status, code)
        self.messages.append(msg)


# ---------------------------------------------------------------- loading


def _json_file(path, what):
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file is not valid JSON: {exc}") from exc


def _instance(cfg):
    path = cfg.get("instance_spec")
    if path is None:
        raise ConfigError("this command needs an instance")
    spec = _json_file(path, "instance")
    if not isinstance(spec, dict):
        raise ConfigError("instance spec must be a JSON object")
    if "seed" not in spec and cfg.get("seed") is not None:
        spec = {**spec, "seed": int(cfg["seed"])}
    try:
        return instance_from_dict(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad instance spec: {exc}") from exc


def _schedule(cfg, instance=None, default=None):
    path = cfg.get("schedule_spec")
    if path is None:
        return default
    spec = _json_file(path, "schedule")
    if isinstance(spec, dict) and spec.get("kind") == "double_step" and "E_F" not in spec and instance:
        spec = {**spec, "E_F": instance.E_F}
    try:
        return schedule_from_dict(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad schedule spec: {exc}") from exc


def _library(E_F):
    return [linear_schedule(), smooth_bump_schedule(), double_step_schedule(E_F)]


def _by_kind(kind, E_F):
    if kind == "linear":
        return linear_schedule()
    if kind == "smooth_bump":
        return smooth_bump_schedule()
    if kind == "double_step":
        return double_step_schedule(E_F)
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _mode(schedule, mode):
    return "double_step" if schedule.kind == "double_step" else (mode or "reduced")


def _floats(v, name):
    if isinstance(v, (int, float)):
        return [float(v)]
    if isinstance(v, str):
        v = [x for x in v.split(",") if x.strip()]
    try:
        return [float(x) for x in v]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number or a list of numbers") from exc


def _threads():
    raw = os.environ.get("HBLAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"HBLAB_THREADS must be an integer, got {raw!r}") from exc
    return max(1, n)


def _ordered_map(fn, items):
    """Map in parallel but return results in input order."""
    n = _threads()
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- verbs


def _instance_summary(inst):
    ov = inst.overlaps
    return {"N": inst.dim, "m": inst.rank_final, "m1": inst.m1, "E_I": inst.E_I, "E_F": inst.E_F,
            "g_I": inst.g_I, "g_F": inst.g_F, "overlaps": ov, "spec": inst.meta}


def _build(cfg, p, out):
    inst = _instance(cfg)
    out.files["instance.json"] = records.dumps(_instance_summary(inst))


def _evolve(cfg, p, out):
    inst = _instance(cfg)
    sched = _schedule(cfg, inst, linear_schedule())
    if "tau" not in p:
        raise ConfigError("evolve needs --tau")
    tau = float(p["tau"])
    mode = _mode(sched, p.get("mode"))
    kw = {}
    if mode != "double_step":
        if "tol" in p:
            kw["tol"] = float(p["tol"])
        if "steps" in p:
            kw["steps"] = int(p["steps"])
    res = evolve(inst, sched, tau, mode=mode, **kw)
    log = SoundnessLog()
    if not log.check(inst, res):
        out.fail(VIOLATION, f"success amplitude {res.success_amplitude:.6g} below the runtime lower bound")
    if res.degraded:
        out.fail(NUMERICAL, f"integrator tolerance not reached (estimate {res.error_estimate:.3g})")
    out.files["evolve.json"] = records.dumps({"result": res, "schedule": sched.to_dict(),
                                              "instance": inst.meta, "warnings": out.warnings})


def _count(cfg, p, out):
    inst = _instance(cfg)
    gf = float(p["gf"]) if p.get("gf") is not None else inst.g_F
    try:
        plan = make_plan(inst.dim, gf)
        res = estimate_overlap(inst, plan)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rec = {"result": res, "instance": inst.meta, "envelope": COUNT_ENVELOPE / inst.dim ** 2}
    if p.get("ef_perturb") is not None:
        rec["offset_sensitivity"] = offset_sensitivity(inst, plan, float(p["ef_perturb"]))
    if res.abs_error > rec["envelope"]:
        out.fail(VIOLATION, f"counting error {res.abs_error:.3g} exceeds 10/N^2")
    rec["warnings"] = out.warnings
    out.files["count.json"] = records.dumps(rec)


def _gapscan(cfg, p, out):
    inst = _instance(cfg)
    sched = _schedule(cfg, inst, linear_schedule())
    grid = int(p.get("grid", 257))
    if grid < 16:
        raise ConfigError("--grid must be >= 16")
    try:
        prof = gap_profile(inst, sched, grid, subspace=p.get("subspace", "dynamical"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out.files["gap.csv"] = records.csv_text(GAP_HEADER, prof.rows())
    out.files["gap.json"] = records.dumps(prof)


def _krein(cfg, p, out):
    inst = _instance(cfg)
    try:
        rep = certify_gap_bound(inst, int(p.get("grid", 257)))
    except ValueError as exc:
        raise NumericalFailure(str(exc)) from exc
    if not rep.hypothesis:
        out.warnings.append("g_I <= 10 delta4: advisory report, no certificate")
    else:
        if not rep.beta_below_5delta4:
            out.fail(VIOLATION, f"beta = {rep.beta:.6g} is not below 5 delta4 = {5 * rep.delta4:.6g}")
        if not all(b.ok for b in rep.bracketing):
            out.fail(VIOLATION, "a crossing time has no bracketed root pair")
    if rep.certified and rep.dense_min_gap > rep.certified_bound + 1e-9:
        out.fail(VIOLATION, "dense minimum gap exceeds the certified bound")
    out.files["krein.json"] = records.dumps({"report": rep, "warnings": out.warnings})


def _bounds(cfg, p, out):
    inst = _instance(cfg)
    sched = _schedule(cfg, inst, smooth_bump_schedule())
    if sched.kind == "double_step":
        sched = smooth_bump_schedule()
        out.warnings.append("double step has kappa = 0; robust bound evaluated for smooth_bump")
    rep = bound_report(inst, sched, float(p.get("constant", 1.0)))
    rec = {"report": rep}
    if p.get("c") is not None:
        try:
            rec["tau_upper_at_C"] = tau_upper_time(inst, float(p["c"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    flags = rep.hypothesis_flags
    if not flags["delta2_below_fifth"]:
        out.warnings.append("delta2 >= 1/5: lower bound inapplicable")
    if not flags["epsilon_below_one"]:
        out.warnings.append("epsilon >= 1: robust bound vacuous")
    if not flags["E_I_is_minus_one"]:
        out.warnings.append("E_I != -1: robust bound hypothesis fails")
    rec["warnings"] = out.warnings
    out.files["bounds.json"] = records.dumps(rec)


def _verify(cfg, p, out):
    inst = _instance(cfg)
    sched = _schedule(cfg, inst, None)
    schedules = [sched] if sched is not None else _library(inst.E_F)
    try:
        lower = tau_lower_bound(inst)
    except BoundNotApplicable:
        lower = None
        out.warnings.append("delta2 >= 1/5: lower bound inapplicable, tables only")
    if "tau" in p:
        grid = _floats(p["tau"], "tau")
    elif lower is not None:
        grid = [lower * x for x in (0.1, 0.25, 0.5, 0.75, 0.99)]
    else:
        raise ConfigError("verify needs --tau when the lower bound is inapplicable")
    if not grid:
        raise ConfigError("empty tau grid")
    for s in schedules:
        md = _mode(s, p.get("mode"))
        rows = []
        for tau in grid:
            r = evolve(inst, s, tau, mode=md)
            rows.append((tau, r.success_amplitude, r.survival, r.dist_to_ground))
        out.files[f"verify_{s.kind}.csv"] = records.csv_text(
            ("tau", "success_amplitude", "survival", "dist_to_ground"), rows)
    if lower is None:
        return
    rep = verify_thm1(inst, schedules, grid, mode=p.get("mode") or "reduced")
    if rep.violations:
        out.fail(VIOLATION, f"{len(rep.violations)} runs succeed below the lower bound")
    bad = [k for k, v in rep.ratios.items() if v is not None and v < 1.0]
    if bad:
        out.fail(VIOLATION, f"threshold below the lower bound for {bad}")
    rows = [(k, lower, rep.tau_star[k], rep.ratios[k]) for k in rep.tau_star]
    out.files["thm1.csv"] = records.csv_text(("schedule", "tau_lower", "tau_star", "tau_star_over_tau_lower"), rows)
    out.files["verify.json"] = records.dumps({"report": rep, "warnings": out.warnings})


# ---------------------------------------------------------------- sweep


def _range(v, name):
    if isinstance(v, dict):
        if set(v) == {"linspace"}:
            a, b, n = v["linspace"]
            vals = np.linspace(a, b, int(n)).tolist()
        elif set(v) == {"geomspace"}:
            a, b, n = v["geomspace"]
            vals = np.geomspace(a, b, int(n)).tolist()
        elif set(v) == {"pow2"}:
            a, b = v["pow2"]
            vals = [2 ** k for k in range(int(a), int(b) + 1)]
        else:
            raise ConfigError(f"bad range for {name}: {v}")
    elif isinstance(v, list):
        vals = v
    else:
        vals = [v]
    if not vals:
        raise ConfigError(f"empty range for {name}")
    return vals


def _m_value(m, N):
    if m == "sqrtN":
        return int(round(math.sqrt(N)))
    return int(m)


def _sweep_point(cmd, pt, p):
    N = int(pt["N"])
    inst = grover_instance(N, m=_m_value(pt.get("m", 1), N))
    m = inst.rank_final
    row = {"N": N, "m": m}
    if cmd == "count":
        res = estimate_overlap(inst, make_plan(N, inst.g_F))
        env = COUNT_ENVELOPE / N ** 2
        row.update(p=res.plan.p, L=res.plan.L, total_runtime=res.plan.total_runtime,
                   runtime_over_lnN2=res.plan.total_runtime / math.log(N) ** 2,
                   estimate=res.estimate_delta2_squared, exact=res.exact_delta2_squared,
                   abs_error=res.abs_error, envelope=env, ok=res.abs_error <= env)
        return row, res
    if cmd == "thm2":
        C = float(pt["C"])
        tau = tau_upper_time(inst, C)
        res = evolve(inst, double_step_schedule(inst.E_F), tau, mode="double_step")
        row.update(C=C, tau_plus=tau, success_amplitude=res.success_amplitude,
                   ok=res.success_amplitude >= GAMMA)
        return row, res
    if cmd == "evolve":
        s = _by_kind(pt.get("schedule", "linear"), inst.E_F)
        tau = float(pt["tau"])
        res = evolve(inst, s, tau, mode=_mode(s, p.get("mode")))
        ok = SoundnessLog().check(inst, res)
        row.update(schedule=s.kind, tau=tau, success_amplitude=res.success_amplitude,
                   survival=res.survival, dist_to_ground=res.dist_to_ground, ok=ok)
        return row, res
    if cmd == "bounds":
        rep = bound_report(inst)
        lo, hi = rep.tau_upper_interval
        row.update(tau_lower=rep.tau_lower, tau_upper_lo=lo, tau_upper_hi=hi,
                   ratio_lower_upper=rep.ratio_lower_upper, epsilon=rep.hypothesis_flags["epsilon"],
                   ok=True)
        return row, rep
    if cmd == "gapscan":
        s = _by_kind(pt.get("schedule", "linear"), inst.E_F)
        prof = gap_profile(inst, s, int(p.get("grid", 257)))
        row.update(schedule=s.kind, min_gap=prof.min_gap, min_location=prof.min_location,
                   sqrt_m_over_N=math.sqrt(m / N), ok=True)
        return row, prof
    if cmd == "verify":
        s = _by_kind(pt.get("schedule", "linear"), inst.E_F)
        try:
            lower = tau_lower_bound(inst)
        except BoundNotApplicable:
            row.update(schedule=s.kind, tau_lower=None, tau_star=None, tau_star_over_tau_lower=None)
            return row, {"advisory": "delta2 >= 1/5"}
        star = first_success_tau(inst, s, tau_start=min(0.05, lower / 4), mode=_mode(s, p.get("mode")))
        ratio = None if star is None else star / lower
        row.update(schedule=s.kind, tau_lower=lower, tau_star=star, tau_star_over_tau_lower=ratio,
                   ok=ratio is None or ratio >= 1.0)
        return row, {"tau_lower": lower, "tau_star": star}
    raise ConfigError(f"unknown sweep command {cmd!r}")


def _sweep(cfg, p, out):
    cmd = p.get("sweep_command")
    if cmd is None:
        raise ConfigError("sweep needs parameters.sweep_command")
    axes = [k for k in ("N", "m", "tau", "C", "schedule") if k in p]
    if "N" not in axes:
        raise ConfigError("sweep needs an N range")
    values = [_range(p[k], k) for k in axes]
    pairing = p.get("pairing", "cartesian")
    if pairing == "cartesian":
        combos = list(itertools.product(*values))
    elif pairing == "paired":
        if len({len(v) for v in values if len(v) > 1}) > 1:
            raise ConfigError("paired sweep needs equal-length ranges")
        n = max(len(v) for v in values)
        combos = [tuple(v[i] if len(v) > 1 else v[0] for v in values) for i in range(n)]
    else:
        raise ConfigError(f"unknown pairing {pairing!r}")
    points = [dict(zip(axes, c)) for c in combos]
    if cmd == "thm2" and "C" not in p:
        raise ConfigError("thm2 sweep needs a C range")
    if cmd == "evolve" and "tau" not in p:
        raise ConfigError("evolve sweep needs a tau range")
    results = _ordered_map(lambda pt: _sweep_point(cmd, pt, p), points)
    header = []
    for row, _ in results:
        header += [k for k in row if k not in header]
    rows = [[row.get(k) for k in header] for row, _ in results]
    out.files["summary.csv"] = records.csv_text(header, rows)
    for i, (row, obj) in enumerate(results):
        out.files[f"points/point_{i:04d}.json"] = records.dumps({"index": i, "row": row, "record": obj})
    bad = [i for i, (row, _) in enumerate(results) if not row.get("ok", True)]
    if bad:
        out.fail(VIOLATION, f"invariant violated at sweep points {bad}")


# ---------------------------------------------------------------- report


REPORT_FILES = ("summary.json", "summary.txt")


def _report(cfg, p, out):
    root = Path(cfg.get("output_dir") or ".")
    if not root.is_dir():
        raise ConfigError(f"no such directory: {root}")
    skip = set(REPORT_FILES)
    jsons = sorted(q for q in root.rglob("*.json") if q.relative_to(root).as_posix() not in skip)
    csvs = sorted(q for q in root.rglob("*.csv") if not q.name.startswith("plot_")
                  and q.name != "thm1_table.csv")
    if not jsons and not csvs:
        raise ConfigError(f"no run artifacts in {root}")
    merged, lines = {}, []
    for q in jsons:
        rel = q.relative_to(root).as_posix()
        try:
            merged[rel] = json.loads(q.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{rel} is not valid JSON") from exc
    for rel, rec in merged.items():
        lines.append(f"{rel}: {_headline(rec)}")
    thm1_rows, thm1_header = [], None
    for q in csvs:
        rel = q.relative_to(root).as_posix()
        header, rows = records.read_csv(q.read_text())
        lines.append(f"{rel}: {len(rows)} rows, columns {' '.join(header)}")
        stem = rel[:-4].replace("/", "_")
        if tuple(header) == GAP_HEADER:
            out.files[f"plot_{stem}.csv"] = q.read_text()
        if "tau" in header and "success_amplitude" in header:
            i, j = header.index("tau"), header.index("success_amplitude")
            out.files[f"plot_{stem}_success.csv"] = "tau,success_amplitude\n" + "".join(
                f"{r[i]},{r[j]}\n" for r in rows)
        if "tau_star_over_tau_lower" in header:
            if thm1_header is None:
                thm1_header = ["source"] + header
            if ["source"] + header == thm1_header:
                thm1_rows += [[rel] + r for r in rows]
    if thm1_rows:
        out.files["thm1_table.csv"] = records.csv_text(thm1_header, thm1_rows)
    out.files["summary.json"] = json.dumps(merged, sort_keys=True, indent=1) + "\n"
    out.files["summary.txt"] = "\n".join(lines) + "\n"


def _headline(rec):
    if not isinstance(rec, dict):
        return type(rec).__name__
    for key in ("result", "report", "record"):
        if isinstance(rec.get(key), dict):
            inner = rec[key]
            scalars = {k: v for k, v in inner.items() if isinstance(v, (int, float, bool, str)) and k != "__type__"}
            shown = ", ".join(f"{k}={v}" for k, v in list(scalars.items())[:6])
            return f"{inner.get('__type__', key)} {shown}"
    return f"{rec.get('__type__', 'record')} with keys {', '.join(sorted(rec)[:6])}"


HANDLERS = {"build": _build, "evolve": _evolve, "count": _count, "gapscan": _gapscan, "krein": _krein,
            "bounds": _bounds, "verify": _verify, "sweep": _sweep, "report": _report}


# ---------------------------------------------------------------- entry points


def _write(root: Path, files: dict):
    """Single serialized writer; files go out in sorted name order."""
    root.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        target = root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(files[name])


def execute(config: dict) -> Outcome:
    """Validate ``config``, run its command, write artifacts, return the outcome."""
    out = Outcome()
    try:
        if not isinstance(config, dict):
            raise ConfigError("config must be a mapping")
        unknown = set(config) - CONFIG_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cmd = config.get("command")
        if cmd not in HANDLERS:
            raise ConfigError(f"unknown command {cmd!r}")
        params = dict(config.get("parameters") or {})
        bad = set(params) - PARAMS[cmd]
        if bad:
            raise ConfigError(f"unknown parameters for {cmd}: {sorted(bad)}")
        for key in ("instance_spec", "schedule_spec"):
            if config.get(key) is not None and not Path(config[key]).is_file():
                raise ConfigError(f"{key} not found: {config[key]}")
        HANDLERS[cmd](config, params, out)
    except ConfigError as exc:
        out.fail(BAD_CONFIG, str(exc))
        return out
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError, ValueError, ArithmeticError) as exc:
        out.fail(NUMERICAL, f"numerical failure: {exc}")
        return out
    _write(Path(config.get("output_dir") or "."), out.files)
    return out


def run(config: dict) -> int:
    """Run one experiment config and return its exit status."""
    return execute(config).status


def _parser():
    ap = argparse.ArgumentParser(prog="hblab", description="Hamiltonian-based search experiments")
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        sp = sub.add_parser(verb)
        if verb == "sweep":
            sp.add_argument("config", help="sweep config JSON")
        elif verb == "report":
            sp.add_argument("directory", nargs="?", help="run directory (default: --out)")
        sp.add_argument("--instance")
        sp.add_argument("--schedule")
        sp.add_argument("--tau")
        sp.add_argument("--c", type=float)
        sp.add_argument("--grid", type=int)
        sp.add_argument("--mode", choices=("reduced", "full", "double_step"))
        sp.add_argument("--out", default=".")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float)
        sp.add_argument("--gf", type=float)
        sp.add_argument("--ef-perturb", type=float, dest="ef_perturb")
        sp.add_argument("--subspace", choices=("dynamical", "full"))
    return ap


def config_from_args(args) -> dict:
    if args.verb == "sweep":
        cfg = _json_file(args.config, "sweep config")
        if not isinstance(cfg, dict):
            raise ConfigError("sweep config must be a JSON object")
        return {"output_dir": args.out, "seed": args.seed, **cfg, "command": "sweep"}
    params = {}
    for key in ("tau", "c", "grid", "mode", "tol", "gf", "ef_perturb", "subspace"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    if args.verb == "evolve" and "tau" in params:
        params["tau"] = _floats(params["tau"], "tau")[0]
    out_dir = args.directory if args.verb == "report" and args.directory else args.out
    return {"command": args.verb, "instance_spec": args.instance, "schedule_spec": args.schedule,
            "parameters": params, "output_dir": out_dir, "seed": args.seed}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return BAD_CONFIG
    out = execute(cfg)
    for w in out.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for msg in out.messages:
        print(f"error: {msg}", file=sys.stderr)
    for name in sorted(out.files):
        print(Path(cfg.get("output_dir") or ".") / name)
    return out.status


if __name__ == "__main__":
    sys.exit(main())
