import json
import math
import subprocess
import sys

import pytest

from hblab import records
from hblab.cli import execute, main, run


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def files(tmp_path):
    d = tmp_path / "in"
    d.mkdir()
    return {
        "g16": write(d / "grover16.json", {"dim": 16, "kind": "grover", "marked": [3]}),
        "g64": write(d / "grover64.json", {"dim": 64, "kind": "grover", "marked": [5]}),
        "g1024": write(d / "grover1024.json", {"dim": 1024, "kind": "grover", "marked": [0]}),
        "general": write(d / "general.json", {"dim": 24, "kind": "general",
                                              "eigenpairs": [[-1.0], [0.5]], "initial": "random"}),
        "double": write(d / "doublestep.json", {"kind": "double_step"}),
        "bump": write(d / "bump.json", {"kind": "smooth_bump"}),
        "linear": write(d / "linear.json", {"kind": "linear"}),
        "bad": write(d / "bad.json", {"dim": 16, "kind": "grover", "marked": [3], "colour": "red"}),
    }


def load_json(path):
    return records.loads(path.read_text())


# ---------------------------------------------------------------- verbs


def test_build(files, tmp_path):
    assert main(["build", "--instance", files["g64"], "--out", str(tmp_path / "o")]) == 0
    rec = load_json(tmp_path / "o" / "instance.json")
    assert rec["N"] == 64 and rec["m"] == 1
    assert rec["overlaps"].delta2 == pytest.approx(0.125)


def test_evolve_double_step_at_upper_time(files, tmp_path):
    out = tmp_path / "o"
    assert main(["evolve", "--instance", files["g64"], "--schedule", files["double"], "--tau", "8",
                 "--out", str(out)]) == 0
    res = load_json(out / "evolve.json")["result"]
    assert res.success_amplitude >= 0.2
    assert res.mode == "double_step"


def test_evolve_smooth_schedule(files, tmp_path):
    out = tmp_path / "o"
    assert main(["evolve", "--instance", files["g16"], "--schedule", files["bump"], "--tau", "5",
                 "--mode", "full", "--out", str(out)]) == 0
    res = load_json(out / "evolve.json")["result"]
    assert res.mode == "full" and not res.degraded


def test_evolve_degraded_is_numerical_failure(files, tmp_path):
    code = main(["evolve", "--instance", files["g16"], "--schedule", files["linear"], "--tau", "500",
                 "--tol", "1e-15", "--out", str(tmp_path / "o")])
    assert code == 3


def test_evolve_needs_tau(files, tmp_path):
    assert main(["evolve", "--instance", files["g16"], "--out", str(tmp_path)]) == 2


def test_count(files, tmp_path):
    out = tmp_path / "o"
    assert main(["count", "--instance", files["g1024"], "--out", str(out)]) == 0
    res = load_json(out / "count.json")["result"]
    assert res.abs_error <= 10 / 1024 ** 2
    assert res.plan.L == 82


def test_count_offset_sensitivity(files, tmp_path):
    out = tmp_path / "o"
    assert main(["count", "--instance", files["g64"], "--ef-perturb", "1e-3", "--out", str(out)]) == 0
    rec = load_json(out / "count.json")
    assert set(rec["offset_sensitivity"]["estimates"]) == {"-1", "0", "1"}


def test_count_bad_gap_is_config_error(files, tmp_path):
    assert main(["count", "--instance", files["g64"], "--gf", "5", "--out", str(tmp_path)]) == 2


def test_gapscan_n16(files, tmp_path):
    out = tmp_path / "o"
    assert main(["gapscan", "--instance", files["g16"], "--grid", "257", "--out", str(out)]) == 0
    header, rows = records.read_csv((out / "gap.csv").read_text())
    assert header == ["s", "lambda1", "lambda2", "gap"]
    assert len(rows) == 257
    assert min(float(r[3]) for r in rows) == pytest.approx(0.25, abs=1e-4)
    assert load_json(out / "gap.json").min_gap == pytest.approx(0.25, abs=1e-4)


def test_gapscan_small_grid(files, tmp_path):
    assert main(["gapscan", "--instance", files["g16"], "--grid", "8", "--out", str(tmp_path)]) == 2


def test_krein_advisory_exits_zero(files, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["krein", "--instance", files["g16"], "--grid", "33", "--out", str(out)]) == 0
    assert "advisory" in capsys.readouterr().err
    rep = load_json(out / "krein.json")["report"]
    assert rep.mode == "advisory"


def test_krein_hypothesis_regime(files, tmp_path):
    # g_I = 1 forces beta >= 5 delta4, so the certificate's beta check fails
    out = tmp_path / "o"
    assert main(["krein", "--instance", files["g1024"], "--grid", "33", "--out", str(out)]) == 1
    rep = load_json(out / "krein.json")["report"]
    assert rep.hypothesis and not rep.beta_below_5delta4
    assert all(b.ok for b in rep.bracketing)
    assert rep.dense_min_gap <= rep.certified_bound


def test_bounds(files, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["bounds", "--instance", files["g64"], "--c", "0.5", "--out", str(out)]) == 0
    rec = load_json(out / "bounds.json")
    assert rec["report"].tau_lower == pytest.approx(0.6)
    assert rec["tau_upper_at_C"] == pytest.approx(8.0)
    assert rec["report"].tau_robust == "vacuous"
    assert "vacuous" in capsys.readouterr().err


def test_bounds_bad_c(files, tmp_path):
    assert main(["bounds", "--instance", files["g64"], "--c", "0.9", "--out", str(tmp_path)]) == 2


def test_verify_default_grid(files, tmp_path):
    out = tmp_path / "o"
    assert main(["verify", "--instance", files["g64"], "--out", str(out)]) == 0
    for kind in ("linear", "smooth_bump", "double_step"):
        header, rows = records.read_csv((out / f"verify_{kind}.csv").read_text())
        assert header == ["tau", "success_amplitude", "survival", "dist_to_ground"]
        assert all(float(r[1]) < 0.2 for r in rows)
    header, rows = records.read_csv((out / "thm1.csv").read_text())
    j = header.index("tau_star_over_tau_lower")
    assert all(float(r[j]) >= 1 for r in rows)


def test_verify_advisory_needs_tau(files, tmp_path):
    assert main(["verify", "--instance", files["g16"], "--out", str(tmp_path)]) == 2
    assert main(["verify", "--instance", files["g16"], "--tau", "1,2", "--out", str(tmp_path)]) == 0


# ---------------------------------------------------------------- errors


def test_missing_instance_file(tmp_path, capsys):
    assert main(["build", "--instance", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert "not found" in capsys.readouterr().err


def test_unknown_instance_key(files, tmp_path):
    assert main(["build", "--instance", files["bad"], "--out", str(tmp_path)]) == 2


def test_invalid_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["build", "--instance", str(p), "--out", str(tmp_path)]) == 2


def test_config_validation(files, tmp_path):
    assert run({"command": "build", "instance_spec": files["g16"], "output_dir": str(tmp_path),
                "extra": 1}) == 2
    assert run({"command": "fly", "output_dir": str(tmp_path)}) == 2
    assert run({"command": "evolve", "instance_spec": files["g16"], "output_dir": str(tmp_path),
                "parameters": {"tau": 1.0, "speed": 2}}) == 2


# ---------------------------------------------------------------- sweep and report


def sweep(tmp_path, cfg, name="sweep.json"):
    out = tmp_path / "sw"
    path = write(tmp_path / name, cfg)
    return main(["sweep", path, "--out", str(out)]), out


def test_sweep_count(tmp_path):
    code, out = sweep(tmp_path, {"parameters": {"sweep_command": "count", "N": {"pow2": [6, 10]}, "m": 1}})
    assert code == 0
    header, rows = records.read_csv((out / "summary.csv").read_text())
    assert len(rows) == 5
    N = [int(r[header.index("N")]) for r in rows]
    assert N == [64, 128, 256, 512, 1024]
    for r, n in zip(rows, N):
        assert float(r[header.index("abs_error")]) <= 10 / n ** 2
    assert len(list((out / "points").glob("point_*.json"))) == 5
    rec = load_json(out / "points" / "point_0000.json")
    assert rec["record"].plan.N == 64


def test_sweep_thm2_over_c(tmp_path):
    code, out = sweep(tmp_path, {"parameters": {"sweep_command": "thm2", "N": [256],
                                                "C": {"linspace": [1 / 3, 2 / 3, 10]}}})
    assert code == 0
    header, rows = records.read_csv((out / "summary.csv").read_text())
    assert len(rows) == 10
    assert all(float(r[header.index("success_amplitude")]) >= 0.2 for r in rows)


def test_sweep_paired(tmp_path):
    code, out = sweep(tmp_path, {"parameters": {"sweep_command": "gapscan", "N": [16, 64], "m": [1, 4],
                                                "pairing": "paired", "grid": 33}})
    assert code == 0
    header, rows = records.read_csv((out / "summary.csv").read_text())
    assert [(r[0], r[1]) for r in rows] == [("16", "1"), ("64", "4")]
    for r in rows:
        assert float(r[header.index("min_gap")]) == pytest.approx(float(r[header.index("sqrt_m_over_N")]), abs=1e-4)


def test_sweep_sqrt_m_and_verify(tmp_path):
    code, out = sweep(tmp_path, {"parameters": {"sweep_command": "verify", "N": [64, 256], "m": "sqrtN",
                                                "schedule": ["double_step"]}})
    assert code == 0
    header, rows = records.read_csv((out / "summary.csv").read_text())
    assert [r[header.index("m")] for r in rows] == ["8", "16"]


def test_sweep_empty_tau_range(tmp_path):
    code, _ = sweep(tmp_path, {"parameters": {"sweep_command": "evolve", "N": [64], "tau": []}})
    assert code == 2


@pytest.mark.parametrize("params", [
    {"sweep_command": "count"},
    {"sweep_command": "dance", "N": [64]},
    {"sweep_command": "thm2", "N": [64]},
    {"sweep_command": "count", "N": {"range": [1, 2]}},
    {"sweep_command": "count", "N": [64, 128], "m": [1, 2, 3], "pairing": "paired"},
])
def test_sweep_malformed(tmp_path, params):
    code, _ = sweep(tmp_path, {"parameters": params})
    assert code == 2


def test_sweep_missing_config(tmp_path):
    assert main(["sweep", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 2


def test_sweep_threads_keep_order(tmp_path, monkeypatch):
    cfg = {"parameters": {"sweep_command": "evolve", "N": [64], "tau": [0.5, 1.0, 2.0, 4.0],
                          "schedule": ["linear"]}}
    code, out = sweep(tmp_path, cfg)
    serial = (out / "summary.csv").read_text()
    monkeypatch.setenv("HBLAB_THREADS", "3")
    out2 = tmp_path / "sw2"
    assert main(["sweep", write(tmp_path / "c2.json", cfg), "--out", str(out2)]) == 0
    assert (out2 / "summary.csv").read_text() == serial


def test_report_after_gapscan_and_verify(files, tmp_path):
    out = tmp_path / "o"
    assert main(["gapscan", "--instance", files["g16"], "--grid", "33", "--out", str(out)]) == 0
    assert main(["verify", "--instance", files["g64"], "--out", str(out)]) == 0
    assert main(["report", str(out)]) == 0
    plot = (out / "plot_gap.csv").read_text()
    assert plot.splitlines()[0] == "s,lambda1,lambda2,gap"
    header, rows = records.read_csv((out / "thm1_table.csv").read_text())
    j = header.index("tau_star_over_tau_lower")
    assert rows and all(float(r[j]) >= 1 for r in rows)
    summary = json.loads((out / "summary.json").read_text())
    assert "gap.json" in summary and "verify.json" in summary
    assert (out / "plot_verify_linear_success.csv").read_text().startswith("tau,success_amplitude\n")
    assert "gap.csv" in (out / "summary.txt").read_text()


def test_report_is_idempotent(files, tmp_path):
    out = tmp_path / "o"
    main(["gapscan", "--instance", files["g16"], "--grid", "17", "--out", str(out)])
    main(["report", str(out)])
    first = (out / "summary.json").read_text()
    main(["report", str(out)])
    assert (out / "summary.json").read_text() == first


def test_report_empty_dir(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["report", str(tmp_path / "empty")]) == 2
    assert main(["report", str(tmp_path / "missing")]) == 2


# ---------------------------------------------------------------- reproducibility


def test_byte_identical_reruns(files, tmp_path):
    def snapshot(out):
        return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}

    cmds = [["evolve", "--instance", files["general"], "--schedule", files["bump"], "--tau", "3"],
            ["gapscan", "--instance", files["general"], "--grid", "33"],
            ["count", "--instance", files["general"]],
            ["bounds", "--instance", files["general"]]]
    snaps = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for c in cmds:
            assert main(c + ["--out", str(out), "--seed", "11"]) == 0
        snaps.append(snapshot(out))
    assert snaps[0] == snaps[1]


def test_seed_changes_random_instance(files, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["build", "--instance", files["general"], "--seed", "1", "--out", str(a)])
    main(["build", "--instance", files["general"], "--seed", "2", "--out", str(b)])
    assert (a / "instance.json").read_text() != (b / "instance.json").read_text()


def test_every_emitted_json_round_trips(files, tmp_path):
    out = tmp_path / "o"
    main(["evolve", "--instance", files["g64"], "--schedule", files["double"], "--tau", "8", "--out", str(out)])
    main(["krein", "--instance", files["g16"], "--grid", "17", "--out", str(out)])
    main(["count", "--instance", files["g64"], "--out", str(out)])
    for p in out.glob("*.json"):
        text = p.read_text()
        assert records.dumps(records.loads(text)) == text


def test_execute_reports_files(files, tmp_path):
    o = execute({"command": "gapscan", "instance_spec": files["g16"], "output_dir": str(tmp_path),
                 "parameters": {"grid": 17}})
    assert o.status == 0 and set(o.files) == {"gap.csv", "gap.json"}


def test_module_entry_point(files, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hblab", "gapscan", "--instance", files["g16"],
                           "--grid", "17", "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "gap.csv" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "hblab", "build", "--instance", "/nonexistent.json"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
