import json
import os
import subprocess

import pytest

CLI = os.environ.get("QSPDE_CLI", "qspde")

BASE = """\
d = 1
s = 2
kmax = 4
n_x = 16
dt = 0.0009765625
T = 0.25
alpha = 0.2, 0.3
seed = 11
"""


def run(where, cmd, text=BASE, *extra):
    where.mkdir(parents=True, exist_ok=True)
    cfg = where / "run.cfg"
    cfg.write_text(text)
    out = where / "out"
    proc = subprocess.run([CLI, cmd, "--config", str(cfg), "--out", str(out), *extra],
                          capture_output=True, text=True)
    return proc, out


def test_sample_noise_is_reproducible(tmp_path):
    first, out1 = run(tmp_path / "a", "sample-noise")
    second, out2 = run(tmp_path / "b", "sample-noise")
    assert first.returncode == 0 and second.returncode == 0, first.stderr
    for name in ("v.qspd", "grad_v_0.qspd"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    meta = json.loads((out1 / "v.qspd.meta.json").read_text())
    assert len(meta["config_hash"]) == 16


def test_trace_class_violation_exits_1(tmp_path):
    proc, _ = run(tmp_path, "solve", BASE.replace("s = 2", "s = 1"))
    assert proc.returncode == 1
    err = json.loads(proc.stderr.strip().splitlines()[-1])["error"]
    assert err["kind"] == "validation"
    assert err["violations"]


def test_unknown_key_exits_1(tmp_path):
    proc, _ = run(tmp_path, "solve", BASE + "bogus = 3\n")
    assert proc.returncode == 1


def test_solve_then_norms(tmp_path):
    proc, out = run(tmp_path, "solve")
    assert proc.returncode == 0, proc.stderr
    for name in ("w.qspd", "v.qspd", "u.qspd", "grad_v_0.qspd", "solve.json"):
        assert (out / name).exists()
    proc, out = run(tmp_path, "norms")
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out / "norms.json").read_text())
    assert [row["alpha"] for row in report["norms"]] == [0.2, 0.3]
    for row in report["norms"]:
        assert row["grad_v"] > 0 and row["remainder"] >= 0
    csv = (out / "norms.csv").read_text().splitlines()
    assert csv[0].startswith("# config_hash=")
    assert csv[1].startswith("field,alpha,naive,theta")


def test_solve_matches_python_binding(tmp_path):
    qspde = pytest.importorskip("qspde")
    proc, out = run(tmp_path, "solve")
    assert proc.returncode == 0, proc.stderr
    proc, out = run(tmp_path, "norms")
    rows = json.loads((out / "norms.json").read_text())["norms"]
    traj = qspde.solve(qspde.CovarianceSpec(1, 2.0, 4), 16, 2.0**-10, 0.25, seed=11)
    assert rows[0]["remainder"] == pytest.approx(qspde.c1alpha_seminorm(traj["w"], 2.0**-10, 0.2), rel=1e-12)


def test_mc_schema(tmp_path):
    proc, out = run(tmp_path, "mc", BASE + "N = 6\n", "--workers", "2")
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out / "mc.json").read_text())
    assert report["command"] == "mc" and report["pass"]
    campaign = report["campaigns"][0]
    for key in ("n", "failures", "grad_v", "grad_u", "remainder", "tail_fits", "gates"):
        assert key in campaign
    assert campaign["n"] == 6 and campaign["grad_v"]["count"] == 6
    lines = (out / "mc.csv").read_text().splitlines()
    assert len(lines) == 2 + 2 * 6


def test_mc_is_worker_independent(tmp_path):
    one, out1 = run(tmp_path / "a", "mc",
                    BASE + "N = 4\n", "--deterministic", "--noise-only")
    two, out2 = run(tmp_path / "b", "mc",
                    BASE + "N = 4\n", "--workers", "3", "--noise-only")
    assert one.returncode == 0 and two.returncode == 0
    a = json.loads((out1 / "mc.json").read_text())["campaigns"]
    b = json.loads((out2 / "mc.json").read_text())["campaigns"]
    assert [c["grad_v"] for c in a] == [c["grad_v"] for c in b]


def test_verify_ellipticity(tmp_path):
    text = BASE.replace("d = 1", "d = 2").replace("s = 2", "s = 3") + "nonlinearity = tanh_perturbed\nlambda = 0.5\n"
    proc, out = run(tmp_path, "verify-ellipticity", text, "--samples", "2000")
    assert proc.returncode == 0, proc.stderr
    report = json.loads((out / "verify-ellipticity.json").read_text())
    assert report["pass"] and report["samples"] == 2000


def test_verify_covariance(tmp_path):
    proc, out = run(tmp_path, "verify-covariance", BASE.replace("kmax = 4", "kmax = 6") + "N = 2000\n")
    assert proc.returncode in (0, 3)
    report = json.loads((out / "verify-covariance.json").read_text())
    assert len(report["residuals"]) == 12
    assert (proc.returncode == 0) == report["pass"]
