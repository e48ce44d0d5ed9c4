import json
import math
import subprocess
import sys

import numpy as np
import pytest

from fraclab.cli import ExperimentReport, RunConfig, run_command
from fraclab.errors import InvalidArgumentError, NumericalError


def report(path):
    return json.loads(path.read_text())


def strip_wall(text):
    d = json.loads(text)
    d["meta"].pop("wall_time")
    return json.dumps(d, sort_keys=True)


def test_compat_example(tmp_path):
    out = tmp_path / "r.json"
    code = run_command(["compat", "--bc", "dirichlet", "--a", "0.5", "--rhs", "const", "--n", "4096", "--out", str(out)])
    assert code == 0
    r = report(out)
    assert set(r) == {"config", "measured", "predicted", "verdicts", "meta"}
    assert r["measured"]["beta"] == pytest.approx(2.0, abs=0.1)
    assert r["verdicts"]["beta"] == {"verdict": "pass", "tolerance": 0.15, "tag": "dirichlet-compatibility-threshold"}
    assert r["meta"]["version"] and r["meta"]["wall_time"] > 0


def test_a_out_of_range(capsys):
    assert run_command(["power", "--a", "1.5", "--n", "256"]) == 2
    assert "a must lie in (0,1)" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["power", "--n", "100"],
        ["power", "--n", "16384"],
        ["explode"],
        ["power", "--bc", "robin"],
        ["power", "--a", "x"],
        ["power", "--dump-coeffs"],
        ["boundary", "--bc", "neumann"],
        ["compat", "--n", "256"],
        ["power", "--rhs", "wiggle"],
        ["power", "--coef", "affine:1"],
        ["power", "--jobs", "0"],
        ["power", "--nonlocal-n", "5000"],
    ],
)
def test_usage_errors(argv, capsys):
    assert run_command(argv) == 2
    assert capsys.readouterr().err


def test_selftest(tmp_path):
    out = tmp_path / "s.json"
    assert run_command(["selftest", "--out", str(out)]) == 0
    r = report(out)
    assert len(r["verdicts"]) >= 10
    assert all(v["verdict"] == "pass" for v in r["verdicts"].values())


def test_fail_verdict_exit_code(tmp_path):
    # an impossible tolerance turns a correct measurement into a fail verdict
    out = tmp_path / "r.json"
    code = run_command(["compat", "--a", "0.5", "--n", "1024", "--tol-beta", "1e-9", "--out", str(out)])
    assert code == 1
    assert report(out)["verdicts"]["beta"]["verdict"] == "fail"


def test_assembly_error_is_usage_error(tmp_path, capsys):
    # a coefficient that violates ellipticity is a configuration mistake
    code = run_command(["power", "--coef", "affine:1,-1", "--n", "64", "--out", str(tmp_path / "x.json")])
    assert code == 2
    assert "c0" in capsys.readouterr().err


def test_numerical_error_exit_code(tmp_path, capsys, monkeypatch):
    import fraclab.cli as cli

    def broken(*args, **kwargs):
        raise NumericalError("QL iteration did not converge")

    monkeypatch.setattr(cli, "decompose", broken)
    assert run_command(["power", "--n", "64", "--out", str(tmp_path / "x.json")]) == 3
    assert "did not converge" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_power_command_neumann(tmp_path):
    out = tmp_path / "p.json"
    assert run_command(["power", "--bc", "neumann", "--a", "0.25", "--rhs", "linear", "--n", "256", "--out", str(out)]) == 0
    m = report(out)["measured"]
    assert m["residual"] <= 1e-10 and m["contour_deviation"] <= 1e-7


def test_quadrature_overrides(tmp_path):
    out = tmp_path / "p.json"
    code = run_command(["power", "--a", "0.5", "--n", "64", "--quad-q", "16", "--quad-step", "0.75", "--out", str(out)])
    m = report(out)["measured"]
    assert m["quad_q"] == 16 and m["quad_step"] == 0.75
    assert code == (0 if m["contour_deviation"] <= 1e-7 else 1)


def test_dump_coeffs(tmp_path):
    out = tmp_path / "p.json"
    assert run_command(["power", "--a", "0.5", "--n", "64", "--dump-coeffs", "--out", str(out)]) == 0
    lines = (tmp_path / "p.coeffs.csv").read_text().splitlines()
    assert lines[0] == "k,lambda_k,c_f,c_u"
    assert len(lines) == 65
    k, lam, cf, cu = (float(s) for s in lines[1].split(","))
    assert k == 1 and cu == pytest.approx(cf * lam**-0.5)


def test_boundary_and_compare(tmp_path):
    out = tmp_path / "b.json"
    assert run_command(["boundary", "--a", "0.25", "--n", "4096", "--out", str(out)]) == 0
    assert report(out)["measured"]["theta"] == pytest.approx(0.5, abs=0.05)
    out = tmp_path / "c.json"
    assert run_command(["compare", "--a", "0.5", "--n", "1024", "--nonlocal-n", "128", "--out", str(out)]) == 0
    r = report(out)
    assert r["measured"]["n"] == 128 and r["measured"]["restricted"] < r["measured"]["spectral"]


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"a": 0.25, "n": 128, "rhs": "linear", "tolerances": {"contour": 1e-6}}))
    out = tmp_path / "r.json"
    assert run_command(["power", "--config", str(cfg), "--a", "0.75", "--out", str(out)]) == 0
    c = report(out)["config"]
    assert c["a"] == 0.75 and c["n"] == 128 and c["rhs"] == "linear"
    assert c["tolerances"]["contour"] == 1e-6 and c["tolerances"]["residual"] == 1e-10


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_command(["power", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"colour": "red"}))
    assert run_command(["power", "--config", str(bad)]) == 2
    bad.write_text(json.dumps({"tolerances": {"speed": 1}}))
    assert run_command(["power", "--config", str(bad)]) == 2
    assert run_command(["power", "--config", str(tmp_path / "missing.json")]) == 2


def test_batch_jobs(tmp_path):
    cfg = tmp_path / "batch.json"
    entries = [{"a": a, "n": 64, "out": str(tmp_path / f"r{a}.json")} for a in (0.25, 0.5, 0.75)]
    cfg.write_text(json.dumps({"batch": entries}))
    assert run_command(["power", "--config", str(cfg), "--jobs", "2"]) == 0
    for a in (0.25, 0.5, 0.75):
        assert report(tmp_path / f"r{a}.json")["config"]["a"] == a
    # every batch entry needs its own output file
    cfg.write_text(json.dumps({"batch": [{"a": 0.2}, {"a": 0.3}]}))
    assert run_command(["power", "--config", str(cfg)]) == 2


def test_determinism_and_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACLAB_CACHE", str(tmp_path / "cache"))
    argv = ["compat", "--bc", "neumann", "--a", "0.5", "--rhs", "linear", "--n", "1024", "--dump-coeffs"]
    outs = [tmp_path / f"r{i}.json" for i in range(3)]
    assert run_command(argv + ["--out", str(outs[0])]) == 0  # cold
    assert len(list((tmp_path / "cache").iterdir())) == 1
    assert run_command(argv + ["--out", str(outs[1])]) == 0  # warm
    assert run_command(argv + ["--out", str(outs[2]), "--cache-dir", str(tmp_path / "other")]) == 0
    texts = [strip_wall(p.read_text()) for p in outs]
    assert texts[0] == texts[1] == texts[2]
    csvs = [p.with_suffix(".coeffs.csv").read_bytes() for p in outs]
    assert csvs[0] == csvs[1] == csvs[2]


def test_corrupt_cache_recomputed(tmp_path, caplog):
    cache = tmp_path / "cache"
    argv = ["power", "--a", "0.5", "--n", "64", "--cache-dir", str(cache)]
    assert run_command(argv + ["--out", str(tmp_path / "a.json")]) == 0
    (entry,) = cache.iterdir()
    raw = bytearray(entry.read_bytes())
    raw[100] ^= 0xFF
    entry.write_bytes(bytes(raw))
    assert run_command(argv + ["--out", str(tmp_path / "b.json")]) == 0
    assert "checksum" in caplog.text
    assert strip_wall((tmp_path / "a.json").read_text()) == strip_wall((tmp_path / "b.json").read_text())


def test_report_roundtrip():
    rep = ExperimentReport(config={"a": 0.1}, measured={"beta": math.inf, "x": 0.1 + 0.2, "n": [1, 2]})
    rep.verdict("beta", True, 0.15, "tag")
    back = ExperimentReport.from_json(rep.to_json())
    assert back == rep
    assert back.to_json() == rep.to_json()
    assert json.loads(rep.to_json())["measured"]["beta"] == "inf"


def test_run_config_validation():
    with pytest.raises(InvalidArgumentError):
        RunConfig("power", a=0.0).validate()
    RunConfig("power", n=8192).validate()


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.json"
    proc = subprocess.run([sys.executable, "-m", "fraclab", "selftest", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
