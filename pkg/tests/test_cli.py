import json

import numpy as np
import pytest

from dualloop import __version__
from dualloop.cli import main
from dualloop.gaussian import cov_from_csv
from dualloop.linops import complex_to_json, random_unitary


@pytest.fixture
def unitary_file(tmp_path):
    path = tmp_path / "u.json"
    path.write_text(json.dumps(complex_to_json(random_unitary(3, 17))))
    return path


def run(*args):
    return main([str(a) for a in args])


def test_decompose_identity(tmp_path, capsys):
    path = tmp_path / "id.json"
    path.write_text(json.dumps(complex_to_json(np.eye(3))))
    assert run("decompose", path, "-o", tmp_path / "plan.json") == 0
    plan = json.loads((tmp_path / "plan.json").read_text())
    assert plan["alphas"] == [0.0, 0.0, 0.0]
    assert all(p["omega"] == pytest.approx(np.pi / 2) for layer in plan["layers"] for p in layer)
    assert "error (Frobenius): 0.000e+00" in capsys.readouterr().err


def test_decompose_random(unitary_file, capsys):
    assert run("decompose", unitary_file) == 0
    out = capsys.readouterr()
    assert json.loads(out.out)["dim"] == 3
    assert float(out.err.split(":")[-1]) < 1e-9


def test_decompose_bad_input(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("decompose", bad) == 2
    bad.write_text(json.dumps(complex_to_json(np.diag([1.0, 2.0]))))
    assert run("decompose", bad) == 2
    assert run("decompose", tmp_path / "missing.json") == 2


def test_compile_then_verify(tmp_path, unitary_file):
    plan, tl = tmp_path / "plan.json", tmp_path / "tl.json"
    assert run("decompose", unitary_file, "-o", plan) == 0
    assert run("compile", plan, "-o", tl) == 0
    assert run("verify", tl, unitary_file) == 0
    tl_vps = tmp_path / "tl_vps.json"
    assert run("compile", "--unitary", unitary_file, "--final-phase-mode", "vps", "-o", tl_vps) == 0
    assert run("verify", tl_vps, unitary_file) == 0


def test_verify_perturbed_timeline(tmp_path, unitary_file):
    tl = tmp_path / "tl.json"
    run("compile", "--unitary", unitary_file, "-o", tl)
    data = json.loads(tl.read_text())
    b = next(b for b in data["bins"] if 0.05 < b["vbs_T"] < 0.95)
    b["vbs_T"] += 0.05
    tl.write_text(json.dumps(data))
    assert run("verify", tl, unitary_file) == 1


def test_verify_dimension_mismatch(tmp_path, unitary_file):
    tl = tmp_path / "tl.json"
    run("compile", "--unitary", unitary_file, "-o", tl)
    small = tmp_path / "u2.json"
    small.write_text(json.dumps(complex_to_json(np.eye(2))))
    assert run("verify", tl, small) == 2


def test_compile_needs_one_source(tmp_path, unitary_file):
    assert run("compile") == 2
    assert run("compile", unitary_file, "--unitary", unitary_file) == 2


def test_run_op1(tmp_path):
    out = tmp_path / "op1"
    assert run("run", "--preset", "op1", "--output-dir", out) == 0
    G = cov_from_csv((out / "covariance.csv").read_text())
    assert np.allclose(G - np.diag(np.diag(G)), 0)
    assert G[1, 1] == pytest.approx(0.5717, abs=1e-4)
    assert G[3, 3] == pytest.approx(0.4646, abs=1e-4) and G[5, 5] == pytest.approx(0.4646, abs=1e-4)
    report = json.loads((out / "report.json").read_text())
    assert report["provenance"]["version"] == __version__
    assert report["round_trips"]["1"] == {"inner_trips": 1, "outer_trips": 1}
    assert set(report["fidelity"]) == {"vs_lossless", "vs_without_loop_losses"}
    assert "inseparability" not in report
    assert (out / "control_table.txt").read_text().startswith(" bin")


def test_run_op2ii_estimate(tmp_path):
    out = tmp_path / "op2ii"
    assert run("run", "--preset", "op2ii", "--estimate", "--seed", 7, "--samples", 5000,
               "--output-dir", out) == 0
    G = cov_from_csv((out / "covariance.csv").read_text())
    G_hat = cov_from_csv((out / "estimate.csv").read_text())
    assert np.max(np.abs(G_hat - G)) < 0.15
    report = json.loads((out / "report.json").read_text())
    assert report["provenance"]["seed"] == 7
    assert report["estimate"]["samples_per_basis"] == 5000
    # the estimate command reproduces the bundled estimate from the samples file
    est = tmp_path / "again.csv"
    assert run("estimate", out / "samples.csv", "-o", est) == 0
    assert est.read_text() == (out / "estimate.csv").read_text()


def test_run_op3i_lossless(tmp_path):
    out = tmp_path / "ghz"
    assert run("run", "--preset", "op3i", "--lossless", "--squeezing-db", 20, "--output-dir", out) == 0
    report = json.loads((out / "report.json").read_text())
    assert all(v < 0.1 for v in report["nullifiers"].values())
    assert all(e["value"] < 0.1 and e["passes"] for e in report["inseparability"]["entries"])
    assert report["fidelity"]["vs_lossless"] == pytest.approx(1.0)


def test_run_unitary(tmp_path, unitary_file):
    out = tmp_path / "u"
    assert run("run", "--unitary", unitary_file, "--final-phase-mode", "vps", "--output-dir", out) == 0
    assert json.loads((out / "report.json").read_text())["n_modes"] == 3


def test_run_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run("run", "--preset", "op4i", "--estimate", "--seed", 3, "--samples", 500,
                   "--output-dir", out) == 0
    files = sorted(p.name for p in a.iterdir())
    assert files == sorted(p.name for p in b.iterdir())
    assert all((a / f).read_bytes() == (b / f).read_bytes() for f in files)


def test_run_errors(tmp_path, monkeypatch):
    assert run("run", "--preset", "op9", "--output-dir", tmp_path) == 2
    assert run("run", "--output-dir", tmp_path) == 2
    assert run("run", "--preset", "op1", "--inner-trip-loss", 1.5, "--output-dir", tmp_path) == 2

    from dualloop import cli
    from dualloop.errors import NumericalError

    def unphysical(*args, **kwargs):
        raise NumericalError("state became unphysical")

    monkeypatch.setattr(cli, "simulate", unphysical)
    assert run("run", "--preset", "op1", "--output-dir", tmp_path) == 3


def test_config_precedence(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "op2i", "seed": 4, "outer_trip_loss": 0.0}))
    monkeypatch.setenv("DUALLOOP_OUTPUT_DIR", str(tmp_path / "env"))
    assert run("run", "--config", cfg, "--seed", 9) == 0
    report = json.loads((tmp_path / "env" / "report.json").read_text())
    assert report["config"]["preset"] == "op2i"
    assert report["config"]["outer_trip_loss"] == 0.0
    assert report["provenance"]["seed"] == 9
    cfg.write_text(json.dumps({"preset": "op2i", "colour": "blue"}))
    assert run("run", "--config", cfg) == 2


def test_config_hash_ignores_output_dir(tmp_path):
    for d in ("x", "y"):
        assert run("run", "--preset", "op1", "--output-dir", tmp_path / d) == 0
    h = [json.loads((tmp_path / d / "report.json").read_text())["provenance"]["config_hash"]
         for d in ("x", "y")]
    assert h[0] == h[1]


def test_estimate_bad_file(tmp_path):
    bad = tmp_path / "s.csv"
    bad.write_text("basis,q1,q2,q3\np1p2p3,1,2,3\n")
    assert run("estimate", bad) == 2
    assert run("estimate", tmp_path / "none.csv") == 2


def test_usage_error_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
