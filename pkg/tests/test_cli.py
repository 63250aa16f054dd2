import csv
import json

import pytest

from clifford_miura.cli import RunConfig, config_hash, convergence_study, main

GRID16 = {"origin": [0, 0], "extents": [1, 1], "counts": [16, 16]}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_zero_potential_solve(tmp_path):
    cfg = _write(tmp_path, {"command": "miura-solve", "grid": GRID16})
    assert main(["run", str(cfg), "--output", str(tmp_path / "out")]) == 0
    rep = json.loads((tmp_path / "out" / "miura_report.json").read_text())
    assert rep["iterations"] == 1
    assert rep["final_fp_residual"] == 0 and rep["final_strong_residual"] == 0
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert man["schema"] == 1 and man["seed"] == 0 and "miura_report.json" in man["outputs"]
    assert (tmp_path / "out" / "a.csv").exists()


def test_manufactured_solve_and_sampled_reuse(tmp_path):
    cfg = _write(
        tmp_path,
        {"command": "miura-solve", "grid": GRID16, "miura": {"p": 1.5}, "potential": {"kind": "manufactured", "phi": "exp(0.1*x1*x2)"}},
    )
    assert main(["run", str(cfg), "--output", str(tmp_path / "m")]) == 0
    rep = json.loads((tmp_path / "m" / "miura_report.json").read_text())
    assert rep["manufactured_relative_error"] < 0.05
    # the written potential can be fed back as a sampled one
    cfg2 = _write(
        tmp_path,
        {"command": "miura-solve", "grid": GRID16, "potential": {"kind": "sampled", "file": str(tmp_path / "m" / "V.csv")}},
        "cfg2.json",
    )
    assert main(["run", str(cfg2), "--output", str(tmp_path / "s")]) == 0


@pytest.mark.parametrize("command", ["algebra-check", "identities", "kernels"])
def test_other_commands(tmp_path, command):
    cfg = _write(tmp_path, {"command": command, "grid": {"origin": [0, 0], "extents": [1, 1], "counts": [12, 12]}, "options": {"trials": 50}})
    assert main(["run", str(cfg), "--output", str(tmp_path / "o")]) == 0
    report = next(p for p in (tmp_path / "o").glob("*_report.json"))
    assert json.loads(report.read_text())


def test_algebra_check_passes(tmp_path):
    cfg = _write(tmp_path, {"command": "algebra-check", "options": {"trials": 200}})
    main(["run", str(cfg), "--output", str(tmp_path / "o")])
    rep = json.loads((tmp_path / "o" / "algebra_report.json").read_text())
    assert rep["plain"]["passed"] and rep["witt"]["passed"]


def test_gp_run_divergence_exit_code(tmp_path):
    cfg = _write(
        tmp_path,
        {
            "command": "gp-run",
            "grid": {"origin": [-3, -3], "extents": [6, 6], "counts": [16, 16]},
            "gp": {"mu": 1.0, "trap": {"kind": "harmonic", "omega": 1.0}},
            "potential": {"kind": "manufactured", "phi": "exp(-(x1**2+x2**2)/2)"},
            "miura": {"p": 1.5, "max_iter": 60},
        },
    )
    status = main(["run", str(cfg), "--output", str(tmp_path / "o")])
    rep = json.loads((tmp_path / "o" / "gp_report.json").read_text())
    assert status == (3 if rep["miura_report"]["diverged"] else 0)
    assert (tmp_path / "o" / "v_eff.csv").exists()


def test_diverging_solve_exits_3(tmp_path):
    cfg = _write(tmp_path, {"command": "miura-solve", "grid": GRID16, "potential": {"kind": "manufactured", "phi": "cos(3*x1)+1.5"}})
    assert main(["run", str(cfg), "--output", str(tmp_path / "o")]) in (0, 3)
    big = _write(tmp_path, {"command": "miura-solve", "grid": GRID16, "potential": {"kind": "manufactured", "phi": "exp(8*x1*x2)"}, "miura": {"p": 1.5, "max_iter": 50}}, "big.json")
    assert main(["run", str(big), "--output", str(tmp_path / "b")]) == 3


@pytest.mark.parametrize(
    "cfg",
    [
        {"command": "fly"},
        {"command": "miura-solve"},
        {"command": "miura-solve", "grid": {"origin": [0, 0], "extents": [1, 1], "counts": [4, 4]}},
        {"command": "miura-solve", "grid": GRID16, "miura": {"p": 3.0}},
        {"command": "miura-solve", "grid": GRID16, "potential": {"kind": "manufactured"}},
        {"command": "miura-solve", "grid": GRID16, "potential": {"kind": "manufactured", "phi": "exp(y)"}},
        {"command": "gp-run", "grid": GRID16},
        {"command": "convergence-study", "study": {"case": "borel_pompeiu", "levels": [16]}},
        {"command": "miura-solve", "grid": GRID16, "extra": 1},
    ],
)
def test_validation_errors_exit_2(tmp_path, cfg, capsys):
    assert main(["run", str(_write(tmp_path, cfg)), "--output", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "command": "miura-solve",\n  "grid": \n}\n')
    assert main(["run", str(p)]) == 2
    assert "bad.json:4:" in capsys.readouterr().err


def test_reports_are_byte_identical_across_runs_and_threads(tmp_path):
    cfg = _write(
        tmp_path,
        {"command": "miura-solve", "grid": {"origin": [0, 0], "extents": [1, 1], "counts": [20, 20]}, "potential": {"kind": "manufactured", "phi": "exp(0.1*x1*x2)"}, "seed": 7},
    )
    outs = []
    for i, n in enumerate((1, 1, 3)):
        d = tmp_path / f"r{i}"
        assert main(["run", str(cfg), "--threads", str(n), "--output", str(d)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    assert outs[0] == outs[1] == outs[2]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CLIFFORD_MIURA_OUTPUT", str(tmp_path / "env"))
    cfg = _write(tmp_path, {"command": "kernels"})
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "env" / "kernels_report.json").exists()


def test_study_subcommand(tmp_path):
    assert main(["study", "--case", "borel_pompeiu", "--levels", "16,32", "--output", str(tmp_path)]) == 0
    rows = list(csv.DictReader((tmp_path / "study.csv").open()))
    assert [int(r["level"]) for r in rows] == [16, 32]
    assert float(rows[1]["residual"]) < float(rows[0]["residual"])


def test_study_orders():
    rows = convergence_study("laplace_quadratic", [12, 24])
    assert all(r["residual"] <= 1e-12 for r in rows) and rows[1]["order"] == "exact"
    rows = convergence_study("proposition", [16, 32, 64])
    assert all(1.7 <= r["order"] <= 2.3 for r in rows[1:])
    rows = convergence_study("right_inverse", [16, 32, 64])
    assert all(0.8 <= r["order"] <= 2.3 for r in rows[1:])


def test_config_round_trip():
    raw = {
        "command": "gp-run",
        "grid": {"origin": [0.0, 0.0], "extents": [1.0, 1.0], "counts": [16, 16]},
        "miura": {"p": 1.5, "tol": 1e-10, "max_iter": 200, "k1": None, "C": None, "trials": 16, "seed": 0},
        "gp": {"hbar": 1.0, "mass": 1.0, "g": 0.0, "alpha": 0.0, "mu": 1.0, "trap": {"kind": "zero"}},
        "potential": {"kind": "manufactured", "phi": "2+x1"},
        "seed": 3,
    }
    cfg = RunConfig.from_dict(raw)
    assert cfg.to_dict() == raw
    assert RunConfig.from_dict(cfg.to_dict()) == cfg
    assert config_hash(cfg) == config_hash(RunConfig.from_dict(raw))
