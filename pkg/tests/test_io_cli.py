import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hetprobit import cli
from hetprobit import formats as fm
from hetprobit.dgp import preset, simulate
from hetprobit.harness import MultiStartConfig, log_histogram, profile_grid
from hetprobit.model import Dataset, ParamVector


@pytest.fixture()
def het_csv(tmp_path):
    path = tmp_path / "het.csv"
    assert cli.main(["simulate", "--preset", "het-paper", "--seed", "7", "--n", "200", "--out", str(path)]) == 0
    return path


def write_config(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_dataset_csv_roundtrip_is_lossless(tmp_path):
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(30), rng.standard_normal((30, 2)) * 1e-7, rng.standard_normal(30) * 1e12])
    d = Dataset(rng.integers(0, 2, 30), X, rng.random((30, 2)))
    fm.write_dataset(tmp_path / "d.csv", d)
    back = fm.read_dataset(tmp_path / "d.csv")
    assert np.array_equal(back.X, d.X) and np.array_equal(back.Z, d.Z) and np.array_equal(back.y, d.y)
    text = (tmp_path / "d.csv").read_text()
    assert "e" not in text.split("\n", 1)[1]
    assert text.startswith("y,x1,x2,x3,x4,z1,z2\n")


def test_dataset_csv_without_z(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("y,x1,x2\n1,1,0.5\n0,1,-2\n")
    d = fm.read_dataset(p)
    assert (d.n, d.k1, d.k2) == (2, 2, 0)


@pytest.mark.parametrize("body, message", [
    ("y,x1,z1\n1,1,0\n2,1,0\n", ":3: y must be 0 or 1"),
    ("y,x1,z1\n1,1,0\n1,1\n", ":3: expected 3 fields"),
    ("y,x1,z1\n1,abc,0\n", ":2:"),
    ("y,z1,x1\n1,0,1\n", ":1: unexpected column"),
    ("x1,y\n1,0\n", ":1: first column"),
    ("y,x1\n1,nan\n", ":2: non-finite"),
])
def test_dataset_csv_errors_name_line(tmp_path, body, message):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(fm.FormatError, match=message):
        fm.read_dataset(p)


def test_histogram_csv_roundtrip(tmp_path):
    h = log_histogram([-0.1, 0.0, 0.02, 0.3, 0.31], 0.1, pool_negative=True)
    p = tmp_path / "h.csv"
    p.write_text(fm.histogram_csv(h, True))
    bins, better = fm.read_histogram_csv(p)
    assert better == 1
    assert bins == h.rows()
    assert sum(c for _, _, c in bins) + better == 5


def test_profile_csv_roundtrip(tmp_path):
    sim = simulate(preset("het-paper", seed=7, n=100))
    g = profile_grid(sim.data, sim.params, 0, 1, ((-5, 15), (-5, 15)), resolution=9, clip_floor=-300.0)
    assert g.clipped.any()
    p = tmp_path / "g.csv"
    p.write_text(fm.profile_csv(g))
    a1, a2, vals, clipped = fm.read_profile_csv(p)
    assert np.array_equal(a1, g.axis1) and np.array_equal(a2, g.axis2)
    assert np.array_equal(vals, g.values) and np.array_equal(clipped, g.clipped)


def test_bundled_reference():
    ref = fm.reference_ab()
    fm.validate(ref, "reference")
    assert ref["n"] == 1295 and ref["normalized_loglik"] == -0.59383
    p = fm.read_params("builtin:alvarez-brehm")
    assert p.k1 == 8 and p.k2 == 6
    assert p.beta[5] == -0.79 and p.gamma[4] == 0.68
    with pytest.raises(fm.FormatError):
        fm.read_params("builtin:other")


def test_params_from_fit_result_shape():
    p = fm.params_from_dict({"result": {"point": {"beta": [1.0], "gamma": [2.0]}}})
    assert p == ParamVector([1.0], [2.0])


def test_config_rejects_unknown_keys(tmp_path):
    p = write_config(tmp_path / "c.json", {"multistart": {"seed": 1}, "extra": 3})
    with pytest.raises(fm.FormatError, match="extra"):
        fm.read_config(p)
    p = write_config(tmp_path / "c.json", {"methods": [{"method": "BFGS", "speed": 3}]})
    with pytest.raises(fm.FormatError, match="speed"):
        fm.read_config(p)


def test_config_json_syntax_error_has_line(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{\n  "multistart": {\n    "seed": 1,\n  }\n}\n')
    with pytest.raises(fm.FormatError, match=r"c\.json:4:"):
        fm.read_config(p)


def test_multistart_config_from_dict():
    cfg = {"multistart": {"seed": 4, "num_starts": 7, "plateau_tau": 3.0},
           "methods": [{"method": "nelder-mead", "f_tol": 1e-9}, {"method": "sann", "sann": {"eval_budget": 50}}]}
    ms = fm.multistart_config(cfg, ParamVector([0.0], [0.0]))
    assert isinstance(ms, MultiStartConfig)
    assert ms.num_starts == 7 and ms.plateau_tau == 3.0
    assert [m.method for m in ms.methods] == ["NelderMead", "SANN"]
    assert ms.methods[1].sann.eval_budget == 50


# ---------------------------------------------------------------------------
# commands


def test_simulate_outputs(tmp_path, het_csv):
    side = json.loads((tmp_path / "het.params.json").read_text())
    fm.validate(side, "simulation")
    assert side["seed"] == 7 and side["k1"] == 3 and side["k2"] == 2
    assert 0.2 <= side["crossover"] <= 0.3
    again = tmp_path / "again.csv"
    cli.main(["simulate", "--preset", "het-paper", "--seed", "7", "--n", "200", "--out", str(again)])
    assert again.read_bytes() == het_csv.read_bytes()
    assert (tmp_path / "again.params.json").read_bytes() == (tmp_path / "het.params.json").read_bytes()


def test_simulate_probit_preset_via_config(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"dgp": {"preset": "probit-paper", "seed": 3, "n": 50},
                                             "output": {"dataset": str(tmp_path / "p.csv")}})
    assert cli.main(["simulate", "--config", str(cfg)]) == 0
    assert (tmp_path / "p.csv").read_text().split("\n", 1)[0] == "y,x1,x2,x3,x4,x5"


def test_simulate_requires_seed(tmp_path, capsys):
    assert cli.main(["simulate", "--preset", "het-paper", "--out", str(tmp_path / "x.csv")]) != 0
    assert "seed" in capsys.readouterr().err


def test_fit_converges_on_probit(tmp_path, capsys):
    path = tmp_path / "p.csv"
    cli.main(["simulate", "--preset", "probit-paper", "--seed", "7", "--out", str(path)])
    capsys.readouterr()
    assert cli.main(["fit", str(path), "--method", "bfgs", "--start", "0,0,0,0,0"]) == 0
    out = json.loads(capsys.readouterr().out)
    fm.validate(out, "fit")
    assert out["result"]["terminated"] == "converged"
    assert out["plateau"] is False


def test_fit_sann_is_repeatable(tmp_path, het_csv):
    args = ["fit", str(het_csv), "--method", "sann", "--seed", "7", "--sann-budget", "300", "--start", "random:2"]
    cli.main(args + ["--out", str(tmp_path / "a.json")])
    cli.main(args + ["--out", str(tmp_path / "b.json")])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_fit_missing_dataset(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert cli.main(["fit", str(missing)]) != 0
    assert str(missing) in capsys.readouterr().err


def test_fit_bad_start_length(het_csv, capsys):
    assert cli.main(["fit", str(het_csv), "--start", "0,0"]) != 0
    assert "--start" in capsys.readouterr().err


def test_fit_two_stage(tmp_path, het_csv):
    cli.main(["fit", str(het_csv), "--two-stage", "--start", "0,0,0,9,9", "--out", str(tmp_path / "f.json")])
    out = json.loads((tmp_path / "f.json").read_text())
    fm.validate(out, "fit")
    assert out["two_stage"] is not None


def test_multistart_outputs(tmp_path, het_csv):
    cfg = write_config(tmp_path / "c.json", {"multistart": {"num_starts": 10, "seed": 1},
                                             "methods": [{"method": "BFGS"}, {"method": "NelderMead"}]})
    out = tmp_path / "ms"
    assert cli.main(["multistart", str(het_csv), "--config", str(cfg), "--out-dir", str(out), "--threads", "1"]) == 0
    report = json.loads((out / "report.json").read_text())
    fm.validate(report, "report")
    for label in ("BFGS", "NelderMead"):
        for name in ("distance_hist", "valuegap_hist"):
            bins, better = fm.read_histogram_csv(out / label / f"{name}.csv")
            assert sum(c for _, _, c in bins) + (better or 0) == 10
            ET.parse(out / label / f"{name}.svg")
        bins, better = fm.read_histogram_csv(out / label / "valuegap_hist.csv")
        assert better is not None


def test_multistart_requires_seed(tmp_path, het_csv, capsys):
    cfg = write_config(tmp_path / "c.json", {"multistart": {"num_starts": 3}})
    assert cli.main(["multistart", str(het_csv), "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) != 0
    assert "seed" in capsys.readouterr().err


def test_multistart_byte_identical_across_threads(tmp_path, het_csv):
    cfg = write_config(tmp_path / "c.json", {"multistart": {"num_starts": 8, "seed": 2},
                                             "methods": [{"method": "BFGS"},
                                                         {"method": "SANN", "sann": {"eval_budget": 100}}]})
    for t in ("1", "8"):
        cli.main(["multistart", str(het_csv), "--config", str(cfg), "--out-dir", str(tmp_path / t), "--threads", t])
    for rel in ("report.json", "BFGS/distance_hist.csv", "SANN/valuegap_hist.csv", "BFGS/valuegap_hist.svg"):
        assert (tmp_path / "1" / rel).read_bytes() == (tmp_path / "8" / rel).read_bytes()


def test_threads_env_fallback(tmp_path, het_csv, monkeypatch):
    monkeypatch.setenv("HETPROBIT_THREADS", "2")
    cfg = write_config(tmp_path / "c.json", {"multistart": {"num_starts": 3, "seed": 2}})
    assert cli.main(["multistart", str(het_csv), "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == 0


def test_compare_outputs(tmp_path, het_csv):
    cfg = write_config(tmp_path / "c.json", {"multistart": {"num_starts": 8, "seed": 1}})
    out = tmp_path / "cmp"
    assert cli.main(["compare", str(het_csv), "--config", str(cfg), "--out-dir", str(out), "--threads", "1"]) == 0
    rep = json.loads((out / "compare.json").read_text())
    fm.validate(rep, "compare")
    assert rep["paired_starts"] is True
    a, b = rep["original"]["methods"][0], rep["transformed"]["methods"][0]
    assert [r[:2] for r in a["value_gap_histogram"]["bins"]] == [r[:2] for r in b["value_gap_histogram"]["bins"]]
    for name in ("BFGS_distance_compare.svg", "BFGS_valuegap_compare.svg"):
        ET.parse(out / name)
    # same viewport and axis labels in both single-leg figures
    left = (out / "original" / "BFGS" / "valuegap_hist.svg").read_text()
    right = (out / "transformed" / "BFGS" / "valuegap_hist.svg").read_text()
    ticks = [line for line in left.splitlines() if "text-anchor=\"end\"" in line]
    assert ticks == [line for line in right.splitlines() if "text-anchor=\"end\"" in line]


def test_profile_outputs(tmp_path, het_csv):
    out = tmp_path / "prof"
    args = ["profile", str(het_csv), "--base", str(tmp_path / "het.params.json"), "--range=-5,15",
            "--resolution", "9", "--out-dir", str(out)]
    assert cli.main(args) == 0
    side = json.loads((out / "profile.json").read_text())
    fm.validate(side, "profile")
    a1, a2, vals, clipped = fm.read_profile_csv(out / "profile.csv")
    assert side["clipped_cells"] == int(clipped.sum())
    assert vals.shape == (9, 9)
    ET.parse(out / "profile.svg")


def test_transform_command(tmp_path, het_csv, capsys):
    out = tmp_path / "t.csv"
    assert cli.main(["transform", str(het_csv), "--params", str(tmp_path / "het.params.json"), "--out", str(out)]) == 0
    side = json.loads((tmp_path / "t.params.json").read_text())
    fm.validate(side, "transform")
    assert side["equal"] and side["abs_difference"] < 1e-9
    assert side["max_roundtrip_z_error"] <= 1e-12
    d0, d1 = fm.read_dataset(het_csv), fm.read_dataset(out)
    assert np.array_equal(d1.Z, d0.Z - 0.5)
    assert "equal" in capsys.readouterr().err


def test_transform_failed_check_exit_code(tmp_path, het_csv, monkeypatch):
    monkeypatch.setattr(cli, "TRANSFORM_TOL", -1.0)
    rc = cli.main(["transform", str(het_csv), "--params", str(tmp_path / "het.params.json"),
                   "--out", str(tmp_path / "t.csv")])
    assert rc == cli.EXIT_CHECK_FAILED


def test_benchmark_command(tmp_path, het_csv, capsys):
    capsys.readouterr()
    assert cli.main(["benchmark", str(het_csv), "--params", str(tmp_path / "het.params.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    fm.validate(out, "benchmark")
    assert out["benchmark"] == pytest.approx(-200 * np.log(2), rel=1e-15)
    assert out["negative_z"] is False


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "hetprobit", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for cmd in ("simulate", "fit", "multistart", "profile", "transform", "compare", "benchmark"):
        assert cmd in r.stdout
