import json

import numpy as np
import pytest

import ebel.experiments as ex
from ebel.cli import main, parse_c_grid, read_series
from ebel.errors import NonConvergence
from ebel.processes import ArmaSpec, simulate_arma


@pytest.fixture
def series_file(tmp_path):
    x = simulate_arma(ArmaSpec(phi=(0.5,), innovation="standard_normal"), 300,
                      np.random.default_rng(0))
    path = tmp_path / "x.csv"
    path.write_text("value\n" + "\n".join(repr(float(v)) for v in x) + "\n")
    return path, x


def parse_output(text):
    return dict(line.split(": ", 1) for line in text.strip().splitlines())


def test_quantiles_byte_identical_across_paths_and_threads(tmp_path, capsys):
    args = ["quantiles", "--reps", "1000", "--grid", "100", "--seed", "4", "--levels", "0.5,0.9"]
    assert main(args + ["--out", str(tmp_path / "a.csv"), "--threads", "1"]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--threads", "2"]) == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()
    assert a.startswith(b"# ebel ")
    # refuses to clobber, then overwrites on request
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 2
    assert main(args + ["--out", str(tmp_path / "a.csv"), "--overwrite"]) == 0
    assert (tmp_path / "a.csv").read_bytes() == a


def test_seed_is_required(capsys):
    assert main(["quantiles", "--reps", "1000"]) == 2
    assert "seed" in capsys.readouterr().err


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"reps": 1000, "grid": 100, "seed": 1, "levels": "0.9"}))
    out1, out2 = tmp_path / "c1.csv", tmp_path / "c2.csv"
    assert main(["quantiles", "--config", str(cfg), "--out", str(out1), "--threads", "1"]) == 0
    assert main(["quantiles", "--config", str(cfg), "--seed", "2", "--out", str(out2),
                 "--threads", "1"]) == 0
    h1 = out1.read_text().splitlines()
    h2 = out2.read_text().splitlines()
    run1 = json.loads(h1[1].split(": ", 1)[1])
    run2 = json.loads(h2[1].split(": ", 1)[1])
    assert run1["seed"] == 1 and run2["seed"] == 2 and run2["reps"] == 1000
    assert json.loads(h2[3].split(": ", 1)[1]) == {"seed": 2}
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"replicates": 10}))
    assert main(["quantiles", "--config", str(bad), "--seed", "1"]) == 2


def test_ci_commands(series_file, capsys):
    path, x = series_file
    assert main(["ci", "--input", str(path)]) == 0
    out = parse_output(capsys.readouterr().out)
    assert float(out["lower"]) < x.mean() < float(out["upper"])
    assert out["method"] == "EBEL1-constant"
    assert main(["ci", "--input", str(path), "--method", "bel", "--block", "aar"]) == 0
    out = parse_output(capsys.readouterr().out)
    assert int(out["chosen_b"]) >= 1 and "rho" in out
    assert main(["ci", "--input", str(path), "--method", "bel"]) == 2


def test_ci_levels_are_nested(series_file, capsys):
    path, _ = series_file
    widths = []
    for level in ("0.8", "0.9", "0.95"):
        assert main(["ci", "--input", str(path), "--method", "bel", "--block", "4",
                     "--level", level]) == 0
        out = parse_output(capsys.readouterr().out)
        widths.append(float(out["upper"]) - float(out["lower"]))
    assert widths == sorted(widths)


def test_select_block_and_bad_input(series_file, tmp_path, capsys):
    path, _ = series_file
    assert main(["select-block", "--input", str(path), "--rule", "ftk"]) == 0
    assert parse_output(capsys.readouterr().out)["rule"] == "FTK"
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\nabc\n2.0\n")
    assert main(["select-block", "--input", str(bad)]) == 2
    wide = tmp_path / "wide.csv"
    wide.write_text("1,2\n3,4\n")
    assert main(["ci", "--input", str(wide)]) == 2


def test_constant_series_warns_but_succeeds(tmp_path, capsys):
    path = tmp_path / "c.csv"
    path.write_text("\n".join(["2.5"] * 40) + "\n")
    assert main(["ci", "--input", str(path)]) == 0
    captured = capsys.readouterr()
    assert "warning" in captured.err
    assert parse_output(captured.out)["degenerate"] == "true"


def test_coverage_and_power_files(tmp_path):
    base = ["--process", "ar:0.5", "--innovation", "standard_normal", "--n", "80",
            "--reps", "30", "--seed", "3", "--mode", "membership", "--threads", "1"]
    cov = tmp_path / "cov.csv"
    pw = tmp_path / "pw.csv"
    assert main(["coverage", *base, "--methods", "ebel1-constant,bel-3", "--out", str(cov)]) == 0
    assert main(["power", *base, "--methods", "ebel1-constant", "--c-grid", "0:2:1",
                 "--out", str(pw)]) == 0
    rows = [r for r in cov.read_text().splitlines() if not r.startswith("#")]
    assert rows[0].startswith("process,n,method,coverage")
    assert len(rows) == 3
    prow = [r.split(",") for r in pw.read_text().splitlines() if not r.startswith("#")]
    assert prow[1][3] == "0" and float(prow[1][5]) == 10.0
    assert main(["coverage", "--process", "ar:1.5", "--n", "50", "--seed", "1"]) == 2


def test_numerical_failure_writes_partial_file(tmp_path, monkeypatch, capsys):
    real = ex.simulate
    calls = []

    def flaky(process, n, rng):
        calls.append(1)
        if len(calls) == 4:
            raise NonConvergence("synthetic failure")
        return real(process, n, rng)

    monkeypatch.setattr(ex, "simulate", flaky)
    out = tmp_path / "partial.csv"
    code = main(["coverage", "--process", "wn", "--n", "60", "--reps", "10", "--seed", "2",
                 "--mode", "membership", "--threads", "1", "--out", str(out)])
    assert code == 3
    text = out.read_text()
    assert "# partial: aborted at replicate 3" in text
    assert text.splitlines()[-1].split(",")[5] == "3"
    assert "numerical failure" in capsys.readouterr().err


def test_helpers(tmp_path):
    assert parse_c_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_c_grid("0,2,4") == [0.0, 2.0, 4.0]
    path = tmp_path / "s.csv"
    path.write_text("1\n2\n\n3\n")
    np.testing.assert_array_equal(read_series(str(path)), [1.0, 2.0, 3.0])
