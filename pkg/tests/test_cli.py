import csv

import numpy as np
import pytest

from blockbound.cli import main, read_series

from conftest import ar1


@pytest.fixture
def series_file(tmp_path):
    path = tmp_path / "series.csv"
    path.write_text("value\n" + "\n".join(format(v, ".17g") for v in ar1(0.6, 300, seed=1)) + "\n")
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_bound_deterministic(series_file, tmp_path, capsys):
    outs = []
    for i in range(2):
        out = tmp_path / f"b{i}.csv"
        assert run("bound", "--input", series_file, "--d", 2, "--B", 100, "--alpha", 0.1, "--seed", 7, "-o", out) == 0
        outs.append((out.read_bytes(), (tmp_path / f"b{i}_eta.csv").read_bytes()))
    assert outs[0] == outs[1]
    rows = list(csv.DictReader(open(tmp_path / "b0.csv")))
    assert float(rows[0]["upper_bound"]) == pytest.approx(
        float(rows[0]["train_error"]) + float(rows[0]["eta_quantile"]), rel=1e-15
    )
    assert rows[0]["seed"] == "7" and rows[0]["B"] == "100"
    eta = list(csv.DictReader(open(tmp_path / "b0_eta.csv")))
    assert len(eta) == 100
    assert "upper bound" in capsys.readouterr().out


def test_bound_from_dgp(capsys):
    code = run("bound", "--dgp", "arma", "--phi", "0.5,0.5", "--theta", "0.5,0.25", "--n", 300,
               "--d", 2, "--B", 50, "--seed", 3)
    assert code == 0
    assert "arma simulation" in capsys.readouterr().out


def test_bound_missing_d(series_file, capsys):
    assert run("bound", "--input", series_file) == 2
    assert "--d" in capsys.readouterr().err


def test_bound_bad_rows(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("# comment\n1.0\n2.0\nabc\n")
    assert run("bound", "--input", path, "--d", 2) == 3
    assert ":4:" in capsys.readouterr().err


def test_bound_unreadable(tmp_path):
    assert run("bound", "--input", tmp_path / "missing.txt", "--d", 2) == 3


def test_bound_degenerate_exit_code(tmp_path):
    path = tmp_path / "const.txt"
    path.write_text("\n".join(["2.5"] * 40))
    assert run("bound", "--input", path, "--d", 3, "--B", 20) == 4


def test_simulate_round_trip(tmp_path):
    out = tmp_path / "sim.txt"
    assert run("simulate", "--dgp", "markov", "--n", 200, "--seed", 11, "-o", out) == 0
    text = out.read_text()
    assert "# seed: 11" in text
    s = read_series(str(out))
    from blockbound.dgp import preset, simulate
    from blockbound.core import RngStream

    assert s == simulate(preset("markov"), 200, 1000, RngStream(11)).series
    again = tmp_path / "again.txt"
    run("simulate", "--dgp", "markov", "--n", 200, "--seed", 11, "-o", again)
    assert again.read_bytes() == out.read_bytes()


@pytest.mark.parametrize("dgp", ["arma", "ar_arch", "markov"])
def test_simulate_each_dgp(dgp, tmp_path):
    out = tmp_path / "s.txt"
    assert run("simulate", "--dgp", dgp, "--n", 50, "-o", out) == 0
    assert len(read_series(str(out))) == 50


def test_simulate_invalid_spec():
    assert run("simulate", "--dgp", "ar_arch", "--phi1", "1.5") == 2


def test_coverage_csv(tmp_path):
    out = tmp_path / "cov.csv"
    code = run("coverage", "--dgp", "arma", "--phi", "0.5", "--d", 2, "--sizes", "40,60", "--n-outer", 8,
               "--B", 20, "--alpha", "0.05,0.2", "--horizon", 100, "--seed", 5, "-o", out)
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "dgp,n,alpha,coverage,n_outer,B,failures"
    rows = list(csv.reader(lines[1:]))
    assert [(r[1], r[2]) for r in rows] == [
        ("40", "0.050000000000000003"), ("60", "0.050000000000000003"),
        ("40", "0.20000000000000001"), ("60", "0.20000000000000001"),
    ]
    assert all(float(a[3]) >= float(b[3]) for a, b in zip(rows[:2], rows[2:]))


def test_cv_single_value(series_file, capsys):
    assert run("cv", "--input", series_file, "--d", 3, "--k", 5) == 0
    from blockbound.crossval import kfold_cv_risk

    value = float(capsys.readouterr().out)
    assert value == kfold_cv_risk(read_series(str(series_file)), 3, 5).value


def test_cv_two_fold_toy(tmp_path, capsys):
    path = tmp_path / "toy.txt"
    path.write_text("1\n2\n0\n1\n3\n")
    assert run("cv", "--input", path, "--d", 2, "--k", 2) == 0
    assert float(capsys.readouterr().out) == pytest.approx(((1 + 36) / 2 + (1 + 2.6**2) / 2) / 2)


def test_cv_bad_k(series_file):
    assert run("cv", "--input", series_file, "--k", 1) == 2


def test_cv_normality_csv(tmp_path):
    out = tmp_path / "qq.csv"
    assert run("cv", "--normality", "--dgp", "arma", "--n", 60, "--n-runs", 120, "--seed", 2, "-o", out) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (120, 2)
    assert np.all(np.diff(data[:, 1]) >= 0)
    assert out.read_text().startswith("theoretical,sample\n")


def test_blocklength(series_file, capsys, tmp_path):
    from blockbound.bootstrap import block_length

    assert run("blocklength", "--input", series_file) == 0
    assert int(capsys.readouterr().out) == block_length(read_series(str(series_file)))
    short = tmp_path / "short.txt"
    short.write_text("1\n2\n3\n")
    assert run("blocklength", "--input", short) == 3


def test_config_precedence(series_file, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# bound run\ninput = {series_file}\nd = 2\nB = 40\nseed = 4\n")
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    assert run("bound", "--config", cfg, "-o", a) == 0
    assert run("bound", "--input", series_file, "--d", 2, "--B", 40, "--seed", 4, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert run("bound", "--config", cfg, "--seed", 5, "-o", c) == 0
    assert c.read_bytes() != a.read_bytes()
    assert "5" == list(csv.DictReader(open(c)))[0]["seed"]


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("d = 2\nbogus = 1\n")
    assert run("bound", "--config", cfg) == 2


def test_seed_env(series_file, tmp_path, monkeypatch):
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    monkeypatch.setenv("BLOCKBOUND_SEED", "21")
    run("bound", "--input", series_file, "--d", 2, "--B", 30, "-o", a)
    run("bound", "--input", series_file, "--d", 2, "--B", 30, "--seed", 21, "-o", b)
    run("bound", "--input", series_file, "--d", 2, "--B", 30, "--seed", 22, "-o", c)
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main(["bound", "--B", "abc"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
