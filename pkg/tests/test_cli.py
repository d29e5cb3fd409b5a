import datetime as dt
import json

import numpy as np
import pytest

from cpseg.cli import (DataError, ConfigError, bin_event_dates, build_config, ingest, main,
                       parse_config_text, resolve_input)


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_ingest_binary_lines(tmp_path):
    ts = ingest(_write(tmp_path, "b.txt", "0\n1\n1\n"), "binary")
    assert ts.n == 3 and ts.values.tolist() == [0, 1, 1]


def test_ingest_csv_with_header_and_comments(tmp_path):
    ts = ingest(_write(tmp_path, "c.csv", "# note\nvalue\n1.5\n\n2.5\n"), "real")
    assert ts.values.tolist() == [1.5, 2.5]


def test_non_numeric_line_reports_line_number(tmp_path):
    with pytest.raises(DataError, match="line 3"):
        ingest(_write(tmp_path, "x.txt", "1\n2\nabc\n"), "counts")


def test_kind_violation_is_data_error(tmp_path):
    with pytest.raises(DataError, match="index 2"):
        ingest(_write(tmp_path, "x.txt", "0\n2\n"), "binary")


def test_event_dates_to_weekly_counts(tmp_path):
    path = _write(tmp_path, "d.txt", "2000-01-01\n2000-01-03\n2000-01-07\n")
    ts = ingest(path, "counts", events=True, start_date="2000-01-01", end_date="2000-01-14")
    assert ts.values.tolist() == [3, 0]
    counts = bin_event_dates([dt.date(2000, 1, 8)], dt.date(2000, 1, 1), None, 7)
    assert counts.tolist() == [0, 1]


def test_bundled_coal_dates():
    path = resolve_input("coal_dates")
    ts = ingest(path, "counts", events=True, start_date="1851-01-01", end_date="1962-03-22")
    assert ts.values.sum() == 191
    assert ts.n == 5804


def test_config_parsing_and_presets():
    raw = parse_config_text("preset = coal  # defaults\nsweeps = 10\nlambda = 2.5\n")
    cfg = build_config(raw)
    assert cfg.sweeps == 10 and cfg.lam == 2.5 and cfg.model == "poisson"
    with pytest.raises(ConfigError):
        build_config({"input": "x", "bogus": "1"})
    with pytest.raises(ConfigError):
        build_config({"input": "x", "sweeps": "ten"})
    with pytest.raises(ConfigError):
        build_config({"input": "x", "model": "poisson"})


def _run(*args):
    return main(list(args))


def test_exit_codes_and_error_object(tmp_path, capsys):
    bad = _write(tmp_path, "bad.txt", "1\nfoo\n")
    assert _run("sample", "--input", str(bad), "--out", str(tmp_path / "o")) == 3
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 3 and "line 2" in err["message"]
    cfg = _write(tmp_path, "c.cfg", "input = streak\nkind = binary\nmodel = bernoulli\np = 2\n")
    assert _run("sample", "--config", str(cfg)) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "config"
    assert _run("sample", "--input", str(tmp_path / "missing.txt")) == 3


def test_numerical_error_exit_code(tmp_path, monkeypatch):
    import cpseg.cli as cli

    def boom(*_):
        raise FloatingPointError("nan")

    monkeypatch.setitem(cli.RUNNERS, "recurse", boom)
    data = _write(tmp_path, "y.txt", "1\n2\n3\n")
    assert _run("recurse", "--input", str(data), "--out", str(tmp_path / "o")) == 4


def _small_config(tmp_path, extra=""):
    rng = np.random.default_rng(0)
    y = np.r_[rng.normal(0, 1, 4), rng.normal(3, 1, 4)]
    data = _write(tmp_path, "y.txt", "".join(f"{v:.17g}\n" for v in y))
    return _write(tmp_path, "run.cfg", f"input = {data}\nkind = real\nmodel = gaussian\n"
                                       f"sigma = 1\nmu0 = 1.5\nnu = 2\np = 0.2\n{extra}")


def test_same_seed_gives_byte_identical_outputs(tmp_path):
    cfg = _small_config(tmp_path, "sweeps = 3000\nthin = 3\nupdate_gamma = true\nupdate_p = true\n")
    for out in ("a", "b"):
        assert _run("sample", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / out)) == 0
    for name in ("trace.csv", "pos_prob.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert _run("sample", "--config", str(cfg), "--seed", "6", "--out", str(tmp_path / "c")) == 0
    assert (tmp_path / "a" / "trace.csv").read_bytes() != (tmp_path / "c" / "trace.csv").read_bytes()


def test_config_echo_reproduces_run(tmp_path):
    cfg = _small_config(tmp_path, "sweeps = 2000\nupdate_gamma = true\n")
    assert _run("sample", "--config", str(cfg), "--set", "window=3", "--out", str(tmp_path / "a")) == 0
    echo = tmp_path / "a" / "config.txt"
    assert _run("sample", "--config", str(echo), "--out", str(tmp_path / "b")) == 0
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["config"]["window"] == 3


def test_enumerate_agrees_with_sample_mode(tmp_path):
    cfg = _small_config(tmp_path, "sweeps = 200000\n")
    assert _run("enumerate", "--config", str(cfg), "--out", str(tmp_path / "e")) == 0
    assert _run("sample", "--config", str(cfg), "--out", str(tmp_path / "s")) == 0
    e = json.loads((tmp_path / "e" / "summary.json").read_text())
    s = json.loads((tmp_path / "s" / "summary.json").read_text())
    size = max(len(e["k_dist"]), len(s["k_dist"]))
    pe = np.pad(e["k_dist"], (0, size - len(e["k_dist"])))
    ps = np.pad(s["k_dist"], (0, size - len(s["k_dist"])))
    assert 0.5 * np.abs(pe - ps).sum() < 0.02
    assert e["n_segmentations"] == 2 ** 7


def test_floats_written_with_17_significant_digits(tmp_path):
    cfg = _small_config(tmp_path, "sweeps = 50\n")
    assert _run("sample", "--config", str(cfg), "--out", str(tmp_path / "a")) == 0
    line = (tmp_path / "a" / "trace.csv").read_text().splitlines()[1]
    p = line.split(",")[2]
    assert p == f"{0.2:.17g}"


def test_recurse_and_sweep_modes(tmp_path):
    cfg = _small_config(tmp_path, "draws = 2000\nsweep_param = p\nsweep_grid = 0.01,0.2,0.6\n")
    assert _run("recurse", "--config", str(cfg), "--out", str(tmp_path / "r")) == 0
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert sum(summary["k_dist"]) == pytest.approx(1.0)
    assert _run("sweep", "--config", str(cfg), "--out", str(tmp_path / "w")) == 0
    rows = (tmp_path / "w" / "sweep.csv").read_text().splitlines()
    assert rows[0] == "value,modal_k,tie" and len(rows) == 4


def test_coal_preset_runs_end_to_end(tmp_path):
    code = _run("sample", "--preset", "coal", "--set", "sweeps=2000", "--set", "burn_in=100",
                "--set", "thin=10", "--out", str(tmp_path / "coal"))
    assert code == 0
    summary = json.loads((tmp_path / "coal" / "summary.json").read_text())
    assert summary["n"] == 5804
    assert summary["config"]["seg_prior"] == "even_order"
    assert len((tmp_path / "coal" / "trace.csv").read_text().splitlines()) == 201
