import csv
import io
import json
import math

import numpy as np
import pytest

from subgauss import cli, harness
from subgauss.harness import (ConfigError, ExperimentConfig, parse_config, read_csv,
                              run_experiment, success_matrix, summarize, write_csv)


def _cfg(tmp_path, **kw):
    kw.setdefault("out", str(tmp_path))
    return ExperimentConfig(**kw)


# -- configuration ------------------------------------------------------------

def test_config_errors_point_at_lines():
    text = '{\n  "experiment": "recover",\n  "bogus": 3\n}\n'
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 3 and "bogus" in str(exc.value)

    text = '{\n  "experiment": "recover",\n  "k": [16],\n  "trials": -1\n}'
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 4

    with pytest.raises(ConfigError) as exc:
        parse_config('{\n  "experiment": "recover",\n  "n": [64,\n}')
    assert exc.value.line is not None

    with pytest.raises(ConfigError) as exc:
        parse_config('{\n\n  "experiment": "width"\n}', expect="recover")
    assert exc.value.line == 3


@pytest.mark.parametrize("bad", [
    {"n": []}, {"k": [0]}, {"m": [1.5]}, {"ensemble": "cauchy"}, {"seed": -1},
    {"mode": "fast"}, {"set": "linf"}, {"alpha": 0.0}, {"experiment": "nope"},
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig(**{"experiment": "recover", **bad})


def test_overrides_win_and_hash_is_canonical():
    a = parse_config('{"experiment": "recover", "seed": 5}', {"seed": 7, "k": None})
    assert a.seed == 7 and a.k == [32]
    b = parse_config('{"seed": 7, "experiment": "recover"}')
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != parse_config('{"experiment": "recover", "seed": 8}').config_hash()
    assert a.config_hash() == parse_config('{"experiment": "recover", "seed": 7, "out": "x"}').config_hash()
    assert ExperimentConfig("recover", n=64).n == [64]


# -- runs ---------------------------------------------------------------------

def test_zero_trials_write_header_only(tmp_path):
    paths = run_experiment(_cfg(tmp_path, experiment="recover", trials=0))
    meta, header, rows = read_csv(paths["csv"])
    assert rows == [] and header == ["n", "k", "m", "trial", "seed", "outcome", "error", "residual"]
    assert meta["experiment"] == "recover"


@pytest.mark.parametrize("experiment,extra", [
    ("recover", {"n": [24], "k": [12], "m": [1, 3]}),
    ("recover", {"n": [32], "k": [16], "mode": "approx", "epsilon": [1e-3]}),
    ("empirical", {"n": [8], "k": [16, 64]}),
    ("width", {"set": "l1", "n": [10], "samples": 200}),
    ("rstar", {"n": [16], "k": [8], "samples": 200}),
    ("ensemble-check", {"ensemble": "uniform", "n": [5], "samples": 500}),
    ("neighborly", {"ensemble": "rademacher", "n": [12], "k": [8], "m": [2]}),
])
def test_rerun_is_byte_identical(tmp_path, experiment, extra):
    cfg = _cfg(tmp_path / "a", experiment=experiment, trials=3, seed=11, **extra)
    first = run_experiment(cfg)
    again = run_experiment(_cfg(tmp_path / "b", experiment=experiment, trials=3, seed=11, **extra))
    assert first["csv"].read_bytes() == again["csv"].read_bytes()
    assert first["csv"].name == again["csv"].name


def test_threads_do_not_change_results(tmp_path):
    extra = dict(experiment="recover", n=[24], k=[12], m=[2, 4], trials=4, seed=3)
    one = run_experiment(_cfg(tmp_path / "a", **extra))
    two = run_experiment(_cfg(tmp_path / "b", **extra), threads=2)
    assert one["csv"].read_bytes() == two["csv"].read_bytes()


def test_outputs_carry_header_hash_and_seed(tmp_path):
    cfg = _cfg(tmp_path, experiment="recover", n=[20], k=[10], m=[2], trials=2, seed=42)
    paths = run_experiment(cfg)
    for key in ("csv", "times"):
        meta, header, rows = read_csv(paths[key])
        assert meta == {"experiment": "recover", "config_hash": cfg.config_hash(), "base_seed": "42"}
        assert header[:5] == ["n", "k", "m", "trial", "seed"]
        assert [r[4] for r in rows] == ["42", "43"]
    assert paths["csv"].read_bytes().count(b"\r\n") == 3 + 1 + 2
    manifest = json.loads(paths["manifest"].read_text())
    assert manifest["config_hash"] == cfg.config_hash() and manifest["base_seed"] == 42
    assert manifest["config"]["trials"] == 2 and "lp_feasibility" in manifest["tolerances"]
    assert manifest["version"]


def test_trial_seeds_are_base_plus_index(tmp_path):
    a = run_experiment(_cfg(tmp_path / "a", experiment="empirical", n=[6], k=[10], trials=3, seed=5))
    b = run_experiment(_cfg(tmp_path / "b", experiment="empirical", n=[6], k=[10], trials=1, seed=7))
    # columns: n, k, trial, seed, metrics...; trial 2 of base 5 is trial 0 of base 7
    row_a = read_csv(a["csv"])[2][2]
    row_b = read_csv(b["csv"])[2][0]
    assert row_a[2] == "2" and row_a[3:] == row_b[3:]


def test_reals_use_seventeen_digits():
    assert harness.fmt(0.1) == "0.10000000000000001"
    assert float(harness.fmt(1 / 3)) == 1 / 3
    assert harness.fmt(math.nan) == "nan" and harness.fmt(True) == "1"
    buf = io.StringIO()
    write_csv(buf, ["a", "b"], [[1.5, 'x,"y"']], {"k": "v"})
    assert buf.getvalue() == '# k=v\r\na,b\r\n1.5,"x,""y"""\r\n'


def test_failure_removes_partial_outputs(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("disk full")
    monkeypatch.setattr(harness, "_write_phase_matrix", boom)
    cfg = _cfg(tmp_path, experiment="phase", n=[12], k=[6], m=[1], trials=1)
    with pytest.raises(RuntimeError):
        run_experiment(cfg)
    assert list(tmp_path.iterdir()) == []


def test_phase_matrix_is_monotone(tmp_path):
    cfg = _cfg(tmp_path, experiment="phase", n=[64], k=[16, 32, 48],
               m=list(range(1, 13)), trials=50)
    paths = run_experiment(cfg)
    keys, ms, rates = success_matrix(paths["matrix"])
    assert keys == [(64, 16), (64, 32), (64, 48)] and ms == list(range(1, 13))
    assert rates.shape == (3, 12)
    for row in rates:
        assert np.all(np.diff(row) <= 0.10), row
    # more measurements never hurt much either
    assert np.all(rates[2] >= rates[0] - 0.10)
    # the matrix agrees with the per-trial rows
    _, header, rows = read_csv(paths["csv"])
    sel = [r for r in rows if r[1] == "32" and r[2] == "5"]
    assert rates[1, 4] == pytest.approx(np.mean([r[5] == "success" for r in sel]))


# -- summaries ----------------------------------------------------------------

def _write_rows(path, rows, experiment="empirical", header=("n", "k", "trial", "seed", "sup_abs_Z")):
    write_csv(path, list(header), rows, {"experiment": experiment, "config_hash": "x", "base_seed": 0})
    return path


def _stat(rows, header, **where):
    out = {}
    for r in rows:
        rec = dict(zip(header, r))
        if all(str(rec[k]) == str(v) for k, v in where.items()):
            out[rec["statistic"]] = rec["value"]
    return out


def test_summarize_single_row(tmp_path):
    p = _write_rows(tmp_path / "a.csv", [[8, 16, 0, 0, 0.25]])
    header, rows = summarize([p])
    s = _stat(rows, header, metric="sup_abs_Z")
    assert s["mean"] == 0.25 and s["count"] == 1 and s["q50"] == 0.25 and s["std"] == 0.0


def test_summarize_identical_rows(tmp_path):
    p = _write_rows(tmp_path / "a.csv", [[8, 16, 0, 0, 0.25], [8, 16, 1, 1, 0.25]])
    header, rows = summarize([p])
    s = _stat(rows, header, metric="sup_abs_Z")
    assert s["std"] == 0.0 and s["mean"] == 0.25 and s["count"] == 2


def test_summarize_recovers_exact_power_law(tmp_path):
    ks = [16, 32, 64, 128, 256, 512]
    p = _write_rows(tmp_path / "a.csv", [[8, k, i, i, k ** -0.5] for i, k in enumerate(ks)])
    header, rows = summarize([p])
    s = _stat(rows, header, metric="sup_abs_Z", k="*")
    assert abs(s["slope"] + 0.5) <= 1e-9 and s["slope_se"] <= 1e-9


def test_summarize_merges_files_and_shares_categories(tmp_path):
    hdr = ("n", "k", "m", "trial", "seed", "outcome", "error", "residual")
    a = _write_rows(tmp_path / "a.csv", [[8, 4, 1, 0, 0, "success", 0.0, 0.0]], "recover", hdr)
    b = _write_rows(tmp_path / "b.csv", [[8, 4, 1, 1, 1, "failure", 1.0, 0.0]], "recover", hdr)
    header, rows = summarize([a, b])
    s = _stat(rows, header, metric="outcome")
    assert s == {"share:failure": 0.5, "share:success": 0.5}
    assert _stat(rows, header, metric="error")["mean"] == 0.5


def test_summarize_schema_mismatch(tmp_path):
    a = _write_rows(tmp_path / "a.csv", [[8, 16, 0, 0, 0.25]])
    b = _write_rows(tmp_path / "b.csv", [[8, 16, 0, 0, 0.25]],
                    header=("n", "k", "trial", "seed", "other"))
    with pytest.raises(ValueError):
        summarize([a, b])
    c = _write_rows(tmp_path / "c.csv", [[8, 16, 0, 0, 0.25]], experiment="width")
    with pytest.raises(ValueError):
        summarize([a, c])


# -- command line -------------------------------------------------------------

def test_cli_runs_and_reports_config_errors(tmp_path, capsys):
    out = tmp_path / "res"
    assert cli.main(["recover", "--n", "20", "--k", "10", "--m", "1,2", "--trials", "2",
                     "--seed", "3", "--out", str(out)]) == 0
    meta, header, rows = read_csv(out / "recover.csv")
    assert len(rows) == 4 and meta["base_seed"] == "3"

    cfg = tmp_path / "c.json"
    cfg.write_text('{\n  "experiment": "recover",\n  "bogus": 1\n}\n')
    assert cli.main(["recover", "--config", str(cfg)]) == 2
    assert "line 3: unknown key 'bogus'" in capsys.readouterr().err

    capsys.readouterr()
    assert cli.main(["summarize", str(out / "recover.csv")]) == 0
    lines = capsys.readouterr().out.splitlines()
    parsed = list(csv.reader(l for l in lines if not l.startswith("#")))
    assert parsed[0] == ["n", "k", "m", "metric", "statistic", "value"]
    assert cli.main(["summarize", str(tmp_path / "missing.csv")]) == 2


def test_cli_phase_and_neighborly(tmp_path):
    out = tmp_path / "res"
    assert cli.main(["phase", "--n", "16", "--kgrid", "8", "--mgrid", "1,2", "--trials", "2",
                     "--out", str(out)]) == 0
    assert (out / "phase_matrix.csv").exists()
    assert cli.main(["neighborly", "--ensemble", "rademacher", "--k", "8", "--n", "12",
                     "--m", "2", "--sampled", "20", "--symmetric", "--trials", "1",
                     "--out", str(out)]) == 0
    _, header, rows = read_csv(out / "neighborly.csv")
    assert rows[0][header.index("verdict")] in ("neighborly", "counterexample")
