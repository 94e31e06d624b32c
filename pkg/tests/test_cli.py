import json

import numpy as np
import pytest

from balimpute.cli import main
from balimpute.population import load_thompson_example
from balimpute.sampling import SampleData, sample_to_csv


def write_thompson_csv(path):
    th = load_thompson_example()
    pi = np.full(10, 10 / 53)
    s = SampleData(indices=np.arange(10), pi=pi, d=1.0 / pi, respond=th.respond)
    sample_to_csv(path, s, th.y, th.z1, th.z1)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_example_prints_reference_numbers(capsys):
    code, out, err = run(capsys, "example")
    assert code == 0
    assert "0.94" in out
    assert "4.38" in out
    assert "218.33" in out


def test_example_repeatable(capsys):
    _, out1, _ = run(capsys, "example", "--seed", "7")
    _, out2, _ = run(capsys, "example", "--seed", "7")
    assert out1 == out2


def test_generate_sample_pipeline(tmp_path, capsys):
    recipe = tmp_path / "r.json"
    recipe.write_text('{"n_units": 300, "beta": [1.0], "target_r2": 0.36}\n')
    pop = tmp_path / "pop.csv"
    smp = tmp_path / "smp.csv"
    code, _, _ = run(capsys, "generate", "--recipe", str(recipe),
                     "--seed", "3", "--out", str(pop))
    assert code == 0
    code, _, _ = run(capsys, "sample", "--population", str(pop),
                     "--design", "pips-rejective", "--n", "25",
                     "--seed", "4", "--out", str(smp))
    assert code == 0
    lines = smp.read_text().strip().splitlines()
    assert len(lines) == 26


def test_impute_ebri_fills_missing_rows(tmp_path, capsys):
    src = tmp_path / "s.csv"
    write_thompson_csv(src)
    out = tmp_path / "imp.csv"
    report = tmp_path / "rep.json"
    code, _, _ = run(capsys, "impute", "--input", str(src), "--method", "ebri",
                     "--seed", "11", "--out", str(out), "--report", str(report))
    assert code == 0
    rows = out.read_text().strip().splitlines()[1:]
    filled = [r for r in rows if r.split(",")[7] == "1"]
    assert len(filled) == 4
    rep = json.loads(report.read_text())
    assert rep["balance_relative_error"] < 1e-8
    assert len(rep["donors"]) == 4


def test_impute_dri_ignores_seed(tmp_path, capsys):
    src = tmp_path / "s.csv"
    write_thompson_csv(src)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "impute", "--input", str(src), "--method", "dri",
        "--seed", "1", "--out", str(a))
    run(capsys, "impute", "--input", str(src), "--method", "dri",
        "--seed", "2", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_impute_rri_requires_seed(tmp_path, capsys):
    src = tmp_path / "s.csv"
    write_thompson_csv(src)
    code, _, err = run(capsys, "impute", "--input", str(src), "--method", "rri",
                       "--out", str(tmp_path / "x.csv"))
    assert code == 2
    assert "--seed" in err


def test_impute_malformed_csv_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,y,z1,v,pi,d,r\n1,1.0,1.0,1.0,0.5,2.0,1\n2,zzz,1.0,1.0,0.5,2.0,1\n")
    code, _, err = run(capsys, "impute", "--input", str(bad), "--method", "dri",
                       "--out", str(tmp_path / "x.csv"))
    assert code == 2
    assert "line 3" in err


def test_simulate_missing_config(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--config", str(tmp_path / "none.json"),
                       "--out", str(tmp_path / "res"))
    assert code == 2
    assert "config" in err


def test_simulate_requires_seed(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "populations": [{"n_units": 200, "beta": [1.0], "target_r2": 0.36}],
        "mechanisms": [{"kind": "mcar", "level": 0.5}],
        "replications": 2, "sample_size": 10,
    }))
    code, _, err = run(capsys, "simulate", "--config", str(cfg),
                       "--out", str(tmp_path / "res"))
    assert code == 2
    assert "seed" in err


def test_simulate_dry_run_touches_nothing(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "seed": 5,
        "populations": [{"n_units": 200, "beta": [1.0], "target_r2": 0.36}],
        "mechanisms": [{"kind": "mcar", "level": 0.5}],
        "replications": 2, "sample_size": 10,
    }))
    outdir = tmp_path / "res"
    code, out, _ = run(capsys, "simulate", "--config", str(cfg),
                       "--out", str(outdir), "--dry-run")
    assert code == 0
    assert not outdir.exists()
    resolved = json.loads(out)
    assert resolved["seed"] == 5
    assert resolved["replications"] == 2


def test_simulate_tiny_run_writes_tables(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "seed": 6,
        "populations": [{"n_units": 300, "beta": [1.0], "target_r2": 0.64}],
        "mechanisms": [{"kind": "mcar", "level": 0.5}],
        "replications": 10, "sample_size": 20,
    }))
    outdir = tmp_path / "res"
    code, _, _ = run(capsys, "simulate", "--config", str(cfg), "--out", str(outdir))
    assert code == 0
    assert (outdir / "table_total.csv").exists()
    assert (outdir / "table_df.csv").exists()
    assert (outdir / "run_meta.json").exists()


def test_seed_override_beats_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "seed": 5,
        "populations": [{"n_units": 200, "beta": [1.0], "target_r2": 0.36}],
        "mechanisms": [{"kind": "mcar", "level": 0.5}],
        "replications": 2, "sample_size": 10,
    }))
    code, out, _ = run(capsys, "simulate", "--config", str(cfg),
                       "--out", str(tmp_path / "r"), "--seed", "99", "--dry-run")
    assert code == 0
    assert json.loads(out)["seed"] == 99


def test_unknown_flag_rejected(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["example", "--frobnicate"])
    assert exc.value.code == 2
