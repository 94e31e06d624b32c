import logging

import numpy as np
import pytest

from balimpute.harness import (
    ExperimentConfig,
    MechanismSpec,
    mean_squared_error,
    relative_bias_percent,
    relative_efficiency,
    run_experiment,
    write_tables,
)
from balimpute.population import PopulationRecipe


def tiny_config(**overrides):
    base = dict(
        seed=101,
        populations=(PopulationRecipe(n_units=600, beta=(1.0,), target_r2=0.36),),
        mechanisms=(MechanismSpec("mcar", 0.5),),
        sample_size=30,
        replications=20,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_metric_trivials():
    est = np.array([5.0, 5.0, 5.0])
    assert relative_bias_percent(est, 5.0) == 0.0
    assert mean_squared_error(est, 5.0) == 0.0
    assert relative_bias_percent(est * 1.01, 5.0) == pytest.approx(1.0, rel=1e-12)
    assert relative_efficiency(3.0, 3.0) == 1.0
    with pytest.raises(ValueError):
        relative_bias_percent(est, 0.0)


def test_mechanism_labels():
    assert MechanismSpec("mcar", 0.5).label == "mcar0.5"
    assert MechanismSpec("mar", 0.75).label == "mar0.75"
    assert MechanismSpec("full").label == "full"
    with pytest.raises(ValueError):
        MechanismSpec("mcar")
    with pytest.raises(ValueError):
        MechanismSpec("full", 0.5)
    with pytest.raises(ValueError):
        MechanismSpec("census")


def test_config_roundtrip_and_validation():
    cfg = tiny_config()
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again == cfg
    with pytest.raises(ValueError):
        tiny_config(replications=0)
    with pytest.raises(ValueError):
        tiny_config(design="stratified")
    with pytest.raises(ValueError):
        tiny_config(methods=("dri", "bootstrap"))


def test_noiseless_full_response_is_exact():
    # sigma2 = 0 makes y proportional to the size variable, so the design
    # weights reproduce the total exactly in every replicate
    cfg = tiny_config(
        populations=(PopulationRecipe(n_units=400, beta=(1.0,), sigma2=0.0),),
        mechanisms=(MechanismSpec("full"),),
        replications=1,
        alphas=(),
    )
    res = run_experiment(cfg)
    cell = res.cell(0, "full")
    for method in ("dri", "rri", "ebri"):
        assert cell.rb[(method, "total")] == pytest.approx(0.0, abs=1e-9)
        assert cell.mse[(method, "total")] == pytest.approx(0.0, abs=1e-12)


def test_determinism_same_seed():
    a = run_experiment(tiny_config())
    b = run_experiment(tiny_config())
    ca, cb = a.cells[0], b.cells[0]
    assert ca.rb == cb.rb
    assert ca.mse == cb.mse
    assert ca.re == cb.re


def test_worker_count_does_not_change_results():
    a = run_experiment(tiny_config(workers=1))
    b = run_experiment(tiny_config(workers=2))
    assert a.cells[0].rb == b.cells[0].rb
    assert a.cells[0].mse == b.cells[0].mse


def test_kept_replicates_reproduce_aggregates():
    cfg = tiny_config(keep_replicates=True)
    res = run_experiment(cfg)
    cell = res.cells[0]
    assert cell.replicates is not None
    for key, vals in cell.replicates.items():
        assert vals.shape == (cfg.replications,)
        assert np.all(np.isfinite(vals))
    est = cell.replicates[("ebri", "total")]
    assert relative_bias_percent(est, cell.theta_total) == cell.rb[("ebri", "total")]
    assert mean_squared_error(est, cell.theta_total) == cell.mse[("ebri", "total")]


def test_rri_is_efficiency_reference():
    res = run_experiment(tiny_config())
    cell = res.cells[0]
    assert cell.re[("rri", "total")] == 1.0
    for j in range(2):
        assert cell.re[("rri", f"df@{j}")] == 1.0


def test_mar_mechanism_runs():
    cfg = tiny_config(mechanisms=(MechanismSpec("mar", 0.75),), replications=10)
    res = run_experiment(cfg)
    assert res.cell(0, "mar0.75").n_ok == 10


def test_aborted_replicates_are_counted(monkeypatch, caplog):
    import balimpute.harness as H

    calls = {"n": 0}
    real = H.impute_rri

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise RuntimeError("synthetic failure")
        return real(*args, **kwargs)

    monkeypatch.setattr(H, "impute_rri", flaky)
    cfg = tiny_config(replications=400, workers=1)
    with caplog.at_level(logging.WARNING):
        res = run_experiment(cfg)
    cell = res.cells[0]
    assert cell.n_aborted == 1
    assert cell.n_ok == 399
    assert any("aborted" in rec.message for rec in caplog.records)


def test_too_many_aborts_fail_the_run(monkeypatch):
    import balimpute.harness as H

    def broken(*args, **kwargs):
        raise RuntimeError("always down")

    monkeypatch.setattr(H, "impute_ebri", broken)
    with pytest.raises(RuntimeError, match="aborted"):
        run_experiment(tiny_config(replications=20, workers=1))


def test_write_tables_layout(tmp_path):
    cfg = tiny_config(
        populations=(
            PopulationRecipe(n_units=400, beta=(1.0,), target_r2=0.36),
            PopulationRecipe(n_units=400, beta=(1.0,), target_r2=0.64),
        ),
        mechanisms=(MechanismSpec("mcar", 0.5), MechanismSpec("mar", 0.75)),
        replications=5,
    )
    res = run_experiment(cfg)
    write_tables(res, tmp_path)
    total = (tmp_path / "table_total.csv").read_text().strip().splitlines()
    header = total[0].split(",")
    assert header[:2] == ["population", "metric"]
    assert "mcar0.5_dri" in header and "mar0.75_ebri" in header
    assert len(total) == 1 + 2 * 2  # two populations x (rb, re)
    df = (tmp_path / "table_df.csv").read_text().strip().splitlines()
    assert len(df) == 1 + 2 * 2 * 2  # populations x alphas x (rb, re)
    assert (tmp_path / "run_meta.json").exists()
