import numpy as np
import pytest

from oamcorr.harness import (
    CSV_HEADER,
    ExperimentConfig,
    child_seed,
    default_nout_grid,
    run_experiment,
    run_realization,
    summarize,
    sweep_nout,
    sweep_w,
    validate_screens,
    write_rows_csv,
)


def tiny_config(**overrides):
    """Sub-second configuration: 9 output dims on a 128^2 grid, short path."""
    base = dict(
        n=128,
        window=1.6,
        p_values=(0,),
        ell_range=(-1, 1),
        cn2=3e-17,
        z=2000.0,
        m_fraction=0.7,
        realizations=3,
        capture_floor=0.5,
        master_seed=123,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_child_seed_stability():
    assert child_seed(1, 2, "turbulence") == child_seed(1, 2, "turbulence")
    seeds = {
        child_seed(1, 2, "turbulence"),
        child_seed(1, 2, "sampling"),
        child_seed(1, 3, "turbulence"),
        child_seed(2, 2, "turbulence"),
    }
    assert len(seeds) == 4


def test_config_round_trip_and_validation(tmp_path):
    config = ExperimentConfig.desk(master_seed=9)
    back = ExperimentConfig.from_dict(config.to_dict())
    assert back == config
    path = tmp_path / "config.json"
    import json

    path.write_text(json.dumps(config.to_dict()))
    assert ExperimentConfig.from_json(path) == config
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_dict({"bogus": 1})


def test_config_derived_quantities():
    config = ExperimentConfig.desk()
    assert config.n == 512
    assert config.output_basis().n_total == 108
    assert config.m_count(108) == int(round(0.2 * 108 * 108))
    # default path: two Rayleigh ranges
    assert config.propagation_distance() == pytest.approx(2 * np.pi * 0.1**2 / 1e-6)
    # target_w rescales cn2 to land exactly on W at the configured z
    cfg_w = ExperimentConfig.desk(target_w=0.5)
    assert cfg_w.scintillation_w() == pytest.approx(0.5, rel=1e-12)
    assert ExperimentConfig.desk(target_w=2.0).effective_cn2() > cfg_w.effective_cn2()
    # auto window never shrinks below 16 waists and grows for large W
    assert cfg_w.window_value() >= 16 * cfg_w.waist
    assert ExperimentConfig.desk(target_w=2.0, z=9e4).window_value() > 16 * 0.1
    assert ExperimentConfig.desk(window=2.5).window_value() == 2.5
    paper = ExperimentConfig.paper()
    assert paper.output_basis().n_total == 630
    assert paper.m_count(630) == 19845


def test_run_realization_row():
    row = run_realization(tiny_config(), 0)
    assert row.ok
    assert row.n_out == 9
    assert row.m == int(round(0.7 * 81))
    assert 0 <= row.metrics["F_corr"] <= 1
    assert row.metrics["F_corr"] >= row.metrics["F_unc"] - 1e-9
    assert np.isfinite(row.residual)
    assert row.captured > 0.5


def test_run_experiment_deterministic_and_csv(tmp_path):
    config = tiny_config()
    res1 = run_experiment(config)
    res2 = run_experiment(config)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_rows_csv(p1, res1.rows)
    write_rows_csv(p2, res2.rows)
    assert p1.read_bytes() == p2.read_bytes()
    text = p1.read_text().splitlines()
    assert text[0] == CSV_HEADER
    assert len(text) == 1 + config.realizations
    assert all(line.endswith(",ok") for line in text[1:])


def test_run_experiment_parallel_matches_serial():
    config = tiny_config(realizations=2)
    serial = run_experiment(config, threads=1)
    parallel = run_experiment(config, threads=2)
    for a, b in zip(serial.rows, parallel.rows):
        assert a == b


def test_failed_realizations_are_isolated():
    config = tiny_config(capture_floor=1.01)  # captured power can never reach it
    result = run_experiment(config)
    assert len(result.rows) == config.realizations
    assert all(row.status == "CaptureTooLow" for row in result.rows)
    assert result.summary == []  # nothing to aggregate, nothing crashed


def test_summarize_math():
    from oamcorr.harness import RealizationRow

    rows = [
        RealizationRow(0, 1, 0.5, 9, 24, {m: v for m, v in zip(
            ("F_corr", "F_unc", "D_corr", "D_unc", "Neg_corr", "Neg_unc"),
            (0.9, 0.5, 0.1, 0.6, 0.8, 0.4))}),
        RealizationRow(1, 2, 0.5, 9, 24, {m: v for m, v in zip(
            ("F_corr", "F_unc", "D_corr", "D_unc", "Neg_corr", "Neg_unc"),
            (0.7, 0.3, 0.3, 0.8, 0.6, 0.2))}),
    ]
    summary = summarize(rows)
    f_corr = next(s for s in summary if s["metric"] == "F_corr")
    assert f_corr["mean"] == pytest.approx(0.8)
    assert f_corr["stderr"] == pytest.approx(np.std([0.9, 0.7], ddof=1) / np.sqrt(2))
    assert f_corr["count"] == 2
    assert f_corr["group_keys"] == {"W": 0.5, "N_out": 9}


def test_sweep_nout_paired_seeds():
    config = tiny_config(realizations=2)
    sizes = [((0,), (-1, 1)), ((0, 1), (-1, 1))]
    result = sweep_nout(config, sizes)
    assert len(result.rows) == 4
    by_size = {}
    for row in result.rows:
        by_size.setdefault(row.n_out, []).append(row)
    assert set(by_size) == {9, 18}
    # paired turbulence seeds across basis sizes
    assert [r.seed for r in by_size[9]] == [r.seed for r in by_size[18]]
    with pytest.raises(ValueError):
        sweep_nout(config, [((1,), (-1, 1))])  # input modes not contained


def test_sweep_w_sets_distance():
    config = tiny_config(realizations=1, z=None, cn2=1e-16, n=256, window=None,
                         capture_floor=0.0)
    result = sweep_w(config, w_values=(0.5, 1.0))
    ws = sorted({round(r.w, 6) for r in result.rows})
    assert ws == [0.5, 1.0]
    assert [r.seed for r in result.rows[:1]] == [r.seed for r in result.rows[1:]]


def test_validate_screens_rows():
    from oamcorr.turbulence import fried_parameter

    # window chosen so the slab r0 sits well inside the grid
    r0 = fried_parameter(1.916e-18, 500.0, 1e-6)
    config = tiny_config(n=128, window=8 * r0, cn2=1.916e-18, z=1000.0)
    rows = validate_screens(config, ensemble=100, seed=5)
    assert {row["n_s"] for row in rows} == {3, 0}
    for row in rows:
        assert row["D_analytic"] > 0
        assert row["rel_error"] == pytest.approx(
            row["D_measured"] / row["D_analytic"] - 1.0
        )
    with_sub = [abs(r["rel_error"]) for r in rows if r["n_s"] == 3]
    without = [r["rel_error"] for r in rows if r["n_s"] == 0]
    assert max(with_sub) < 0.2
    assert min(without) < -0.2


def test_default_nout_grid_sizes():
    config = ExperimentConfig.desk()
    sizes = []
    for p_values, ell_range in default_nout_grid(config):
        basis = ExperimentConfig.desk(
            p_values=p_values, ell_range=ell_range
        ).output_basis()
        sizes.append(basis.n_total)
    assert sizes == [9, 36, 72, 108]
