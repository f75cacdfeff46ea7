import csv

import numpy as np
import pytest

from bdrbm.evaluation import EMPIRICAL, EXACT_TARGET
from bdrbm.ffnn import RegressionConfig
from bdrbm.pipeline import TRAIN, VALIDATION, TomographyConfig
from bdrbm.rbm import RbmTrainConfig
from bdrbm.sweeps import (FIDELITY_COLUMNS, SCALING_COLUMNS, default_jobs, filter_masses,
                          held_out_dataset, ground_state, mean_by, run_cells, sweep_fidelity,
                          sweep_scaling, write_csv)

TINY = TomographyConfig(fine_tune_rounds=1, first_basis_epochs=20,
                        rbm_config=RbmTrainConfig(epochs=2),
                        regression_config=RegressionConfig(epochs=50))


def _square(x):
    return x * x


def test_run_cells_keeps_order():
    assert run_cells(_square, list(range(7)), jobs=1) == [x * x for x in range(7)]
    assert run_cells(_square, list(range(7)), jobs=2) == [x * x for x in range(7)]


def test_default_jobs_env(monkeypatch):
    monkeypatch.setenv("BDRBM_JOBS", "3")
    assert default_jobs() == 3
    monkeypatch.setenv("BDRBM_JOBS", "many")
    assert default_jobs() == 1


def test_fidelity_sweep_shape():
    jx_list = [0.0, 0.4, 0.8, 1.0, 1.5, 3.0]
    rows = sweep_fidelity(3, jx_list, [0], n_bases=10, shots=200, config=TINY, jobs=1)
    # four series per (jx, seed)
    assert len(rows) == 4 * len(jx_list)
    assert {(r["split"], r["kind"]) for r in rows} == {
        (s, k) for s in (TRAIN, VALIDATION) for k in (EMPIRICAL, EXACT_TARGET)}
    assert all(0 <= r["mean_fc"] <= 1 and r["std_fc"] >= 0 for r in rows)
    assert sorted({r["jx"] for r in rows}) == jx_list


def test_fidelity_sweep_deterministic_and_parallel_safe():
    a = sweep_fidelity(3, [0.5, 2.0], [0, 1], n_bases=8, shots=100, config=TINY, jobs=1)
    b = sweep_fidelity(3, [0.5, 2.0], [0, 1], n_bases=8, shots=100, config=TINY, jobs=2)
    assert a == b


def test_scaling_sweep_rows():
    rows = sweep_scaling([3], [6, 12], [0, 1], n_val=5, shots=200, config=TINY, jobs=1)
    assert [(r["n_bases"], r["seed"]) for r in rows] == [(6, 0), (6, 1), (12, 0), (12, 1)]
    for r in rows:
        assert r["gap"] == pytest.approx(r["reconstructive_fc"] - r["predictive_fc"])


def test_held_out_dataset_split_sizes():
    ds = held_out_dataset(ground_state(3, 1.0, 1.0), 7, 3, 50, 0)
    assert [e.split for e in ds.entries] == [TRAIN] * 7 + [VALIDATION] * 3


def test_filter_masses_keys():
    out = filter_masses(3, 1.0, 0, n_bases=10, shots=200, config=TINY)
    assert set(out) == {"visible_bias", "hidden_bias", "weight", "visible_bias_x", "visible_bias_z"}
    assert out["visible_bias_x"] + out["visible_bias_z"] <= out["visible_bias"] + 1e-12


def test_write_csv_round_trip(tmp_path):
    rows = [{"jx": 1.0, "seed": 0, "split": "train", "kind": "exact",
             "mean_fc": 1 / 3, "std_fc": np.float64(0.1)}]
    write_csv(tmp_path / "f.csv", rows, FIDELITY_COLUMNS)
    back = list(csv.DictReader(open(tmp_path / "f.csv")))
    assert float(back[0]["mean_fc"]) == 1 / 3
    assert back[0]["std_fc"] == "0.1"
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == ",".join(FIDELITY_COLUMNS)
    assert len(SCALING_COLUMNS) == 6


def test_mean_by():
    rows = [{"a": 1, "v": 1.0}, {"a": 1, "v": 3.0}, {"a": 2, "v": 5.0}]
    assert mean_by(rows, ["a"], "v") == {(1,): 2.0, (2,): 5.0}


@pytest.mark.slow
def test_more_bases_predict_at_least_as_well():
    rows = sweep_scaling([2, 4], [25, 400], [0, 1], n_val=20, shots=2000, jobs=1)
    means = mean_by(rows, ["sites", "n_bases"], "predictive_fc")
    for sites in (2, 4):
        assert means[(sites, 400)] >= means[(sites, 25)]
