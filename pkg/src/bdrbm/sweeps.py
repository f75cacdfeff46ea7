"""Sweep drivers producing CSV tables of fidelities over J_x and data size."""
from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import lru_cache

import numpy as np

from .evaluation import EXACT_TARGET, all_reports, fidelity_report, filter_report, overfit_gap
from .pipeline import TRAIN, VALIDATION, DatasetEntry, TomographyConfig, TrainingDataset, child_seed, collect_simulated, run_tomography, train_dataset
from .quantum import TfimParams, canonicalize, tfim_ground_state

log = logging.getLogger(__name__)

JOBS_ENV = "BDRBM_JOBS"
FIDELITY_COLUMNS = ["jx", "seed", "split", "kind", "mean_fc", "std_fc"]
SCALING_COLUMNS = ["sites", "n_bases", "seed", "predictive_fc", "reconstructive_fc", "gap"]


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def run_cells(fn, cells, jobs: int | None = None) -> list:
    """Map ``fn`` over ``cells``; results keep the input order."""
    jobs = default_jobs() if jobs is None else jobs
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cells))


@lru_cache(maxsize=32)
def ground_state(sites: int, jz: float, jx: float, boundary: str = "open", spin: str = "pauli"):
    return tfim_ground_state(TfimParams(sites, jz, jx, boundary, spin))[0]


def fidelity_cell(cell) -> list[dict]:
    """Four fidelity series for one (J_x, seed) point."""
    sites, jz, jx, seed, n_bases, shots, config = cell
    state = ground_state(sites, jz, jx)
    records = collect_simulated(state, n_bases, shots, child_seed(seed, 100))
    result = run_tomography(records, replace(config, rng_seed=seed, n_bases=n_bases, shots=shots))
    rows = []
    for rep in all_reports(result.model, result.dataset, state):
        rows.append({"jx": jx, "seed": seed, "split": rep.split, "kind": rep.kind,
                     "mean_fc": rep.mean, "std_fc": rep.std})
    log.info("fidelity cell jx=%s seed=%s done", jx, seed)
    return rows


def sweep_fidelity(sites: int, jx_list, seeds, n_bases: int = 200, shots: int = 8192,
                   config: TomographyConfig | None = None, jz: float = 1.0,
                   jobs: int | None = None) -> list[dict]:
    config = config or TomographyConfig()
    cells = [(sites, jz, float(jx), int(s), n_bases, shots, config) for jx in jx_list for s in seeds]
    return [row for rows in run_cells(fidelity_cell, cells, jobs) for row in rows]


def held_out_dataset(state, n_train: int, n_val: int, shots: int, seed: int) -> TrainingDataset:
    """``n_train`` training bases plus ``n_val`` independent held-out bases."""
    records = collect_simulated(state, n_train + n_val, shots, child_seed(seed, 101))
    return TrainingDataset([DatasetEntry(canonicalize(r), TRAIN if i < n_train else VALIDATION)
                            for i, r in enumerate(records)])


def scaling_cell(cell) -> dict:
    sites, jz, jx, seed, n_bases, n_val, shots, config = cell
    state = ground_state(sites, jz, jx)
    dataset = held_out_dataset(state, n_bases, n_val, shots, seed)
    result = train_dataset(dataset, replace(config, rng_seed=seed, shots=shots))
    train = fidelity_report(result.model, result.dataset, EXACT_TARGET, TRAIN, state)
    val = fidelity_report(result.model, result.dataset, EXACT_TARGET, VALIDATION, state)
    log.info("scaling cell sites=%s bases=%s seed=%s done", sites, n_bases, seed)
    return {"sites": sites, "n_bases": n_bases, "seed": seed, "predictive_fc": val.mean,
            "reconstructive_fc": train.mean, "gap": overfit_gap(train, val)}


def sweep_scaling(sites_list, bases_list, seeds, jx: float = 1.0, n_val: int = 40,
                  shots: int = 8192, config: TomographyConfig | None = None, jz: float = 1.0,
                  jobs: int | None = None) -> list[dict]:
    config = config or TomographyConfig()
    cells = [(int(n), jz, jx, int(s), int(b), n_val, shots, config)
             for n in sites_list for b in bases_list for s in seeds]
    return run_cells(scaling_cell, cells, jobs)


def filter_masses(sites: int, jx: float, seed: int, n_bases: int = 200, shots: int = 8192,
                  config: TomographyConfig | None = None, jz: float = 1.0) -> dict:
    """Block masses of the linear filter learned at one J_x."""
    config = config or TomographyConfig()
    state = ground_state(sites, jz, jx)
    records = collect_simulated(state, n_bases, shots, child_seed(seed, 100))
    result = run_tomography(records, replace(config, rng_seed=seed))
    rep = filter_report(result.model)
    out = rep.block_masses()
    out["visible_bias_x"] = rep.coordinate_mass("visible_bias", "x")
    out["visible_bias_z"] = rep.coordinate_mass("visible_bias", "z")
    return out


def write_csv(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row[k]) for k in columns})


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return value


def mean_by(rows, keys, value) -> dict:
    """Average ``value`` over rows grouped by the tuple of ``keys``."""
    groups: dict = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row[value])
    return {k: float(np.mean(v)) for k, v in groups.items()}
