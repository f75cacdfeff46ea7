"""Command-line driver.

Exit codes: 0 success, 1 runtime or data error, 2 usage error, 3 capability
error (e.g. filters requested for a nonlinear model).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .evaluation import all_reports, filter_report
from .ffnn import RegressionConfig
from .pipeline import TomographyConfig, child_seed, collect_simulated, predict_distribution, predict_samples, run_tomography
from .quantum import EigensolverError, LocalBasis, TfimParams, tfim_ground_state
from .rbm import CapabilityError, RbmTrainConfig
from .sweeps import FIDELITY_COLUMNS, SCALING_COLUMNS, sweep_fidelity, sweep_scaling, write_csv

log = logging.getLogger("bdrbm")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _seeds(text: str) -> list[int]:
    """``"3"`` means seeds 0..2; a comma list is taken literally."""
    return _ints(text) if "," in text else list(range(int(text)))


def parse_basis(text: str) -> LocalBasis:
    """Parse ``"x,y,z;x,y,z;..."`` into a basis (axes must be unit vectors)."""
    try:
        axes = [[float(v) for v in part.split(",")] for part in text.strip().strip(";").split(";")]
        if not axes or any(len(a) != 3 for a in axes):
            raise ValueError("each axis needs three comma-separated numbers")
        arr = np.array(axes)
        norms = np.linalg.norm(arr, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("axes must be unit vectors")
        return LocalBasis(arr / norms[:, None])
    except ValueError as exc:
        raise UsageError(f"malformed basis {text!r}: {exc}") from exc


def _pca_arg(text: str):
    if text in ("off", "none"):
        return None
    value = float(text)
    if 0 < value < 1:
        return value
    if value >= 1 and value == int(value):
        return int(value)
    raise argparse.ArgumentTypeError("--pca takes 'off', a variance fraction in (0,1) or an integer k")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_gen_state(args) -> int:
    params = TfimParams(args.sites, args.jz, args.jx, args.boundary, args.spin)
    state, energy = tfim_ground_state(params, tol=args.tol)
    desc = {"model": "tfim", "sites": args.sites, "jz": args.jz, "jx": args.jx,
            "boundary": args.boundary, "spin": args.spin}
    io.save_state(args.out, state, energy, desc)
    print(f"ground energy {energy!r}")
    return 0


def cmd_measure(args) -> int:
    state = io.load_state(args.state)
    records = collect_simulated(state, args.bases, args.shots, args.seed)
    prov = {"source": "simulated", "seed": args.seed, "state": str(args.state)}
    io.save_measurements(args.out, records, prov)
    print(f"wrote {len(records)} records x {args.shots} shots to {args.out}")
    return 0


def _train_config(args) -> TomographyConfig:
    rbm = RbmTrainConfig()
    if args.rbm_epochs is not None:
        rbm = replace(rbm, epochs=args.rbm_epochs)
    if args.rbm_lr is not None:
        rbm = replace(rbm, learning_rate=args.rbm_lr)
    reg = RegressionConfig()
    if args.reg_epochs is not None:
        reg = replace(reg, epochs=args.reg_epochs)
    if args.reg_lr is not None:
        reg = replace(reg, lr=args.reg_lr)
    if args.l1 is not None:
        reg = replace(reg, l1_coeff=args.l1)
    return TomographyConfig(val_fraction=args.val_frac, fine_tune_rounds=args.fine_tune_rounds,
                            rbm_config=rbm, regression_config=reg, pca=args.pca,
                            n_hidden=args.hidden, hidden_layers=tuple(args.hidden_layers),
                            rng_seed=args.seed)


def cmd_train(args) -> int:
    records, provenance = io.load_measurements(args.data)
    config = _train_config(args)
    config = replace(config, n_bases=len(records), shots=max(r.shots for r in records))
    state = io.load_state(args.target_state) if args.target_state else None
    if state is not None and state.n_qubits != records[0].n_qubits:
        raise ValueError("target state and measurements have different qubit counts")
    result = run_tomography(records, config)
    reports = all_reports(result.model, result.dataset, state)
    metrics = {
        "losses": result.losses,
        "fine_tuned": config.fine_tune_rounds > 0,
        "n_train": len(result.dataset.train),
        "n_validation": len(result.dataset.validation),
        "fidelity": [r.summary() for r in reports],
    }
    io.save_model(args.out_model, result.model, config.to_dict(), metrics)
    if args.report:
        report = dict(metrics, data=str(args.data), provenance=provenance,
                      per_basis={f"{r.split}/{r.kind}": r.fidelities for r in reports})
        io.write_json(args.report, report)
    for r in reports:
        print(f"{r.split:10s} {r.kind:16s} mean {r.mean:.4f} std {r.std:.4f}")
    return 0


def cmd_predict(args) -> int:
    model = io.load_model(args.model)
    if args.basis_file:
        basis = parse_basis(Path(args.basis_file).read_text())
    elif args.basis:
        basis = parse_basis(args.basis)
    else:
        raise UsageError("one of --basis or --basis-file is required")
    if basis.n_qubits != model.n_qubits:
        raise UsageError(f"basis has {basis.n_qubits} axes, model has {model.n_qubits} qubits")
    n = model.n_qubits
    probs = predict_distribution(model, basis) if n <= 16 else None
    samples = predict_samples(model, basis, args.samples, args.seed) if args.samples > 0 else None
    keys = [format(i, f"0{n}b") for i in range(2 ** n)] if probs is not None else []
    out = Path(args.out) if args.out else None
    if out is not None and out.suffix == ".csv":
        counts = {}
        if samples is not None:
            for row in samples:
                key = "".join(map(str, row))
                counts[key] = counts.get(key, 0) + 1
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["outcome", "probability", "sample_count"])
            for i, key in enumerate(keys or sorted(counts)):
                p = repr(float(probs[i])) if probs is not None else ""
                w.writerow([key, p, counts.get(key, 0)])
        return 0
    doc = {"basis": basis.axes}
    if probs is not None:
        doc["distribution"] = dict(zip(keys, probs.tolist()))
    if samples is not None:
        doc["samples"] = ["".join(map(str, row)) for row in samples]
    text = io.dumps(doc)
    if out is not None:
        out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _sweep_config(args) -> TomographyConfig:
    cfg = TomographyConfig()
    if args.fine_tune_rounds is not None:
        cfg = replace(cfg, fine_tune_rounds=args.fine_tune_rounds)
    return cfg


def cmd_sweep_fidelity(args) -> int:
    rows = sweep_fidelity(args.sites, _floats(args.jx_list), _seeds(args.seeds), args.bases,
                          args.shots, _sweep_config(args), args.jz, args.jobs)
    write_csv(args.out_csv, rows, FIDELITY_COLUMNS)
    print(f"wrote {len(rows)} rows to {args.out_csv}")
    return 0


def cmd_sweep_scaling(args) -> int:
    rows = sweep_scaling(_ints(args.sites_list), _ints(args.bases_list), _seeds(args.seeds),
                         args.jx, args.val_bases, args.shots, _sweep_config(args), args.jz,
                         args.jobs)
    write_csv(args.out_csv, rows, SCALING_COLUMNS)
    print(f"wrote {len(rows)} rows to {args.out_csv}")
    return 0


def cmd_filters(args) -> int:
    model = io.load_model(args.model)
    rep = filter_report(model)
    n = model.n_qubits
    coords = [f"{a}{q}" for q in range(n) for a in "xyz"]
    masses = rep.block_masses()
    with open(args.out_csv, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["param"] + coords)
        for i, row in enumerate(rep.M):
            w.writerow([i] + [repr(float(v)) for v in row])
    summary = Path(args.out_csv).with_suffix(".blocks.csv")
    with open(summary, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["block", "axis", "mass"])
        for block in ("visible_bias", "hidden_bias", "weight"):
            w.writerow([block, "all", repr(masses[block])])
            for axis in "xyz":
                w.writerow([block, axis, repr(rep.coordinate_mass(block, axis))])
    if rep.composed_through_pca:
        print("note: filter composed through the PCA reconstruction map")
    print(f"wrote filter matrix to {args.out_csv} and block masses to {summary}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bdrbm", description="Basis-dependent RBM tomography")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-state", help="TFIM ground state to a state file")
    g.add_argument("--sites", type=int, required=True)
    g.add_argument("--jz", type=float, default=1.0)
    g.add_argument("--jx", type=float, default=1.0)
    g.add_argument("--boundary", choices=["open", "periodic"], default="open")
    g.add_argument("--spin", choices=["pauli", "half"], default="pauli")
    g.add_argument("--tol", type=float, default=1e-8)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_state)

    m = sub.add_parser("measure", help="simulate random-basis measurements")
    m.add_argument("--state", required=True)
    m.add_argument("--bases", type=int, default=200)
    m.add_argument("--shots", type=int, default=8192)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_measure)

    t = sub.add_parser("train", help="train a BDRBM on a measurement file")
    t.add_argument("--data", required=True)
    t.add_argument("--val-frac", type=float, default=0.2)
    t.add_argument("--hidden", type=int, default=None)
    t.add_argument("--hidden-layers", type=_ints, default=[])
    t.add_argument("--pca", type=_pca_arg, default=None)
    t.add_argument("--fine-tune-rounds", type=int, default=2)
    t.add_argument("--rbm-epochs", type=int)
    t.add_argument("--rbm-lr", type=float)
    t.add_argument("--reg-epochs", type=int)
    t.add_argument("--reg-lr", type=float)
    t.add_argument("--l1", type=float)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--target-state", help="state file for exact-target fidelities")
    t.add_argument("--out-model", required=True)
    t.add_argument("--report")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("predict", help="predicted distribution and samples for a basis")
    r.add_argument("--model", required=True)
    r.add_argument("--basis")
    r.add_argument("--basis-file")
    r.add_argument("--samples", type=int, default=0)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(func=cmd_predict)

    f = sub.add_parser("sweep-fidelity", help="fidelity series over transverse fields")
    f.add_argument("--sites", type=int, default=6)
    f.add_argument("--jz", type=float, default=1.0)
    f.add_argument("--jx-list", default="0,0.4,0.8,1.0,1.5,3.0")
    f.add_argument("--bases", type=int, default=200)
    f.add_argument("--shots", type=int, default=8192)
    f.add_argument("--seeds", default="3")
    f.add_argument("--fine-tune-rounds", type=int)
    f.add_argument("--jobs", type=int)
    f.add_argument("--out-csv", required=True)
    f.set_defaults(func=cmd_sweep_fidelity)

    s = sub.add_parser("sweep-scaling", help="fidelity over system size and basis count")
    s.add_argument("--sites-list", default="2,4,6,8,10")
    s.add_argument("--bases-list", default="25,50,100,200,400")
    s.add_argument("--jx", type=float, default=1.0)
    s.add_argument("--jz", type=float, default=1.0)
    s.add_argument("--val-bases", type=int, default=40)
    s.add_argument("--shots", type=int, default=8192)
    s.add_argument("--seeds", default="3")
    s.add_argument("--fine-tune-rounds", type=int)
    s.add_argument("--jobs", type=int)
    s.add_argument("--out-csv", required=True)
    s.set_defaults(func=cmd_sweep_scaling)

    x = sub.add_parser("filters", help="linear filter matrix and block masses")
    x.add_argument("--model", required=True)
    x.add_argument("--out-csv", required=True)
    x.set_defaults(func=cmd_filters)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"bdrbm: error: {exc}", file=sys.stderr)
        return 2
    except CapabilityError as exc:
        print(f"bdrbm: capability error: {exc}", file=sys.stderr)
        return 3
    except (io.FileFormatError, EigensolverError, ValueError, OSError) as exc:
        print(f"bdrbm: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
