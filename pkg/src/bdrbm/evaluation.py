"""Classical fidelity metrics and linear-filter analysis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ffnn as nn
from .pipeline import TRAIN, VALIDATION, BdrbmModel, TrainingDataset, predict_distribution
from .quantum import PureState, outcome_distribution
from .rbm import CapabilityError

EMPIRICAL, EXACT_TARGET = "vs_empirical", "vs_exact_target"


def classical_fidelity(p, q) -> float:
    """Bhattacharyya coefficient sum_i sqrt(p_i q_i), clamped to [0, 1].

    Inputs are renormalized, so raw counts may be passed directly.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError(f"distribution shapes differ: {p.shape} vs {q.shape}")
    if np.any(p < 0) or np.any(q < 0) or p.sum() <= 0 or q.sum() <= 0:
        raise ValueError("distributions must be nonnegative with positive mass")
    p = p / p.sum()
    q = q / q.sum()
    return float(np.clip(np.sum(np.sqrt(p * q)), 0.0, 1.0))


@dataclass(frozen=True)
class FidelityReport:
    fidelities: np.ndarray
    kind: str
    split: str

    @property
    def mean(self) -> float:
        return float(np.mean(self.fidelities))

    @property
    def std(self) -> float:
        return float(np.std(self.fidelities))

    def summary(self) -> dict:
        return {"kind": self.kind, "split": self.split, "n": int(self.fidelities.size),
                "mean": self.mean, "std": self.std}


def fidelity_report(model: BdrbmModel, dataset: TrainingDataset, against: str = EMPIRICAL,
                    split: str = VALIDATION, state: PureState | None = None) -> FidelityReport:
    """Per-basis fidelity of the model's predictions on one split.

    ``against`` is ``"vs_empirical"`` (the record's normalized counts) or
    ``"vs_exact_target"`` (exact distribution of ``state``).
    """
    entries = dataset.split(split)
    if not entries:
        raise ValueError(f"split {split!r} is empty")
    if against not in (EMPIRICAL, EXACT_TARGET):
        raise ValueError(f"unknown comparison {against!r}")
    if against == EXACT_TARGET and state is None:
        raise ValueError("an exact-target report needs the target state")
    fids = []
    for e in entries:
        pred = predict_distribution(model, e.basis)
        ref = e.record.empirical() if against == EMPIRICAL else outcome_distribution(state, e.basis)
        fids.append(classical_fidelity(pred, ref))
    return FidelityReport(np.array(fids), against, split)


def all_reports(model: BdrbmModel, dataset: TrainingDataset,
                state: PureState | None = None) -> list[FidelityReport]:
    """Train/validation x empirical/exact-target (the latter only with a state)."""
    kinds = [EMPIRICAL] + ([EXACT_TARGET] if state is not None else [])
    return [fidelity_report(model, dataset, k, s, state)
            for s in (TRAIN, VALIDATION) for k in kinds]


def overfit_gap(train_report: FidelityReport, val_report: FidelityReport) -> float:
    if train_report.kind != val_report.kind:
        raise ValueError("reports compare against different references")
    return train_report.mean - val_report.mean


@dataclass(frozen=True)
class FilterReport:
    """``M[param, coordinate]`` with coordinates ordered x0, y0, z0, x1, ..."""

    M: np.ndarray
    n_qubits: int
    n_hidden: int
    composed_through_pca: bool = False

    @property
    def visible_block(self) -> np.ndarray:
        return self.M[:self.n_qubits]

    @property
    def hidden_block(self) -> np.ndarray:
        return self.M[self.n_qubits:self.n_qubits + self.n_hidden]

    @property
    def weight_block(self) -> np.ndarray:
        return self.M[self.n_qubits + self.n_hidden:]

    def block_masses(self) -> dict:
        return {"visible_bias": float(np.abs(self.visible_block).sum()),
                "hidden_bias": float(np.abs(self.hidden_block).sum()),
                "weight": float(np.abs(self.weight_block).sum())}

    def coordinate_mass(self, block: str, axis: str) -> float:
        """Sum of |M| over one parameter block and one Bloch axis (x, y or z)."""
        rows = {"visible_bias": self.visible_block, "hidden_bias": self.hidden_block,
                "weight": self.weight_block}[block]
        return float(np.abs(rows[:, "xyz".index(axis)::3]).sum())

    @property
    def total_mass(self) -> float:
        return float(np.abs(self.M).sum())


def filter_report(model: BdrbmModel) -> FilterReport:
    """Linear filter of a BDRBM, composed through PCA reconstruction if present."""
    if not model.ffnn.is_linear:
        raise CapabilityError("filter analysis needs a linear FFNN (no hidden layers)")
    _, m = nn.extract_linear_filter(model.ffnn)
    if model.pca is not None:
        return FilterReport(model.pca.components.T @ m, model.n_qubits, model.n_hidden, True)
    return FilterReport(m, model.n_qubits, model.n_hidden)
