"""End-to-end basis-dependent RBM tomography.

Random-basis measurements -> one warm-started RBM per basis -> FFNN regression
from basis coordinates to RBM parameters -> optional fine-tuning rounds in
which each basis's RBM is re-learned from the FFNN prediction.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import ffnn as nn
from . import pca as pca_mod
from .quantum import LocalBasis, MeasurementRecord, PureState, canonicalize, flip_outcome_bits, measure, random_basis
from .rbm import RbmParams, RbmTrainConfig, exact_distribution, flatten, n_params, sample_visible, train_rbm, unflatten

log = logging.getLogger(__name__)

TRAIN, VALIDATION = "train", "validation"


@dataclass(frozen=True)
class TomographyConfig:
    n_bases: int = 200
    shots: int = 8192
    val_fraction: float = 0.2
    fine_tune_rounds: int = 2
    rbm_config: RbmTrainConfig = field(default_factory=RbmTrainConfig)
    regression_config: nn.RegressionConfig = field(default_factory=nn.RegressionConfig)
    # None: off; float in (0, 1): cumulative-variance rule; int: fixed k
    pca: float | int | None = None
    n_hidden: int | None = None
    hidden_layers: tuple[int, ...] = ()
    rng_seed: int = 0
    order_bases: bool = True
    init_scale: float = 0.01
    fine_tune_lr_factor: float = 0.1
    # RBM epochs per basis during fine-tuning; None reuses rbm_config.epochs
    fine_tune_rbm_epochs: int | None = 1
    # epochs for the first RBM of the warm-start chain (cold start)
    first_basis_epochs: int | None = 300
    # learning rate for the cold-start RBM; None reuses rbm_config.learning_rate
    first_basis_lr: float | None = 0.1

    def __post_init__(self):
        if self.n_bases < 1 or self.shots < 1:
            raise ValueError("n_bases and shots must be positive")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")
        if self.fine_tune_rounds < 0:
            raise ValueError("fine_tune_rounds must be nonnegative")

    def hidden_for(self, n_qubits: int) -> int:
        return self.n_hidden or n_qubits

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_layers"] = list(self.hidden_layers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TomographyConfig":
        d = dict(d)
        d["rbm_config"] = RbmTrainConfig(**d["rbm_config"])
        d["regression_config"] = nn.RegressionConfig(**d["regression_config"])
        d["hidden_layers"] = tuple(d.get("hidden_layers", ()))
        return cls(**d)


def child_seed(seed: int, *tags: int) -> int:
    """Derive an independent integer seed for a pipeline stage."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *tags])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class DatasetEntry:
    record: MeasurementRecord
    split: str = TRAIN
    lam: np.ndarray | None = None

    @property
    def basis(self) -> LocalBasis:
        return self.record.basis


@dataclass
class TrainingDataset:
    entries: list[DatasetEntry]

    def __post_init__(self):
        sizes = {e.lam.size for e in self.entries if e.lam is not None}
        if len(sizes) > 1:
            raise ValueError("observed parameter vectors have inconsistent lengths")
        if any(e.split not in (TRAIN, VALIDATION) for e in self.entries):
            raise ValueError("split labels must be 'train' or 'validation'")

    def split(self, which: str) -> list[DatasetEntry]:
        return [e for e in self.entries if e.split == which]

    @property
    def train(self) -> list[DatasetEntry]:
        return self.split(TRAIN)

    @property
    def validation(self) -> list[DatasetEntry]:
        return self.split(VALIDATION)

    @property
    def n_qubits(self) -> int:
        return self.entries[0].record.n_qubits

    def inputs(self, which: str = TRAIN) -> np.ndarray:
        return np.array([e.basis.flat() for e in self.split(which)])

    def targets(self, which: str = TRAIN) -> np.ndarray:
        return np.array([e.lam for e in self.split(which)])


@dataclass
class BdrbmModel:
    ffnn: nn.FfnnModel
    n_qubits: int
    n_hidden: int
    pca: pca_mod.PcaTransform | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        expected = self.pca.k if self.pca is not None else n_params(self.n_qubits, self.n_hidden)
        if self.ffnn.output_dim != expected:
            raise ValueError(f"FFNN outputs {self.ffnn.output_dim} values, expected {expected}")
        if self.ffnn.input_dim != 3 * self.n_qubits:
            raise ValueError("FFNN input must be the 3n flattened Bloch coordinates")

    def predict_params(self, r_flat) -> np.ndarray:
        out = nn.forward(self.ffnn, r_flat)
        return pca_mod.reconstruct(self.pca, out) if self.pca is not None else out

    def rbm(self, basis: LocalBasis) -> RbmParams:
        return unflatten(self.predict_params(basis.flat()), self.n_qubits, self.n_hidden)


# ---------------------------------------------------------------------------
# data collection
# ---------------------------------------------------------------------------

def collect_simulated(state: PureState, n_bases: int, shots: int = 8192,
                      rng_seed: int = 0) -> list[MeasurementRecord]:
    records = []
    for i in range(n_bases):
        basis = random_basis(state.n_qubits, child_seed(rng_seed, 1, i))
        records.append(measure(state, basis, shots, child_seed(rng_seed, 2, i)))
    return records


def split_train_val(records: Sequence[MeasurementRecord], val_fraction: float = 0.2,
                    rng_seed: int = 0) -> TrainingDataset:
    n = len(records)
    if n < 2:
        raise ValueError("need at least 2 records to split")
    n_val = int(round(val_fraction * n))
    if n_val < 1 or n_val > n - 1:
        raise ValueError(f"val_fraction={val_fraction} leaves an empty split for {n} records")
    perm = np.random.default_rng(rng_seed).permutation(n)
    val = set(perm[:n_val].tolist())
    return TrainingDataset([DatasetEntry(canonicalize(r), VALIDATION if i in val else TRAIN)
                            for i, r in enumerate(records)])


# ---------------------------------------------------------------------------
# per-basis RBMs
# ---------------------------------------------------------------------------

def angular_distance(a: LocalBasis, b: LocalBasis) -> float:
    dots = np.clip(np.sum(a.axes * b.axes, axis=1), -1.0, 1.0)
    return float(np.arccos(dots).sum())


def greedy_order(bases: Sequence[LocalBasis], rng_seed: int = 0) -> list[int]:
    """Nearest-neighbour tour by summed angular distance from a seeded start."""
    n = len(bases)
    if n == 0:
        return []
    axes = np.array([b.axes for b in bases])
    dots = np.clip(np.einsum("aqk,bqk->abq", axes, axes), -1.0, 1.0)
    dist = np.arccos(dots).sum(-1)
    current = int(np.random.default_rng(rng_seed).integers(n))
    order = [current]
    visited = np.zeros(n, dtype=bool)
    visited[current] = True
    for _ in range(n - 1):
        d = np.where(visited, np.inf, dist[current])
        current = int(np.argmin(d))
        visited[current] = True
        order.append(current)
    return order


def learn_rbm_sequence(records: Sequence[MeasurementRecord], n_hidden: int,
                       rbm_config: RbmTrainConfig, rng_seed: int = 0,
                       order: Sequence[int] | None = None,
                       init_scale: float = 0.01,
                       first_epochs: int | None = None,
                       first_lr: float | None = None) -> list[np.ndarray]:
    """Warm-started RBM chain; returns flattened parameters aligned with ``records``.

    ``order`` is the visiting sequence (default: the given order).  The first
    RBM starts from small Gaussian weights and trains for ``first_epochs``
    (default ``rbm_config.epochs``) at ``first_lr`` (default
    ``rbm_config.learning_rate``); every later one starts from its
    predecessor's result.  A large step on the cold start can land in a
    saturated optimum that the warm starts then carry along the chain.
    """
    if not records:
        raise ValueError("records must be nonempty")
    order = list(range(len(records))) if order is None else list(order)
    n = records[0].n_qubits
    params = RbmParams.random(n, n_hidden, child_seed(rng_seed, 3), init_scale)
    lams: list[np.ndarray | None] = [None] * len(records)
    for step, i in enumerate(order):
        cfg = rbm_config
        if step == 0 and first_epochs is not None and rbm_config.epochs:
            cfg = replace(rbm_config, epochs=max(first_epochs, rbm_config.epochs))
        if step == 0 and first_lr is not None:
            cfg = replace(cfg, learning_rate=first_lr)
        params = train_rbm(params, records[i], cfg, child_seed(rng_seed, 4, step))
        lams[i] = flatten(params)
    return lams


# ---------------------------------------------------------------------------
# regression and fine-tuning
# ---------------------------------------------------------------------------

def _regression_targets(dataset: TrainingDataset, pca) -> np.ndarray:
    y = dataset.targets(TRAIN)
    return pca_mod.project(pca, y) if pca is not None else y


def _fit_pca(config: TomographyConfig, lams: np.ndarray):
    if config.pca is None:
        return None
    if isinstance(config.pca, float) and config.pca < 1:
        return pca_mod.fit_pca_variance(lams, config.pca)
    return pca_mod.fit_pca(lams, int(config.pca))


def fit_bdrbm(dataset: TrainingDataset, config: TomographyConfig,
              init: BdrbmModel | None = None,
              regression_config: nn.RegressionConfig | None = None,
              rng_seed: int | None = None) -> tuple[BdrbmModel, nn.FitResult]:
    train = dataset.train
    if not train:
        raise ValueError("training split is empty")
    n = dataset.n_qubits
    n_hidden = config.hidden_for(n)
    x = dataset.inputs(TRAIN)
    if init is not None:
        pca, start = init.pca, init.ffnn
    else:
        pca = _fit_pca(config, dataset.targets(TRAIN))
        out_dim = pca.k if pca is not None else n_params(n, n_hidden)
        if config.hidden_layers:
            start = nn.FfnnModel.random(3 * n, out_dim, config.hidden_layers,
                                        child_seed(config.rng_seed, 5))
        else:
            start = nn.FfnnModel.linear(3 * n, out_dim)
    y = _regression_targets(dataset, pca)
    seed = child_seed(config.rng_seed, 6) if rng_seed is None else rng_seed
    result = nn.fit(start, x, y, regression_config or config.regression_config, seed)
    model = BdrbmModel(result.model, n, n_hidden, pca)
    return model, result


def regression_loss(model: BdrbmModel, dataset: TrainingDataset, l1_coeff: float = 0.0) -> float:
    y = _regression_targets(dataset, model.pca)
    return nn.loss_and_gradient(model.ffnn, dataset.inputs(TRAIN), y, l1_coeff)[0]


def fine_tune(model: BdrbmModel, dataset: TrainingDataset, config: TomographyConfig,
              rounds: int | None = None) -> tuple[BdrbmModel, TrainingDataset, list[float]]:
    """Re-learn every training RBM from the FFNN's prediction, then re-fit.

    Returns the updated model and dataset plus the full-data regression loss
    after each round.
    """
    rounds = config.fine_tune_rounds if rounds is None else rounds
    rbm_cfg = config.rbm_config
    if config.fine_tune_rbm_epochs is not None:
        rbm_cfg = replace(rbm_cfg, epochs=config.fine_tune_rbm_epochs)
    reg_cfg = nn.scaled(config.regression_config, config.fine_tune_lr_factor)
    losses = []
    for rnd in range(rounds):
        entries = []
        for i, e in enumerate(dataset.entries):
            if e.split != TRAIN:
                entries.append(e)
                continue
            start = model.rbm(e.basis)
            params = train_rbm(start, e.record, rbm_cfg, child_seed(config.rng_seed, 7, rnd, i))
            entries.append(DatasetEntry(e.record, e.split, flatten(params)))
        dataset = TrainingDataset(entries)
        model, result = fit_bdrbm(dataset, config, init=model, regression_config=reg_cfg,
                                  rng_seed=child_seed(config.rng_seed, 8, rnd))
        losses.append(result.final_loss)
        log.info("fine-tune round %d: regression loss %.6g", rnd + 1, result.final_loss)
    return model, dataset, losses


# ---------------------------------------------------------------------------
# prediction
# ---------------------------------------------------------------------------

def _canonical_query(basis: LocalBasis) -> tuple[LocalBasis, list[int]]:
    lower = [q for q in range(basis.n_qubits) if basis.axes[q, 2] < 0]
    if not lower:
        return basis, []
    axes = np.array(basis.axes)
    axes[lower] *= -1
    return LocalBasis(axes), lower


def predict_distribution(model: BdrbmModel, basis: LocalBasis) -> np.ndarray:
    """Outcome distribution predicted for any local basis.

    Lower-hemisphere axes are answered through their antipodes with the
    corresponding outcome bits flipped.
    """
    if basis.n_qubits != model.n_qubits:
        raise ValueError(f"basis has {basis.n_qubits} qubits, model has {model.n_qubits}")
    canon, flipped = _canonical_query(basis)
    probs = exact_distribution(model.rbm(canon))
    return flip_outcome_bits(probs, flipped) if flipped else probs


def predict_samples(model: BdrbmModel, basis: LocalBasis, n_samples: int,
                    rng_seed: int = 0, burn_in: int = 1000, thin: int = 1,
                    n_chains: int = 1) -> np.ndarray:
    """Gibbs samples from the predicted RBM, shape ``(n_samples, n_qubits)``."""
    if n_samples <= 0:
        return np.zeros((0, model.n_qubits), dtype=int)
    canon, flipped = _canonical_query(basis)
    samples = sample_visible(model.rbm(canon), n_samples, burn_in, thin, rng_seed, n_chains)
    samples = samples.astype(int)
    if flipped:
        samples[:, flipped] ^= 1
    return samples


# ---------------------------------------------------------------------------
# full loop
# ---------------------------------------------------------------------------

@dataclass
class TomographyResult:
    model: BdrbmModel
    dataset: TrainingDataset
    losses: dict


def run_tomography(records: Sequence[MeasurementRecord], config: TomographyConfig) -> TomographyResult:
    """split -> warm-started RBM chain -> FFNN fit -> fine-tuning."""
    dataset = split_train_val(records, config.val_fraction, child_seed(config.rng_seed, 10))
    return train_dataset(dataset, config)


def train_dataset(dataset: TrainingDataset, config: TomographyConfig) -> TomographyResult:
    """Run the learning stages on an already split dataset.

    Observed parameters are only learned for the training split.
    """
    seed = config.rng_seed
    n_hidden = config.hidden_for(dataset.n_qubits)
    train_idx = [i for i, e in enumerate(dataset.entries) if e.split == TRAIN]
    if not train_idx:
        raise ValueError("training split is empty")
    train_records = [dataset.entries[i].record for i in train_idx]
    order = (greedy_order([r.basis for r in train_records], child_seed(seed, 11))
             if config.order_bases else None)
    lams = learn_rbm_sequence(train_records, n_hidden, config.rbm_config,
                              child_seed(seed, 12), order, config.init_scale,
                              config.first_basis_epochs, config.first_basis_lr)
    entries = list(dataset.entries)
    for i, lam in zip(train_idx, lams):
        entries[i] = DatasetEntry(entries[i].record, TRAIN, lam)
    dataset = TrainingDataset(entries)
    model, result = fit_bdrbm(dataset, config)
    losses = {"initial_regression": result.final_loss, "fine_tune": []}
    if config.fine_tune_rounds:
        model, dataset, ft = fine_tune(model, dataset, config)
        losses["fine_tune"] = ft
    model.metadata.update({"config": config.to_dict(), "losses": losses})
    return TomographyResult(model, dataset, losses)
