"""Feed-forward regression from basis coordinates to RBM parameters."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .rbm import CapabilityError

log = logging.getLogger(__name__)

LEAKY_SLOPE = 0.2
ACTIVATIONS = ("leaky_relu", "identity")


class TrainingDivergedError(RuntimeError):
    pass


def leaky_relu(x):
    x = np.asarray(x, dtype=float)
    out = np.maximum(x, LEAKY_SLOPE * x)
    return float(out) if out.ndim == 0 else out


def _leaky_grad(pre):
    # subgradient at 0 is taken as 1
    return np.where(pre >= 0, 1.0, LEAKY_SLOPE)


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray
    activation: str = "leaky_relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        w = np.array(self.weights, dtype=float, ndmin=2)
        a = np.array(self.bias, dtype=float).reshape(-1)
        if w.shape[0] != a.size:
            raise ValueError("layer bias length must match weight rows")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", a)


@dataclass(frozen=True)
class FfnnModel:
    """lambda(r) = out_offset + out_weights @ (g_m o ... o g_1)(r)."""

    out_weights: np.ndarray
    out_offset: np.ndarray
    layers: tuple[Layer, ...] = ()

    def __post_init__(self):
        k = np.array(self.out_weights, dtype=float, ndmin=2)
        off = np.array(self.out_offset, dtype=float).reshape(-1)
        layers = tuple(self.layers)
        if k.shape[0] != off.size:
            raise ValueError("output offset length must match output rows")
        width = layers[0].weights.shape[1] if layers else k.shape[1]
        for layer in layers:
            if layer.weights.shape[1] != width:
                raise ValueError("consecutive layer dimensions do not compose")
            width = layer.weights.shape[0]
        if k.shape[1] != width:
            raise ValueError("output weights do not match the last hidden width")
        arrays = [k, off] + [x for l in layers for x in (l.weights, l.bias)]
        if not all(np.all(np.isfinite(x)) for x in arrays):
            raise ValueError("FFNN parameters must be finite")
        object.__setattr__(self, "out_weights", k)
        object.__setattr__(self, "out_offset", off)
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weights.shape[1] if self.layers else self.out_weights.shape[1]

    @property
    def output_dim(self) -> int:
        return self.out_offset.size

    @property
    def is_linear(self) -> bool:
        return not self.layers

    @classmethod
    def linear(cls, input_dim: int, output_dim: int) -> "FfnnModel":
        return cls(np.zeros((output_dim, input_dim)), np.zeros(output_dim))

    @classmethod
    def random(cls, input_dim: int, output_dim: int, hidden=(), rng=None,
               activation: str = "leaky_relu") -> "FfnnModel":
        """He-style Gaussian init for the hidden layers, zero output layer."""
        rng = np.random.default_rng(rng)
        layers = []
        width = input_dim
        for h in hidden:
            w = rng.standard_normal((h, width)) * np.sqrt(2.0 / width)
            layers.append(Layer(w, np.zeros(h), activation))
            width = h
        k = rng.standard_normal((output_dim, width)) * np.sqrt(1.0 / width)
        return cls(k, np.zeros(output_dim), tuple(layers))

    # parameter vector order: per layer (weights, bias), then out weights, offset
    def arrays(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out += [layer.weights, layer.bias]
        return out + [self.out_weights, self.out_offset]

    def weight_mask(self) -> list[bool]:
        """Which of :meth:`arrays` are weight matrices (L1-penalized)."""
        return [True, False] * len(self.layers) + [True, False]

    def params(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for a in self.arrays()])

    def with_arrays(self, arrays) -> "FfnnModel":
        arrays = list(arrays)
        layers = tuple(
            Layer(arrays[2 * i], arrays[2 * i + 1], l.activation)
            for i, l in enumerate(self.layers))
        return FfnnModel(arrays[-2], arrays[-1], layers)

    def with_params(self, theta) -> "FfnnModel":
        theta = np.asarray(theta, dtype=float)
        out, pos = [], 0
        for a in self.arrays():
            out.append(theta[pos:pos + a.size].reshape(a.shape))
            pos += a.size
        if pos != theta.size:
            raise ValueError("parameter vector length does not match the model")
        return self.with_arrays(out)


def _forward_cache(model: FfnnModel, x: np.ndarray):
    pres, acts = [], [x]
    s = x
    for layer in model.layers:
        pre = s @ layer.weights.T + layer.bias
        s = leaky_relu(pre) if layer.activation == "leaky_relu" else pre
        pres.append(pre)
        acts.append(s)
    return s @ model.out_weights.T + model.out_offset, pres, acts


def forward(model: FfnnModel, r_flat) -> np.ndarray:
    """Predicted parameters for one input vector or a batch (rows)."""
    x = np.asarray(r_flat, dtype=float)
    if x.shape[-1] != model.input_dim:
        raise ValueError(f"input has dimension {x.shape[-1]}, model expects {model.input_dim}")
    return _forward_cache(model, x)[0]


def loss_and_gradient(model: FfnnModel, inputs, targets, l1_coeff: float = 0.0):
    """Mean squared parameter error plus L1 on weight matrices.

    Returns ``(loss, grads)`` with ``grads`` aligned to ``model.arrays()``.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("dataset must be nonempty")
    n = x.shape[0]
    pred, pres, acts = _forward_cache(model, x)
    resid = pred - y
    loss = float(np.sum(resid * resid) / n)
    delta = 2.0 * resid / n
    grads = [delta.T @ acts[-1], delta.sum(0)]
    back = delta @ model.out_weights
    for k in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[k]
        if layer.activation == "leaky_relu":
            back = back * _leaky_grad(pres[k])
        grads = [back.T @ acts[k], back.sum(0)] + grads
        back = back @ layer.weights
    if l1_coeff:
        for i, (a, is_w) in enumerate(zip(model.arrays(), model.weight_mask())):
            if is_w:
                loss += l1_coeff * float(np.abs(a).sum())
                grads[i] = grads[i] + l1_coeff * np.sign(a)
    return loss, grads


@dataclass(frozen=True)
class RegressionConfig:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    l1_coeff: float = 1e-4
    epochs: int = 2000
    minibatch_size: int = 32

    def __post_init__(self):
        if not (self.lr >= 0 and 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1
                and self.eps > 0 and self.l1_coeff >= 0 and self.epochs >= 0
                and self.minibatch_size >= 1):
            raise ValueError(f"invalid regression config {self}")


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    u: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_model(cls, model: FfnnModel) -> "AdamState":
        arrays = model.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0)


def adam_step(model: FfnnModel, grads, state: AdamState, config: RegressionConfig):
    """Bias-corrected ADAM update; returns ``(model, state)``."""
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    new_arrays, ms, us = [], [], []
    for a, g, m, u in zip(model.arrays(), grads, state.m, state.u):
        m = b1 * m + (1 - b1) * g
        u = b2 * u + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        u_hat = u / (1 - b2 ** t)
        new_arrays.append(a - config.lr * m_hat / (np.sqrt(u_hat) + config.eps))
        ms.append(m)
        us.append(u)
    return model.with_arrays(new_arrays), AdamState(ms, us, t)


@dataclass
class FitResult:
    model: FfnnModel
    final_loss: float
    epoch_losses: list


def fit(model_init: FfnnModel, inputs, targets, config: RegressionConfig,
        rng_seed=None, state: AdamState | None = None) -> FitResult:
    """Shuffled-minibatch ADAM regression.

    ``epoch_losses`` holds the mean minibatch loss of every epoch and
    ``final_loss`` the full-dataset loss of the returned model.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    if x.shape[0] == 0:
        raise ValueError("dataset must be nonempty")
    rng = np.random.default_rng(rng_seed)
    model = model_init
    state = state or AdamState.for_model(model)
    n = x.shape[0]
    m = min(config.minibatch_size, n)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, m):
            idx = order[start:start + m]
            loss, grads = loss_and_gradient(model, x[idx], y[idx], config.l1_coeff)
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"regression loss became {loss} at epoch {epoch}; "
                    f"lower the learning rate (currently {config.lr})")
            model, state = adam_step(model, grads, state, config)
            total += loss * idx.size
        history.append(total / n)
    final = loss_and_gradient(model, x, y, config.l1_coeff)[0] if config.epochs else float("nan")
    log.debug("ffnn fit: %d epochs, final loss %.6g", config.epochs, final)
    return FitResult(model, final, history)


def least_squares_linear(inputs, targets) -> FfnnModel:
    """Closed-form unregularized linear fit (minimum-norm)."""
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.atleast_2d(np.asarray(targets, dtype=float))
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    coef = np.linalg.lstsq(design, y, rcond=None)[0]
    return FfnnModel(coef[:-1].T, coef[-1])


def extract_linear_filter(model: FfnnModel) -> tuple[np.ndarray, np.ndarray]:
    """``(offset, M)`` of a linear model, ``M[param, coordinate]``."""
    if not model.is_linear:
        raise CapabilityError("filters are only defined for linear (zero hidden layer) models")
    return model.out_offset.copy(), model.out_weights.copy()


def scaled(config: RegressionConfig, lr_factor: float) -> RegressionConfig:
    return replace(config, lr=config.lr * lr_factor)
