"""Binary restricted Boltzmann machine with CD-1 training."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import expit, logsumexp

from .quantum import MeasurementRecord, bits_of

MAX_ENUMERATION_VISIBLE = 16


class CapabilityError(RuntimeError):
    """Requested operation is outside what this model type supports."""


@dataclass(frozen=True)
class RbmParams:
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.visible_bias, dtype=float).copy()
        c = np.asarray(self.hidden_bias, dtype=float).copy()
        w = np.asarray(self.weights, dtype=float).reshape(b.size, c.size).copy()
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(c)) and np.all(np.isfinite(w))):
            raise ValueError("RBM parameters must be finite")
        for arr in (b, c, w):
            arr.setflags(write=False)
        object.__setattr__(self, "visible_bias", b)
        object.__setattr__(self, "hidden_bias", c)
        object.__setattr__(self, "weights", w)

    @property
    def n_visible(self) -> int:
        return self.visible_bias.size

    @property
    def n_hidden(self) -> int:
        return self.hidden_bias.size

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "RbmParams":
        return cls(np.zeros(n_visible), np.zeros(n_hidden), np.zeros((n_visible, n_hidden)))

    @classmethod
    def random(cls, n_visible: int, n_hidden: int, rng, scale: float = 0.01) -> "RbmParams":
        """Small Gaussian weights, zero biases."""
        rng = np.random.default_rng(rng)
        return cls(np.zeros(n_visible), np.zeros(n_hidden),
                   scale * rng.standard_normal((n_visible, n_hidden)))


@dataclass(frozen=True)
class RbmTrainConfig:
    learning_rate: float = 1.0
    epochs: int = 10
    minibatch_size: int = 64
    l2_coeff: float = 1e-4
    cd_steps: int = 1
    # minibatch updates per epoch; None means ceil(shots / minibatch_size)
    batches_per_epoch: int | None = None

    def __post_init__(self):
        if self.learning_rate < 0 or self.l2_coeff < 0:
            raise ValueError("learning_rate and l2_coeff must be nonnegative")
        if self.epochs < 0 or self.minibatch_size < 1 or self.cd_steps < 1:
            raise ValueError("epochs >= 0, minibatch_size >= 1 and cd_steps >= 1 required")


def n_params(n_visible: int, n_hidden: int) -> int:
    return n_visible + n_hidden + n_visible * n_hidden


def flatten(params: RbmParams) -> np.ndarray:
    """[visible biases, hidden biases, W row-major by visible index]."""
    return np.concatenate([params.visible_bias, params.hidden_bias, params.weights.reshape(-1)])


def unflatten(lam, n_visible: int, n_hidden: int) -> RbmParams:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (n_params(n_visible, n_hidden),):
        raise ValueError(
            f"parameter vector has shape {lam.shape}, expected "
            f"({n_params(n_visible, n_hidden)},) for n_v={n_visible}, n_h={n_hidden}")
    nv, nh = n_visible, n_hidden
    return RbmParams(lam[:nv], lam[nv:nv + nh], lam[nv + nh:].reshape(nv, nh))


def _softplus(x):
    return np.logaddexp(0.0, x)


def log_prob_unnormalized(params: RbmParams, v) -> np.ndarray | float:
    """log of exp(b.v) prod_j (1 + exp(c_j + v.W_j)); batched over leading axes."""
    v = np.asarray(v, dtype=float)
    out = v @ params.visible_bias + _softplus(params.hidden_bias + v @ params.weights).sum(-1)
    return float(out) if np.ndim(out) == 0 else out


def exact_log_distribution(params: RbmParams) -> np.ndarray:
    n = params.n_visible
    if n > MAX_ENUMERATION_VISIBLE:
        raise CapabilityError(
            f"exact enumeration is limited to {MAX_ENUMERATION_VISIBLE} visible units; "
            "use sample_visible instead")
    logp = log_prob_unnormalized(params, bits_of(n))
    return logp - logsumexp(logp)


def exact_distribution(params: RbmParams) -> np.ndarray:
    p = np.exp(exact_log_distribution(params))
    return p / p.sum()


def _bernoulli(p, rng):
    return (rng.random(np.shape(p)) < p).astype(float)


def gibbs_step(params: RbmParams, v, rng) -> np.ndarray:
    """One block update: h ~ p(h|v), then v ~ p(v|h)."""
    v = np.asarray(v, dtype=float)
    h = _bernoulli(expit(params.hidden_bias + v @ params.weights), rng)
    return _bernoulli(expit(params.visible_bias + h @ params.weights.T), rng)


def sample_visible(params: RbmParams, n_samples: int, burn_in: int = 1000, thin: int = 1,
                   rng_seed=None, n_chains: int = 1) -> np.ndarray:
    """Block-Gibbs samples, shape ``(n_samples, n_visible)``.

    ``n_chains`` independent chains advance together; samples are collected
    round-robin after the burn-in, keeping every ``thin``-th sweep.
    """
    rng = np.random.default_rng(rng_seed)
    if n_samples <= 0:
        return np.zeros((0, params.n_visible))
    n_chains = max(1, min(n_chains, n_samples))
    v = _bernoulli(np.full((n_chains, params.n_visible), 0.5), rng)
    for _ in range(burn_in):
        v = gibbs_step(params, v, rng)
    out = []
    n_sweeps = -(-n_samples // n_chains)
    for _ in range(n_sweeps):
        for _ in range(thin):
            v = gibbs_step(params, v, rng)
        out.append(v)
    return np.concatenate(out)[:n_samples]


def _cd1_from_uniforms(params: RbmParams, v0: np.ndarray, uniforms: np.ndarray,
                       config: RbmTrainConfig) -> RbmParams:
    # uniforms has shape (cd_steps, batch, n_hidden); one slice per hidden draw
    b, c, w = params.visible_bias, params.hidden_bias, params.weights
    ph0 = expit(c + v0 @ w)
    ph = ph0
    for k in range(config.cd_steps):
        h = (uniforms[k] < ph).astype(float)
        vk = expit(b + h @ w.T)
        ph = expit(c + vk @ w)
    m = v0.shape[0]
    lr = config.learning_rate
    dw = (v0.T @ ph0 - vk.T @ ph) / m
    db = (v0 - vk).sum(0) / m
    dc = (ph0 - ph).sum(0) / m
    return RbmParams(b + lr * db, c + lr * dc, w + lr * dw - lr * config.l2_coeff * w)


def cd1_update(params: RbmParams, minibatch, config: RbmTrainConfig, rng) -> RbmParams:
    """One contrastive-divergence step.

    Data-phase hidden statistics use probabilities; the reconstruction samples
    the hidden layer and keeps probability-valued visible units.  L2 decay acts
    on the weights only.
    """
    v0 = np.atleast_2d(np.asarray(minibatch, dtype=float))
    if v0.shape[0] == 0:
        raise ValueError("minibatch must be nonempty")
    uniforms = rng.random((config.cd_steps,) + (v0.shape[0], params.n_hidden))
    return _cd1_from_uniforms(params, v0, uniforms, config)


@numba.njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@numba.njit(cache=True)
def _cd_epoch(b, c, w, outcomes, batch_idx, uniforms, lr, l2):
    """Sequential CD-k updates over ``batch_idx`` (n_batches, batch) in place.

    ``outcomes`` holds the visible vectors of each distinct outcome and
    ``uniforms`` has shape (n_batches, cd_steps, batch, n_hidden).
    """
    nv, nh = w.shape
    n_batches, m = batch_idx.shape
    cd_steps = uniforms.shape[1]
    ph0 = np.empty((m, nh))
    ph = np.empty((m, nh))
    vk = np.empty((m, nv))
    h = np.empty(nh)
    for t in range(n_batches):
        for s in range(m):
            v = outcomes[batch_idx[t, s]]
            for j in range(nh):
                acc = c[j]
                for i in range(nv):
                    acc += v[i] * w[i, j]
                ph0[s, j] = _sigmoid(acc)
                ph[s, j] = ph0[s, j]
            for k in range(cd_steps):
                for j in range(nh):
                    h[j] = 1.0 if uniforms[t, k, s, j] < ph[s, j] else 0.0
                for i in range(nv):
                    acc = b[i]
                    for j in range(nh):
                        acc += w[i, j] * h[j]
                    vk[s, i] = _sigmoid(acc)
                for j in range(nh):
                    acc = c[j]
                    for i in range(nv):
                        acc += vk[s, i] * w[i, j]
                    ph[s, j] = _sigmoid(acc)
        scale = lr / m
        for i in range(nv):
            for j in range(nh):
                g = 0.0
                for s in range(m):
                    g += outcomes[batch_idx[t, s], i] * ph0[s, j] - vk[s, i] * ph[s, j]
                w[i, j] += scale * g - lr * l2 * w[i, j]
        for i in range(nv):
            g = 0.0
            for s in range(m):
                g += outcomes[batch_idx[t, s], i] - vk[s, i]
            b[i] += scale * g
        for j in range(nh):
            g = 0.0
            for s in range(m):
                g += ph0[s, j] - ph[s, j]
            c[j] += scale * g


def _as_weighted_data(data):
    """Distinct visible vectors and their (unnormalized) weights."""
    if isinstance(data, MeasurementRecord):
        hist = data.histogram()
        keep = np.flatnonzero(hist)
        return bits_of(data.n_qubits)[keep], hist[keep].astype(float)
    samples = np.atleast_2d(np.asarray(data, dtype=float))
    if samples.shape[0] == 0:
        raise ValueError("training data is empty")
    uniq, counts = np.unique(samples, axis=0, return_counts=True)
    return uniq, counts.astype(float)


def train_rbm(init: RbmParams, data, config: RbmTrainConfig, rng_seed=None) -> RbmParams:
    """CD training on a measurement record or an array of bit vectors.

    Minibatches are drawn with replacement from the count histogram, so the
    shots never have to be expanded into duplicate rows.
    """
    outcomes, weights = _as_weighted_data(data)
    if config.epochs == 0:
        return init
    rng = np.random.default_rng(rng_seed)
    b = np.array(init.visible_bias)
    c = np.array(init.hidden_bias)
    w = np.array(init.weights)
    m = config.minibatch_size
    n_batches = config.batches_per_epoch or -(-int(weights.sum()) // m)
    p = weights / weights.sum()
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    for _ in range(config.epochs):
        batch_idx, uniforms = _draw_epoch(rng, cdf, n_batches, m, config.cd_steps, c.size)
        _cd_epoch(b, c, w, outcomes, batch_idx, uniforms,
                  config.learning_rate, config.l2_coeff)
    return RbmParams(b, c, w)


def _draw_epoch(rng, cdf, n_batches, m, cd_steps, n_hidden):
    batch_idx = np.searchsorted(cdf, rng.random((n_batches, m)), side="right")
    batch_idx = np.minimum(batch_idx, cdf.size - 1)
    uniforms = rng.random((n_batches, cd_steps, m, n_hidden))
    return batch_idx, uniforms


def kl_divergence(p, q) -> float:
    """KL(p || q) for distributions over the same outcomes."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))
