"""Principal component analysis of observed RBM parameter vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PcaTransform:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance: np.ndarray
    total_variance: float = 0.0

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros(self.k)
        return self.explained_variance / self.total_variance


def _eig(data: np.ndarray):
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 samples")
    mean = data.mean(0)
    cov = (data - mean).T @ (data - mean) / (n - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order].T
    # sign: largest-magnitude entry of each component is positive
    pivot = np.argmax(np.abs(vecs), axis=1)
    vecs *= np.sign(vecs[np.arange(d), pivot])[:, None]
    return mean, vals, vecs


def fit_pca(data, k: int) -> PcaTransform:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = data.shape
    if not 1 <= k <= d:
        raise ValueError(f"k must be in [1, {d}], got {k}")
    if n < max(k, 2):
        raise ValueError(f"PCA with k={k} needs at least {max(k, 2)} samples, got {n}")
    mean, vals, vecs = _eig(data)
    return PcaTransform(mean, vecs[:k], vals[:k], float(vals.sum()))


def fit_pca_variance(data, fraction: float = 0.99) -> PcaTransform:
    """Smallest k whose cumulative explained variance reaches ``fraction``."""
    mean, vals, _ = _eig(data)
    total = vals.sum()
    if total <= 0:
        k = 1
    else:
        k = int(np.searchsorted(np.cumsum(vals) / total, fraction - 1e-12) + 1)
    n = np.atleast_2d(data).shape[0]
    return fit_pca(data, min(k, vals.size, n))


def project(t: PcaTransform, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != t.d:
        raise ValueError(f"expected dimension {t.d}, got {x.shape[-1]}")
    return (x - t.mean) @ t.components.T


def reconstruct(t: PcaTransform, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != t.k:
        raise ValueError(f"expected dimension {t.k}, got {y.shape[-1]}")
    return t.mean + y @ t.components
