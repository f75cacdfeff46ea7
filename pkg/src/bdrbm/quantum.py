"""Dense pure-state simulation.

TFIM ground states, local product-basis rotations, exact outcome
distributions and shot sampling.  Qubit 0 is the most significant bit of an
outcome index everywhere in this package.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse.linalg as spla


class EigensolverError(RuntimeError):
    """Raised when the ground-state solver fails to converge."""

    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual norm {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class PureState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if amps.shape != (2 ** self.n_qubits,):
            raise ValueError(
                f"expected {2 ** self.n_qubits} amplitudes, got shape {amps.shape}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"state is not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "PureState":
        """Normalize ``amplitudes`` and infer the qubit count."""
        amps = np.asarray(amplitudes, dtype=complex)
        n = int(round(np.log2(amps.size)))
        if 2 ** n != amps.size:
            raise ValueError("amplitude count is not a power of two")
        return cls(n, amps / np.linalg.norm(amps))


@dataclass(frozen=True)
class LocalBasis:
    """Per-qubit Bloch measurement axes, shape ``(n, 3)``."""

    axes: np.ndarray

    def __post_init__(self):
        axes = np.array(self.axes, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(axes, axis=1)
        if axes.shape[0] < 1 or np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("every basis axis must be a unit 3-vector")
        axes.setflags(write=False)
        object.__setattr__(self, "axes", axes)

    @property
    def n_qubits(self) -> int:
        return self.axes.shape[0]

    def flat(self) -> np.ndarray:
        """Coordinates as (x0, y0, z0, x1, ...)."""
        return self.axes.reshape(-1).copy()

    @classmethod
    def computational(cls, n_qubits: int) -> "LocalBasis":
        return cls(np.tile([0.0, 0.0, 1.0], (n_qubits, 1)))


@dataclass(frozen=True)
class TfimParams:
    n_sites: int
    j_z: float = 1.0
    j_x: float = 1.0
    boundary: str = "open"
    # "pauli": S = sigma, critical at J_x = J_z; "half": S = sigma / 2,
    # critical at J_x = J_z / 2
    spin: str = "pauli"

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("TFIM needs at least 2 sites")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.spin not in ("pauli", "half"):
            raise ValueError(f"unknown spin convention {self.spin!r}")

    @property
    def spin_length(self) -> float:
        return 1.0 if self.spin == "pauli" else 0.5


@dataclass(frozen=True)
class MeasurementRecord:
    basis: LocalBasis
    counts: Mapping[str, int]
    shots: int = field(default=0)

    def __post_init__(self):
        n = self.basis.n_qubits
        counts = {}
        for key, value in sorted(self.counts.items()):
            if len(key) != n or set(key) - {"0", "1"}:
                raise ValueError(f"bad outcome bitstring {key!r} for {n} qubits")
            if int(value) < 0:
                raise ValueError("counts must be nonnegative")
            if int(value):
                counts[key] = int(value)
        total = sum(counts.values())
        shots = self.shots or total
        if total != shots or shots < 1:
            raise ValueError(f"counts sum to {total}, expected shots={shots}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "shots", shots)

    @property
    def n_qubits(self) -> int:
        return self.basis.n_qubits

    def histogram(self) -> np.ndarray:
        """Counts as an integer array indexed by outcome."""
        hist = np.zeros(2 ** self.n_qubits, dtype=np.int64)
        for key, value in self.counts.items():
            hist[int(key, 2)] = value
        return hist

    def empirical(self) -> np.ndarray:
        return self.histogram() / self.shots


# ---------------------------------------------------------------------------
# TFIM ground state
# ---------------------------------------------------------------------------

def _bonds(params: TfimParams) -> list[tuple[int, int]]:
    n = params.n_sites
    bonds = [(i, i + 1) for i in range(n - 1)]
    if params.boundary == "periodic" and n > 2:
        bonds.append((n - 1, 0))
    return bonds


def _site_masks(n: int) -> list[int]:
    return [1 << (n - 1 - i) for i in range(n)]


def tfim_diagonal(params: TfimParams, j_z: float | None = None) -> np.ndarray:
    """Diagonal of ``J_z sum S^z_i S^z_j`` in the computational basis."""
    n = params.n_sites
    idx = np.arange(2 ** n)
    s = params.spin_length
    spins = s * (1 - 2 * ((idx[:, None] >> (n - 1 - np.arange(n))) & 1))
    jz = params.j_z if j_z is None else j_z
    diag = np.zeros(2 ** n)
    for i, j in _bonds(params):
        diag += jz * spins[:, i] * spins[:, j]
    return diag


def tfim_operator(params: TfimParams, j_x: float | None = None) -> spla.LinearOperator:
    """Matrix-free TFIM Hamiltonian ``J_z sum S^z S^z - J_x sum S^x``."""
    n = params.n_sites
    dim = 2 ** n
    jx = params.j_x if j_x is None else j_x
    field_scale = jx * params.spin_length
    diag = tfim_diagonal(params)
    idx = np.arange(dim)
    flips = [idx ^ m for m in _site_masks(n)]

    def matvec(v):
        v = np.asarray(v).reshape(-1)
        out = diag * v
        for f in flips:
            out = out - field_scale * v[f]
        return out

    return spla.LinearOperator((dim, dim), matvec=matvec, rmatvec=matvec,
                               dtype=float)


def tfim_dense(params: TfimParams) -> np.ndarray:
    """Dense Hamiltonian built from Kronecker products (test oracle)."""
    n = params.n_sites
    sz = params.spin_length * np.diag([1.0, -1.0])
    sx = params.spin_length * np.array([[0.0, 1.0], [1.0, 0.0]])

    def site_op(ops):
        out = np.ones((1, 1))
        for k in range(n):
            out = np.kron(out, ops.get(k, np.eye(2)))
        return out

    h = np.zeros((2 ** n, 2 ** n))
    for i, j in _bonds(params):
        h += params.j_z * site_op({i: sz, j: sz})
    for i in range(n):
        h -= params.j_x * site_op({i: sx})
    return h


def tfim_ground_state(params: TfimParams, tol: float = 1e-8,
                      maxiter: int | None = None) -> tuple[PureState, float]:
    """Lowest eigenpair of the TFIM chain.

    The search runs in the spin-flip-even sector (the Lanczos start vector is
    uniform and the result is symmetrized), which picks the symmetric
    superposition of the two Neel states when the transverse field vanishes.
    Returns ``(state, energy)``.
    """
    n = params.n_sites
    if not 2 <= n <= 14:
        raise ValueError("tfim_ground_state supports 2 to 14 sites")
    dim = 2 ** n
    jx = max(params.j_x, 1e-6)
    op = tfim_operator(params, j_x=jx)
    v0 = np.full(dim, dim ** -0.5)
    maxiter = maxiter or 10 * dim
    try:
        vals, vecs = spla.eigsh(op, k=1, which="SA", v0=v0, tol=tol * 1e-2,
                                maxiter=maxiter, ncv=min(dim, 20))
        psi = vecs[:, 0]
    except spla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues):
            psi = exc.eigenvectors[:, 0]
            res = np.linalg.norm(op.matvec(psi) - exc.eigenvalues[0] * psi)
        else:
            res = float("nan")
        raise EigensolverError("TFIM eigensolver did not converge", res) from exc

    # global spin flip maps index k to its bitwise complement
    psi = 0.5 * (psi + psi[::-1])
    psi /= np.linalg.norm(psi)
    if psi.sum() < 0:
        psi = -psi
    energy = float(psi @ op.matvec(psi))
    residual = np.linalg.norm(op.matvec(psi) - energy * psi)
    if residual > max(tol, 1e-6) * max(1.0, abs(energy)) or abs(energy - vals[0]) > tol:
        raise EigensolverError("TFIM ground state failed the residual check", residual)
    return PureState(n, psi.astype(complex)), energy


# ---------------------------------------------------------------------------
# Local bases
# ---------------------------------------------------------------------------

def basis_unitary_single(theta: float, phi: float) -> np.ndarray:
    """Rotation whose rows are the outcome-0 and outcome-1 bras."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    ph = np.exp(-1j * phi)
    return np.array([[c, ph * s], [s, -ph * c]], dtype=complex)


def bloch_to_angles(r) -> tuple[float, float]:
    x, y, z = np.asarray(r, dtype=float)
    norm = np.sqrt(x * x + y * y + z * z)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"Bloch vector must have unit norm, got {norm!r}")
    # atan2 form of arccos(z); stays accurate near the poles
    return float(np.arctan2(np.hypot(x, y), z)), float(np.arctan2(y, x))


def angles_to_bloch(theta: float, phi: float) -> np.ndarray:
    return np.array([np.sin(theta) * np.cos(phi),
                     np.sin(theta) * np.sin(phi),
                     np.cos(theta)])


def basis_unitaries(basis: LocalBasis) -> list[np.ndarray]:
    return [basis_unitary_single(*bloch_to_angles(r)) for r in basis.axes]


def rotate(state: PureState, basis: LocalBasis) -> np.ndarray:
    """Apply the product rotation qubit by qubit, O(n 2^n)."""
    n = state.n_qubits
    if basis.n_qubits != n:
        raise ValueError(
            f"basis has {basis.n_qubits} axes but the state has {n} qubits")
    psi = state.amplitudes.reshape((2,) * n)
    for q, u in enumerate(basis_unitaries(basis)):
        psi = np.moveaxis(np.tensordot(u, psi, axes=([1], [q])), 0, q)
    return psi.reshape(-1)


def outcome_distribution(state: PureState, basis: LocalBasis) -> np.ndarray:
    probs = np.abs(rotate(state, basis)) ** 2
    return probs / probs.sum()


def sample_outcomes(dist, shots: int, rng_seed=None,
                    basis: LocalBasis | None = None) -> MeasurementRecord:
    """Draw ``shots`` i.i.d. outcomes from ``dist``.

    ``basis`` only labels the record; it defaults to the computational basis.
    """
    if shots < 1:
        raise ValueError("shots must be positive")
    p = np.clip(np.asarray(dist, dtype=float), 0.0, None)
    n = int(round(np.log2(p.size)))
    rng = np.random.default_rng(rng_seed)
    hist = rng.multinomial(shots, p / p.sum())
    counts = {format(i, f"0{n}b"): int(c) for i, c in enumerate(hist) if c}
    return MeasurementRecord(basis or LocalBasis.computational(n), counts, shots)


def measure(state: PureState, basis: LocalBasis, shots: int, rng_seed=None) -> MeasurementRecord:
    return sample_outcomes(outcome_distribution(state, basis), shots, rng_seed, basis)


def random_basis(n_qubits: int, rng_seed=None) -> LocalBasis:
    """Axes uniform on the upper Bloch hemisphere."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be positive")
    rng = np.random.default_rng(rng_seed)
    return LocalBasis(_hemisphere(rng, n_qubits))


def _hemisphere(rng: np.random.Generator, n: int) -> np.ndarray:
    z = rng.uniform(0.0, 1.0, n)
    az = rng.uniform(0.0, 2 * np.pi, n)
    rho = np.sqrt(1.0 - z * z)
    axes = np.stack([rho * np.cos(az), rho * np.sin(az), z], axis=1)
    return axes / np.linalg.norm(axes, axis=1, keepdims=True)


def flip_outcome_bits(probs: np.ndarray, qubits) -> np.ndarray:
    """Relabel outcomes by flipping the given qubits' bits."""
    probs = np.asarray(probs)
    n = int(round(np.log2(probs.size)))
    mask = 0
    for q in qubits:
        mask |= 1 << (n - 1 - q)
    return probs[np.arange(probs.size) ^ mask]


def canonicalize(record: MeasurementRecord) -> MeasurementRecord:
    """Map lower-hemisphere axes to their antipodes, relabelling outcomes."""
    axes = np.array(record.basis.axes)
    lower = [q for q in range(axes.shape[0]) if axes[q, 2] < 0]
    if not lower:
        return record
    axes[lower] *= -1
    counts = {}
    for key, value in record.counts.items():
        bits = list(key)
        for q in lower:
            bits[q] = "1" if bits[q] == "0" else "0"
        counts["".join(bits)] = value
    return MeasurementRecord(LocalBasis(axes), counts, record.shots)


def bits_of(n: int) -> np.ndarray:
    """All 2^n bit vectors in outcome order, shape (2^n, n)."""
    idx = np.arange(2 ** n)
    return ((idx[:, None] >> (n - 1 - np.arange(n))) & 1).astype(np.float64)
