"""Mixed states as density matrices."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .gates import Gate, apply_matrix
from .measure import Observable, PROB_FLOOR, spectral
from .state import StateVector

TOL = 1e-10
PSD_TOL = 1e-9

# 2^(2n) growth: 10 qubits is 16 MB per matrix
MAX_DENSITY_QUBITS = 10


class DensityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __init__(self, matrix, *, check: bool = True):
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DensityError(f"density matrix must be square, got {m.shape}")
        dim = m.shape[0]
        n = dim.bit_length() - 1
        if dim < 2 or 1 << n != dim:
            raise DensityError(f"dimension {dim} is not a power of two")
        if n > MAX_DENSITY_QUBITS:
            raise DensityError(f"{n} qubits exceeds the density register bound {MAX_DENSITY_QUBITS}")
        if check:
            if np.linalg.norm(m - m.conj().T) > PSD_TOL:
                raise DensityError("density matrix is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1) > PSD_TOL:
                raise DensityError(f"density matrix trace is {tr!r}, expected 1")
            if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -PSD_TOL:
                raise DensityError("density matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def from_state(psi: StateVector) -> DensityMatrix:
    return DensityMatrix(psi.density(), check=False)


def from_ensemble(states: Sequence[StateVector], probs: Sequence[float]) -> DensityMatrix:
    """sum_i p_i |psi_i><psi_i|."""
    if len(states) != len(probs) or not states:
        raise DensityError("need one probability per state")
    p = np.asarray(probs, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
        raise DensityError("probabilities must be nonnegative and sum to 1")
    dim = states[0].dim
    if any(s.dim != dim for s in states):
        raise DensityError("ensemble states have different dimensions")
    rho = sum(pi * s.density() for pi, s in zip(p, states))
    return DensityMatrix(rho)


def maximally_mixed(n_qubits: int) -> DensityMatrix:
    d = 1 << n_qubits
    return DensityMatrix(np.eye(d) / d, check=False)


def tensor(*rhos: DensityMatrix) -> DensityMatrix:
    m = rhos[0].matrix
    for r in rhos[1:]:
        m = np.kron(m, r.matrix)
    return DensityMatrix(m, check=False)


def purity(rho: DensityMatrix) -> float:
    m = rho.matrix
    # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
    return float(np.sum(np.abs(m) ** 2))


def _check_dim(a: int, b: int) -> None:
    if a != b:
        raise DensityError(f"dimension mismatch: {a} vs {b}")


def conjugate(u: np.ndarray, m: np.ndarray, targets, n_qubits: int) -> np.ndarray:
    """u rho u^dag with a small ``u`` acting on ``targets``."""
    left = apply_matrix(u, m.T, targets, n_qubits).T  # u applied to each column
    return apply_matrix(u.conj(), left, targets, n_qubits)  # conj(u) on each row = (.) u^dag


def apply_gate(u: Gate, rho: DensityMatrix, targets=None) -> DensityMatrix:
    """rho -> U rho U^dag."""
    n = rho.n_qubits
    if targets is None:
        _check_dim(u.matrix.shape[0], rho.dim)
        m = u.matrix @ rho.matrix @ u.matrix.conj().T
    else:
        m = conjugate(u.matrix, rho.matrix, targets, n)
    return DensityMatrix(m, check=False)


def _as_observable(obs) -> Observable:
    return obs if isinstance(obs, Observable) else spectral(obs)


def measure_probabilities(obs, rho: DensityMatrix) -> list[tuple[float, float]]:
    """[(lambda_i, tr(P_i rho))]."""
    obs = _as_observable(obs)
    _check_dim(obs.dim, rho.dim)
    out = []
    for lam, p in zip(obs.eigenvalues, obs.projectors):
        pr = float(np.real(np.sum(p * rho.matrix.T)))
        out.append((float(lam), 0.0 if pr < PROB_FLOOR else pr))
    return out


def collapse(obs, rho: DensityMatrix, index: int) -> DensityMatrix:
    """P_i rho P_i / tr(P_i rho)."""
    obs = _as_observable(obs)
    _check_dim(obs.dim, rho.dim)
    p = obs.projectors[index]
    pr = float(np.real(np.trace(p @ rho.matrix)))
    if pr <= PROB_FLOOR:
        raise DensityError(f"outcome {index} has zero probability")
    return DensityMatrix(p @ rho.matrix @ p / pr, check=False)


def expectation(obs, rho: DensityMatrix) -> float:
    obs = _as_observable(obs)
    _check_dim(obs.dim, rho.dim)
    return float(np.real(np.sum(obs.matrix * rho.matrix.T)))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on the qubits in ``keep`` (returned in ascending qubit order)."""
    n = rho.n_qubits
    kept = sorted(set(int(q) for q in keep))
    if not kept or len(kept) == n:
        raise DensityError("keep must be a nonempty proper subset of the qubits")
    if kept[0] < 0 or kept[-1] >= n:
        raise DensityError(f"qubit index out of range for {n} qubits")
    traced = [q for q in range(n) if q not in kept]
    t = rho.matrix.reshape((2,) * (2 * n))
    # bring to (kept rows, traced rows, kept cols, traced cols) then contract traced
    t = t.transpose(kept + traced + [n + q for q in kept] + [n + q for q in traced])
    dk, dt = 1 << len(kept), 1 << len(traced)
    t = t.reshape(dk, dt, dk, dt)
    return DensityMatrix(np.einsum("ajbj->ab", t), check=False)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """1/2 tr|rho - sigma|."""
    _check_dim(rho.dim, sigma.dim)
    diff = rho.matrix - sigma.matrix
    w = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return float(0.5 * np.sum(np.abs(w)))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """tr sqrt(sigma^1/2 rho sigma^1/2), clipped to [0, 1]."""
    _check_dim(rho.dim, sigma.dim)
    s = _psd_sqrt(sigma.matrix)
    inner = s @ rho.matrix @ s
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    return float(min(1.0, np.sum(np.sqrt(np.clip(w, 0, None)))))


def bloch_vector(rho: DensityMatrix) -> np.ndarray:
    """(tr(rho X), tr(rho Y), tr(rho Z)) of a single-qubit state."""
    if rho.n_qubits != 1:
        raise DensityError("bloch_vector requires a single-qubit state")
    m = rho.matrix
    return np.array([2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real])


def random_density(n_qubits: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Random mixed state G G^dag / tr(G G^dag) with a complex Ginibre G."""
    d = 1 << n_qubits
    r = rank or d
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)
