"""Projective measurement: spectral decomposition, sampling, collapse and estimation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .gates import PAULI_MATRICES, kron_all, pauli_string
from .state import StateVector

HERMITIAN_TOL = 1e-10
# eigenvalues closer than this are treated as one degenerate eigenspace
GROUPING_TOL = 1e-8
PROB_FLOOR = 1e-14


class MeasurementError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian matrix with its spectral decomposition M = sum_i lambda_i P_i."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    projectors: tuple[np.ndarray, ...]
    name: str = field(default="M")

    @property
    def n_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_projectors(cls, eigenvalues: Sequence[float], projectors: Sequence[np.ndarray], name: str = "M"):
        """Build directly from a complete set of orthogonal projectors."""
        ev = np.asarray(eigenvalues, dtype=float)
        ps = tuple(np.asarray(p, dtype=np.complex128) for p in projectors)
        if len(ev) != len(ps) or not ps:
            raise MeasurementError("need one eigenvalue per projector")
        m = sum(lam * p for lam, p in zip(ev, ps))
        for p in ps:
            p.setflags(write=False)
        return cls(np.asarray(m), ev, ps, name)


def spectral(m, name: str = "M") -> Observable:
    """Group the eigenpairs of a Hermitian matrix into (lambda_i, P_i)."""
    mat = np.array(m, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise MeasurementError(f"observable must be square, got {mat.shape}")
    if np.linalg.norm(mat - mat.conj().T) >= HERMITIAN_TOL:
        raise MeasurementError("observable is not Hermitian")
    mat = (mat + mat.conj().T) / 2
    w, v = np.linalg.eigh(mat)
    groups: list[list[int]] = []
    for i, lam in enumerate(w):
        if groups and lam - w[groups[-1][0]] <= GROUPING_TOL:
            groups[-1].append(i)
        else:
            groups.append([i])
    # report eigenvalues in descending order: +1 before -1 for Pauli observables
    groups.reverse()
    eigenvalues = np.array([float(np.mean(w[g])) for g in groups])
    projectors = []
    for g in groups:
        vg = v[:, g]
        p = vg @ vg.conj().T
        p.setflags(write=False)
        projectors.append(p)
    mat.setflags(write=False)
    return Observable(mat, eigenvalues, tuple(projectors), name)


def z_all(n_qubits: int) -> Observable:
    """Z tensored over every qubit; the default readout observable."""
    return spectral(kron_all(*([PAULI_MATRICES["Z"]] * n_qubits)), name="Z" * n_qubits)


def pauli_observable(spec: str) -> Observable:
    return spectral(pauli_string(spec), name=spec.upper())


def computational_basis(n_qubits: int) -> Observable:
    """One rank-one projector per basis state, eigenvalue = basis index."""
    dim = 1 << n_qubits
    projs = []
    for i in range(dim):
        p = np.zeros((dim, dim), dtype=np.complex128)
        p[i, i] = 1
        projs.append(p)
    return Observable.from_projectors(np.arange(dim, dtype=float), projs, name="basis")


def _as_observable(obs) -> Observable:
    return obs if isinstance(obs, Observable) else spectral(obs)


def _check_dim(obs: Observable, dim: int) -> None:
    if obs.dim != dim:
        raise MeasurementError(f"observable dimension {obs.dim} does not match state dimension {dim}")


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: float
    outcome_index: int
    post_state: StateVector


def _probabilities(obs: Observable, psi: StateVector) -> np.ndarray:
    a = psi.amplitudes
    p = np.array([np.vdot(a, proj @ a).real for proj in obs.projectors])
    p[p < PROB_FLOOR] = 0.0
    return p


def outcome_probabilities(obs, psi: StateVector) -> list[tuple[float, float]]:
    """[(lambda_i, <psi|P_i|psi>)] in the observable's eigenvalue order."""
    obs = _as_observable(obs)
    _check_dim(obs, psi.dim)
    return list(zip(obs.eigenvalues.tolist(), _probabilities(obs, psi).tolist()))


def measure_once(obs, psi: StateVector, rng: np.random.Generator) -> MeasurementRecord:
    """Sample one outcome and collapse: P_i|psi> / sqrt(<psi|P_i|psi>)."""
    obs = _as_observable(obs)
    _check_dim(obs, psi.dim)
    p = _probabilities(obs, psi)
    i = int(rng.choice(len(p), p=p / p.sum()))
    post = obs.projectors[i] @ psi.amplitudes
    return MeasurementRecord(float(obs.eigenvalues[i]), i, StateVector(post / np.sqrt(p[i])))


def expectation(obs, psi: StateVector) -> float:
    obs = _as_observable(obs)
    _check_dim(obs, psi.dim)
    a = psi.amplitudes
    return float(np.vdot(a, obs.matrix @ a).real)


def sample_outcomes(probs: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``shots`` independent draws from ``probs``."""
    p = np.clip(np.asarray(probs, dtype=float), 0.0, None)
    return rng.choice(len(p), size=shots, p=p / p.sum())


def estimate_from_probabilities(
    eigenvalues: np.ndarray, probs: np.ndarray, shots: int, rng: np.random.Generator
) -> tuple[float, float, np.ndarray]:
    """Sample mean of eigenvalues over ``shots`` draws, its standard error, and counts T_i."""
    if shots < 1:
        raise MeasurementError("shots must be a positive integer")
    idx = sample_outcomes(probs, shots, rng)
    counts = np.bincount(idx, minlength=len(eigenvalues))
    values = np.asarray(eigenvalues)[idx]
    est = float(np.dot(eigenvalues, counts) / shots)
    stderr = float(values.std(ddof=1) / np.sqrt(shots)) if shots > 1 else 0.0
    return est, stderr, counts


def estimate_expectation(obs, psi: StateVector, shots: int, rng: np.random.Generator) -> tuple[float, float]:
    """(sum_i lambda_i T_i / T, sample std / sqrt(T))."""
    obs = _as_observable(obs)
    _check_dim(obs, psi.dim)
    est, stderr, _ = estimate_from_probabilities(obs.eigenvalues, _probabilities(obs, psi), shots, rng)
    return est, stderr
