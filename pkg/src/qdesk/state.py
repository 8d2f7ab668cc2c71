"""Pure states: construction, composition and Bloch-sphere coordinates.

Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of a
computational-basis index. ``basis_state(3, 5)`` is therefore |101>.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

NORM_TOL = 1e-10
RENORM_TOL = 1e-8

# Largest register a StateVector may hold. 20 qubits = 16 MB of amplitudes.
MAX_QUBITS = 20


class StateError(ValueError):
    pass


def _n_qubits_for(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise StateError(f"amplitude vector length {dim} is not a power of two >= 2")
    return n


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm amplitude vector over the computational basis of ``n_qubits``."""

    amplitudes: np.ndarray

    def __init__(self, amplitudes, *, renormalize: bool = True):
        amps = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        n = _n_qubits_for(amps.size)
        if n > MAX_QUBITS:
            raise StateError(f"{n} qubits exceeds the register bound of {MAX_QUBITS}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOL:
            if not renormalize or abs(norm - 1.0) > RENORM_TOL:
                raise StateError(f"state is not normalized (norm = {norm!r})")
            amps = amps / norm
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: StateVector) -> complex:
        """<self|other>."""
        _check_same_dim(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)

    def __repr__(self) -> str:
        return f"StateVector(n_qubits={self.n_qubits}, amplitudes={np.round(self.amplitudes, 6)!r})"


@dataclass(frozen=True)
class BlochCoordinates:
    theta: float
    phi: float

    def to_state(self) -> StateVector:
        return StateVector(
            [np.cos(self.theta / 2), np.exp(1j * self.phi) * np.sin(self.theta / 2)]
        )

    def to_vector(self) -> np.ndarray:
        """Cartesian point on the unit sphere."""
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])


def _check_same_dim(a: StateVector, b: StateVector) -> None:
    if a.dim != b.dim:
        raise StateError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")


def basis_state(n_qubits: int, index: int = 0) -> StateVector:
    if n_qubits < 1:
        raise StateError("n_qubits must be positive")
    if n_qubits > MAX_QUBITS:
        raise StateError(f"{n_qubits} qubits exceeds the register bound of {MAX_QUBITS}")
    if not 0 <= index < 1 << n_qubits:
        raise StateError(f"basis index {index} out of range for {n_qubits} qubits")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(amps)


def from_bitstring(bits: str) -> StateVector:
    return basis_state(len(bits), int(bits, 2))


def tensor(*states: StateVector) -> StateVector:
    """Tensor product, leftmost argument becoming qubit 0."""
    if not states:
        raise StateError("tensor of zero states")
    return StateVector(reduce(np.kron, (s.amplitudes for s in states)))


def plus_state() -> StateVector:
    return StateVector(np.array([1, 1]) / np.sqrt(2))


def minus_state() -> StateVector:
    return StateVector(np.array([1, -1]) / np.sqrt(2))


def qubit(alpha: complex, beta: complex) -> StateVector:
    return StateVector([alpha, beta], renormalize=True)


def bloch_coordinates(psi: StateVector) -> BlochCoordinates:
    """Angles (theta, phi) with psi = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1> up to phase.

    The global phase is fixed by making the |0> amplitude real and
    nonnegative; at the poles phi is set to 0.
    """
    if psi.n_qubits != 1:
        raise StateError("bloch_coordinates requires a single-qubit state")
    a, b = psi.amplitudes
    ra, rb = abs(a), abs(b)
    theta = 2.0 * np.arctan2(rb, ra)
    if rb < NORM_TOL or ra < NORM_TOL:
        return BlochCoordinates(float(np.pi if ra < NORM_TOL else 0.0), 0.0)
    phi = float(np.angle(b) - np.angle(a)) % (2 * np.pi)
    if phi >= 2 * np.pi:
        phi = 0.0
    return BlochCoordinates(float(theta), phi)


def global_phase_equal(a: StateVector, b: StateVector, tol: float = NORM_TOL) -> bool:
    _check_same_dim(a, b)
    return abs(abs(a.inner(b)) - 1.0) <= tol


_BELL = {
    "phi+": [1, 0, 0, 1],
    "phi-": [1, 0, 0, -1],
    "psi+": [0, 1, 1, 0],
    "psi-": [0, 1, -1, 0],
}
_BELL_ALIASES = {"Φ+": "phi+", "Φ-": "phi-", "Ψ+": "psi+", "Ψ-": "psi-"}


def bell_state(which: str) -> StateVector:
    """One of 'phi+', 'phi-', 'psi+', 'psi-' (Greek spellings accepted)."""
    key = _BELL_ALIASES.get(which, which.lower())
    if key not in _BELL:
        raise StateError(f"unknown Bell state {which!r}")
    return StateVector(np.array(_BELL[key]) / np.sqrt(2))


def random_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    z = rng.normal(size=1 << n_qubits) + 1j * rng.normal(size=1 << n_qubits)
    return StateVector(z / np.linalg.norm(z))


def as_state(psi: StateVector | Sequence[complex] | np.ndarray) -> StateVector:
    return psi if isinstance(psi, StateVector) else StateVector(psi)
