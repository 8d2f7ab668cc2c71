"""3-qubit bit-flip and phase-flip codes and the 9-qubit Shor code.

Syndromes are measured as ordinary projective measurements. For the Shor
code the three inner (bit-flip) block syndromes are measured first, then
the outer (phase) syndrome.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gates import PAULI_MATRICES, apply_matrix, cnot, hadamard, kron_all, swap
from .measure import Observable, measure_once
from .state import StateVector, basis_state

PROJ_TOL = 1e-9

_X = PAULI_MATRICES["X"]
_Z = PAULI_MATRICES["Z"]
_H = hadamard().matrix


class CodeError(ValueError):
    pass


@dataclass(frozen=True)
class SyndromeGroup:
    """A complete set of orthogonal projectors measured together.

    ``corrections[i]`` lists (pauli, qubit) pairs applied when label ``i`` is observed.
    """

    name: str
    labels: tuple[str, ...]
    projectors: tuple[np.ndarray, ...]
    corrections: tuple[tuple[tuple[str, int], ...], ...]

    def observable(self) -> Observable:
        return Observable.from_projectors(np.arange(len(self.labels), dtype=float), self.projectors, self.name)


@dataclass(frozen=True)
class CodeInstance:
    code_kind: str
    n_physical: int
    groups: tuple[SyndromeGroup, ...]

    @property
    def syndrome_projectors(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{g.name}:{lab}", p) for g in self.groups for lab, p in zip(g.labels, g.projectors)]

    def code_space_projector(self) -> np.ndarray:
        p = np.eye(1 << self.n_physical, dtype=np.complex128)
        for g in self.groups:
            p = p @ g.projectors[0]
        return p


def _ket(bits: str) -> np.ndarray:
    return basis_state(len(bits), int(bits, 2)).amplitudes


def _proj(*vecs: np.ndarray) -> np.ndarray:
    return sum(np.outer(v, v.conj()) for v in vecs)


def _lift(p3: np.ndarray, block: tuple[int, int, int], n: int) -> np.ndarray:
    """Embed a 3-qubit operator onto ``block`` of an n-qubit register."""
    d = 1 << n
    cols = apply_matrix(p3, np.eye(d, dtype=np.complex128), block, n)
    return cols.T


def _bitflip_projectors() -> list[np.ndarray]:
    pairs = [("000", "111"), ("100", "011"), ("010", "101"), ("001", "110")]
    return [_proj(_ket(a), _ket(b)) for a, b in pairs]


def _phaseflip_projectors() -> list[np.ndarray]:
    h3 = kron_all(_H, _H, _H)
    return [h3 @ p @ h3 for p in _bitflip_projectors()]


@lru_cache(maxsize=None)
def bitflip3() -> CodeInstance:
    corr = ((), (("X", 0),), (("X", 1),), (("X", 2),))
    g = SyndromeGroup("bit", ("P0", "P1", "P2", "P3"), tuple(_bitflip_projectors()), corr)
    return CodeInstance("bitflip3", 3, (g,))


@lru_cache(maxsize=None)
def phaseflip3() -> CodeInstance:
    corr = ((), (("Z", 0),), (("Z", 1),), (("Z", 2),))
    g = SyndromeGroup("phase", ("P0'", "P1'", "P2'", "P3'"), tuple(_phaseflip_projectors()), corr)
    return CodeInstance("phaseflip3", 3, (g,))


BLOCKS = ((0, 1, 2), (3, 4, 5), (6, 7, 8))


@lru_cache(maxsize=None)
def shor9() -> CodeInstance:
    n = 9
    groups = []
    for b, block in enumerate(BLOCKS):
        projs = tuple(_lift(p, block, n) for p in _bitflip_projectors())
        corr = ((),) + tuple(((("X", q),)) for q in block)
        groups.append(SyndromeGroup(f"block{b}", ("P0", "P1", "P2", "P3"), projs, corr))
    # Outer syndrome: signs of S_a S_b where S_b = X X X on block b.
    s = [_lift(kron_all(_X, _X, _X), block, n) for block in BLOCKS]
    s01, s12 = s[0] @ s[1], s[1] @ s[2]
    eye = np.eye(1 << n)
    signs = [(+1, +1), (-1, +1), (-1, -1), (+1, -1)]  # none, block 0, block 1, block 2
    projs = tuple((eye + a * s01) @ (eye + c * s12) / 4 for a, c in signs)
    corr = ((), (("Z", 0),), (("Z", 3),), (("Z", 6),))
    groups.append(SyndromeGroup("outer", ("Q0", "Q1", "Q2", "Q3"), projs, corr))
    return CodeInstance("shor9", n, tuple(groups))


CODES = {"bitflip3": bitflip3, "phaseflip3": phaseflip3, "shor9": shor9}


def get_code(kind: str) -> CodeInstance:
    try:
        return CODES[kind]()
    except KeyError:
        raise CodeError(f"unknown code {kind!r}; choose from {sorted(CODES)}") from None


# --- encoding ------------------------------------------------------------------


def _bitflip_encode_ops(a: int, b: int, c: int) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    # (CNOT x I)(I x SWAP)(CNOT x I): rightmost factor acts first
    return [(cnot().matrix, (a, b)), (swap().matrix, (b, c)), (cnot().matrix, (a, b))]


def encoding_ops(code: CodeInstance) -> list[tuple[np.ndarray, tuple[int, ...]]]:
    if code.code_kind == "bitflip3":
        return _bitflip_encode_ops(0, 1, 2)
    if code.code_kind == "phaseflip3":
        return _bitflip_encode_ops(0, 1, 2) + [(_H, (q,)) for q in range(3)]
    if code.code_kind == "shor9":
        ops = _bitflip_encode_ops(0, 3, 6) + [(_H, (q,)) for q in (0, 3, 6)]
        for block in BLOCKS:
            ops += _bitflip_encode_ops(*block)
        return ops
    raise CodeError(f"unknown code {code.code_kind!r}")


def _run_ops(ops, amps: np.ndarray, n: int) -> np.ndarray:
    for m, tg in ops:
        amps = apply_matrix(m, amps, tg, n)
    return amps


def encode(code: CodeInstance, alpha: complex, beta: complex) -> StateVector:
    """Run the encoding circuit on (alpha|0> + beta|1>) ⊗ |0...0>."""
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1) > 1e-9:
        raise CodeError("(alpha, beta) must be normalized")
    n = code.n_physical
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = alpha
    amps[1 << (n - 1)] = beta
    return StateVector(_run_ops(encoding_ops(code), amps, n))


def decode(code: CodeInstance, psi: StateVector) -> StateVector:
    """Invert the encoding and return the logical qubit; ancillas must come back to |0>."""
    n = code.n_physical
    if psi.n_qubits != n:
        raise CodeError(f"state has {psi.n_qubits} qubits, code uses {n}")
    a = psi.amplitudes
    in_space = np.vdot(a, code.code_space_projector() @ a).real
    if abs(in_space - 1) > PROJ_TOL:
        raise CodeError(f"state is outside the code space (weight {in_space:.6g})")
    inv = [(m.conj().T, tg) for m, tg in reversed(encoding_ops(code))]
    out = _run_ops(inv, np.array(a), n)
    logical = out[[0, 1 << (n - 1)]]
    if abs(np.linalg.norm(logical) - 1) > PROJ_TOL:
        raise CodeError("ancillas did not return to |0>")
    return StateVector(logical)


# --- syndrome measurement and correction ----------------------------------------


def syndrome_probabilities(code: CodeInstance, psi: StateVector) -> dict[str, list[float]]:
    """Per group, the probability of each label (groups treated independently)."""
    _check(code, psi)
    a = psi.amplitudes
    return {g.name: [float(np.vdot(a, p @ a).real) for p in g.projectors] for g in code.groups}


def _check(code: CodeInstance, psi: StateVector) -> None:
    if psi.n_qubits != code.n_physical:
        raise CodeError(f"state has {psi.n_qubits} qubits, code uses {code.n_physical}")


def measure_syndrome(code: CodeInstance, psi: StateVector, rng: np.random.Generator) -> tuple[tuple[str, ...], StateVector]:
    """Measure every syndrome group in order; returns (labels, collapsed state)."""
    _check(code, psi)
    labels = []
    for g in code.groups:
        rec = measure_once(g.observable(), psi, rng)
        labels.append(f"{g.name}:{g.labels[rec.outcome_index]}")
        psi = rec.post_state
    return tuple(labels), psi


def correct(code: CodeInstance, syndrome: tuple[str, ...] | str, psi: StateVector) -> StateVector:
    """Apply the Pauli corrections associated with each measured label."""
    _check(code, psi)
    if isinstance(syndrome, str):
        syndrome = (syndrome if ":" in syndrome else f"{code.groups[0].name}:{syndrome}",)
    by_name = {g.name: g for g in code.groups}
    amps = np.array(psi.amplitudes)
    for item in syndrome:
        name, _, lab = item.partition(":")
        g = by_name.get(name)
        if g is None or lab not in g.labels:
            raise CodeError(f"unknown syndrome label {item!r}")
        for pauli, q in g.corrections[g.labels.index(lab)]:
            amps = apply_matrix(PAULI_MATRICES[pauli], amps, (q,), code.n_physical)
    return StateVector(amps)


def detect_and_correct(code: CodeInstance, psi: StateVector, rng: np.random.Generator) -> tuple[tuple[str, ...], StateVector]:
    labels, post = measure_syndrome(code, psi, rng)
    return labels, correct(code, labels, post)


def apply_single_qubit(u: np.ndarray, psi: StateVector, qubit: int) -> StateVector:
    return StateVector(apply_matrix(np.asarray(u, dtype=np.complex128), psi.amplitudes, (qubit,), psi.n_qubits))
