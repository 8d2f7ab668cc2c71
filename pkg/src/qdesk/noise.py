"""Kraus error channels and coherent control errors.

Probability conventions are not uniform across the literature. Here:

* ``bit_flip(p)`` and ``phase_flip(p)``: ``p`` is the probability that
  *nothing* happens; the flip is applied with probability ``1 - p``.
* ``depolarizing(p)``: ``p`` is the probability of replacing the state by
  the maximally mixed state, rho -> (p/2) I + (1 - p) rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .density import DensityMatrix, conjugate
from .gates import PAULI_MATRICES, Gate, HermitianGenerator

TP_TOL = 1e-10


class NoiseError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class KrausChannel:
    operators: tuple[np.ndarray, ...]
    label: str = "channel"

    def __post_init__(self):
        ops = tuple(np.asarray(e, dtype=np.complex128) for e in self.operators)
        if not ops:
            raise NoiseError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        if any(e.shape != (d, d) for e in ops):
            raise NoiseError("Kraus operators must be square and of equal size")
        total = sum(e.conj().T @ e for e in ops)
        err = np.linalg.norm(total - np.eye(d))
        if err >= TP_TOL:
            raise NoiseError(f"{self.label}: sum E^dag E deviates from I by {err:.3g}")
        object.__setattr__(self, "operators", ops)

    @property
    def arity(self) -> int:
        return self.operators[0].shape[0].bit_length() - 1

    def completeness_error(self) -> float:
        d = self.operators[0].shape[0]
        return float(np.linalg.norm(sum(e.conj().T @ e for e in self.operators) - np.eye(d)))


def _check_prob(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise NoiseError(f"probability {p} outside [0, 1]")
    return p


def bit_flip(p: float) -> KrausChannel:
    """E0 = sqrt(p) I, E1 = sqrt(1-p) X."""
    p = _check_prob(p)
    return KrausChannel(
        (math.sqrt(p) * PAULI_MATRICES["I"], math.sqrt(1 - p) * PAULI_MATRICES["X"]), f"bitflip(p={p})"
    )


def phase_flip(p: float) -> KrausChannel:
    """E0 = sqrt(p) I, E1 = sqrt(1-p) Z."""
    p = _check_prob(p)
    return KrausChannel(
        (math.sqrt(p) * PAULI_MATRICES["I"], math.sqrt(1 - p) * PAULI_MATRICES["Z"]), f"phaseflip(p={p})"
    )


def depolarizing(p: float) -> KrausChannel:
    p = _check_prob(p)
    ops = [math.sqrt(1 - 3 * p / 4) * PAULI_MATRICES["I"]]
    ops += [math.sqrt(p / 4) * PAULI_MATRICES[k] for k in "XYZ"]
    return KrausChannel(tuple(ops), f"depolarizing(p={p})")


def identity_channel(arity: int = 1) -> KrausChannel:
    return KrausChannel((np.eye(1 << arity),), "identity")


CHANNELS = {"bitflip": bit_flip, "phaseflip": phase_flip, "depolarizing": depolarizing}


def apply_channel(ch: KrausChannel, rho: DensityMatrix, targets: Iterable[int] | None = None) -> DensityMatrix:
    """sum_j E_j rho E_j^dag with each E_j embedded on ``targets``."""
    n = rho.n_qubits
    tg = tuple(range(n)) if targets is None else tuple(targets)
    if len(tg) != ch.arity:
        raise NoiseError(f"channel of arity {ch.arity} given {len(tg)} targets")
    out = np.zeros_like(rho.matrix)
    for e in ch.operators:
        out += conjugate(e, rho.matrix, tg, n)
    return DensityMatrix(out, check=False)


def apply_per_qubit(ch: KrausChannel, rho: DensityMatrix, qubits: Iterable[int]) -> DensityMatrix:
    """Independent single-qubit application on each listed qubit."""
    for q in qubits:
        rho = apply_channel(ch, rho, (q,))
    return rho


# --- coherent control errors ------------------------------------------------


@dataclass(frozen=True)
class CoherentControlError:
    """Over-rotation exp(-i eps H_U) of the gate exp(-i H_U)."""

    epsilon: float
    generator: HermitianGenerator

    def error_unitary(self) -> Gate:
        return Gate(self.generator.exp(self.epsilon), f"ERR({self.epsilon!r})")

    def perturbed(self) -> Gate:
        return perturbed_gate(self.generator, self.epsilon)


def _as_generator(h) -> HermitianGenerator:
    return h if isinstance(h, HermitianGenerator) else HermitianGenerator(h)


def perturbed_gate(h, epsilon: float) -> Gate:
    """exp(-i (1 + eps) H)."""
    h = _as_generator(h)
    if not math.isfinite(epsilon):
        raise NoiseError("epsilon must be finite")
    return Gate(h.exp(1.0 + epsilon), f"CCE({epsilon!r})")


def fidelity_lower_bound(h, epsilon_inf: float) -> float:
    """1 - ||H||^2 eps^2 / 2 with the spectral norm; negative values mean the bound is vacuous."""
    h = _as_generator(h)
    return 1.0 - h.spectral_norm() ** 2 * float(epsilon_inf) ** 2 / 2.0


def circuit_fidelity_lower_bound(generators, epsilons) -> float:
    """Bound for a gate sequence: the largest ||H_j|| with the largest |eps_j|."""
    norms = [_as_generator(h).spectral_norm() for h in generators]
    eps_inf = float(np.max(np.abs(epsilons))) if len(epsilons) else 0.0
    return 1.0 - (max(norms, default=0.0) ** 2) * eps_inf**2 / 2.0


# --- noise models attached to circuits --------------------------------------


@dataclass(frozen=True)
class NoiseSpec:
    """One ``noise`` directive: a channel on some qubits, at the end or after every gate.

    ``qubits`` of ``None`` means every qubit.
    """

    kind: str
    p: float
    qubits: tuple[int, ...] | None = None
    at: str = "end"

    def __post_init__(self):
        if self.kind not in CHANNELS:
            raise NoiseError(f"unknown noise kind {self.kind!r}")
        if self.at not in ("end", "gates"):
            raise NoiseError(f"noise placement must be 'end' or 'gates', got {self.at!r}")
        _check_prob(self.p)

    def error_probability(self) -> float:
        return self.p if self.kind == "depolarizing" else 1.0 - self.p

    def scaled(self, lam: float) -> tuple[NoiseSpec, bool]:
        """Multiply the error probability by ``lam``; returns (spec, clamped)."""
        err = lam * self.error_probability()
        clamped = not 0.0 <= err <= 1.0
        err = min(max(err, 0.0), 1.0)
        p = err if self.kind == "depolarizing" else 1.0 - err
        return NoiseSpec(self.kind, p, self.qubits, self.at), clamped

    def channel(self) -> KrausChannel:
        return CHANNELS[self.kind](self.p)


@dataclass(frozen=True)
class NoiseModel:
    channels: tuple[NoiseSpec, ...] = ()
    cce_epsilon: float = 0.0

    @property
    def is_noiseless(self) -> bool:
        return self.cce_epsilon == 0.0 and all(s.error_probability() == 0.0 for s in self.channels)

    def scaled(self, lam: float) -> tuple[NoiseModel, list[str]]:
        warnings = []
        specs = []
        for s in self.channels:
            new, clamped = s.scaled(lam)
            if clamped:
                warnings.append(f"{s.kind} error probability clamped at scale {lam}")
            specs.append(new)
        return NoiseModel(tuple(specs), lam * self.cce_epsilon), warnings

    def merged(self, other: NoiseModel) -> NoiseModel:
        eps = other.cce_epsilon or self.cce_epsilon
        return NoiseModel(self.channels + other.channels, eps)

    def to_dict(self) -> dict:
        return {
            "channels": [
                {"kind": s.kind, "p": s.p, "qubits": list(s.qubits) if s.qubits is not None else "all", "at": s.at}
                for s in self.channels
            ],
            "cce_epsilon": self.cce_epsilon,
        }
