"""Circuits: ordered gate programs with a terminal measurement, execution engines, QFT.

Circuit file format (one directive per line, ``#`` starts a comment)::

    qubits 2
    observable ZZ            # Pauli string, 'zall', or a .npy/.json matrix file
    noise depolarizing p=0.05 qubits=all at=end
    cce epsilon=0.1
    H 0
    CNOT 0,1
    RY(pi/4) 1
    CU(T) 2,0                # first listed qubit is the control
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from . import density as dm
from .gates import (
    MAX_DENSE_QUBITS,
    Gate,
    GateError,
    apply_matrix,
    eval_param,
    gate_from_label,
    is_parameterized,
    pauli_string,
)
from .measure import Observable, estimate_from_probabilities, spectral, z_all
from .noise import NoiseModel, NoiseSpec, apply_channel
from .state import MAX_QUBITS, StateVector, basis_state


class CircuitError(ValueError):
    pass


class CircuitParseError(CircuitError):
    def __init__(self, message: str, line: int, column: int, source: str = "<circuit>"):
        self.line, self.column, self.source = line, column, source
        super().__init__(f"{source}:{line}:{column}: {message}")


@dataclass(frozen=True)
class Op:
    label: str
    targets: tuple[int, ...]
    adjoint: bool = False

    def gate(self, cce_epsilon: float = 0.0) -> Gate:
        scale = 1.0 + cce_epsilon if is_parameterized(self.label) else 1.0
        g = gate_from_label(self.label, scale)
        return g.dagger() if self.adjoint else g


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: tuple[Op, ...] = ()
    observable: Observable | None = None
    observable_spec: str | None = None
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise CircuitError(f"n_qubits must be in [1, {MAX_QUBITS}]")
        ops = tuple(o if isinstance(o, Op) else Op(o[0], tuple(o[1])) for o in self.ops)
        for op in ops:
            g = op.gate()
            if len(op.targets) != g.arity:
                raise CircuitError(f"{op.label} acts on {g.arity} qubits, given {len(op.targets)}")
            if len(set(op.targets)) != len(op.targets):
                raise CircuitError(f"{op.label}: duplicate targets {op.targets}")
            for t in op.targets:
                if not 0 <= t < self.n_qubits:
                    raise CircuitError(f"{op.label}: target {t} out of range")
        object.__setattr__(self, "ops", ops)
        if self.observable is not None and self.observable.dim != 1 << self.n_qubits:
            raise CircuitError("observable dimension does not match the register")

    def add(self, label: str, *targets: int) -> Circuit:
        return replace(self, ops=self.ops + (Op(label, tuple(targets)),))

    def measured(self) -> Observable:
        return self.observable if self.observable is not None else z_all(self.n_qubits)

    def with_noise(self, noise: NoiseModel) -> Circuit:
        return replace(self, noise=noise)

    def inverse(self) -> Circuit:
        ops = tuple(Op(o.label, o.targets, not o.adjoint) for o in reversed(self.ops))
        return replace(self, ops=ops)


def bell_circuit() -> Circuit:
    return Circuit(2, (Op("H", (0,)), Op("CNOT", (0, 1))))


# --- execution --------------------------------------------------------------


def _check_input(c: Circuit, n: int) -> None:
    if n != c.n_qubits:
        raise CircuitError(f"circuit has {c.n_qubits} qubits, input state has {n}")


def run_statevector(c: Circuit, psi0: StateVector | None = None, *, cce_epsilon: float | None = None) -> StateVector:
    """Apply the ops left to right. Coherent over-rotation from the noise model is included."""
    psi0 = psi0 or basis_state(c.n_qubits, 0)
    _check_input(c, psi0.n_qubits)
    eps = c.noise.cce_epsilon if cce_epsilon is None else cce_epsilon
    amps = np.array(psi0.amplitudes)
    for op in c.ops:
        amps = apply_matrix(op.gate(eps).matrix, amps, op.targets, c.n_qubits)
    return StateVector(amps)


def _noise_targets(spec: NoiseSpec, candidates: Iterable[int]) -> list[int]:
    if spec.qubits is None:
        return list(candidates)
    return [q for q in candidates if q in spec.qubits]


def run_density(c: Circuit, rho0=None, noise: NoiseModel | None = None) -> dm.DensityMatrix:
    """Density-matrix execution with the circuit's noise model (or ``noise`` if given)."""
    noise = c.noise if noise is None else noise
    if rho0 is None:
        rho0 = basis_state(c.n_qubits, 0)
    rho = dm.from_state(rho0) if isinstance(rho0, StateVector) else rho0
    _check_input(c, rho.n_qubits)
    per_gate = [s for s in noise.channels if s.at == "gates"]
    at_end = [s for s in noise.channels if s.at == "end"]
    m = np.array(rho.matrix)
    for op in c.ops:
        m = dm.conjugate(op.gate(noise.cce_epsilon).matrix, m, op.targets, c.n_qubits)
        for spec in per_gate:
            ch = spec.channel()
            for q in _noise_targets(spec, op.targets):
                m = apply_channel(ch, dm.DensityMatrix(m, check=False), (q,)).matrix
    for spec in at_end:
        ch = spec.channel()
        for q in _noise_targets(spec, range(c.n_qubits)):
            m = apply_channel(ch, dm.DensityMatrix(m, check=False), (q,)).matrix
    return dm.DensityMatrix(m, check=False)


def unitary_of(c: Circuit, *, cce_epsilon: float | None = None) -> Gate:
    """Dense circuit unitary U_k ... U_1."""
    if c.n_qubits > MAX_DENSE_QUBITS:
        raise CircuitError(f"dense unitary limited to {MAX_DENSE_QUBITS} qubits")
    eps = c.noise.cce_epsilon if cce_epsilon is None else cce_epsilon
    d = 1 << c.n_qubits
    cols = np.eye(d, dtype=np.complex128)  # row r holds U e_r
    for op in c.ops:
        cols = apply_matrix(op.gate(eps).matrix, cols, op.targets, c.n_qubits)
    return Gate(cols.T, "CIRCUIT", check=False)


@dataclass
class RunResult:
    readout: str
    shots: int
    counts: dict[str, int]
    eigenvalues: list[float]
    probabilities: list[float]
    exact_expectation: float
    estimate: float | None
    stderr: float | None

    def to_dict(self) -> dict:
        return {
            "readout": self.readout,
            "shots": self.shots,
            "counts": self.counts,
            "eigenvalues": self.eigenvalues,
            "probabilities": self.probabilities,
            "exact_expectation": self.exact_expectation,
            "estimate": self.estimate,
            "stderr": self.stderr,
        }


def final_state(c: Circuit, psi0: StateVector | None = None):
    """StateVector when the circuit is free of incoherent noise, DensityMatrix otherwise."""
    if c.noise.channels:
        return run_density(c, psi0)
    return run_statevector(c, psi0)


def run_and_measure(
    c: Circuit,
    psi0: StateVector | None = None,
    shots: int = 1024,
    rng: np.random.Generator | None = None,
    readout: str = "observable",
) -> RunResult:
    """Execute and sample ``shots`` terminal measurements.

    ``readout='observable'`` histograms eigenvalue indices of the circuit's
    observable; ``'bitstring'`` samples the computational basis.
    """
    if shots < 1:
        raise CircuitError("shots must be a positive integer")
    rng = rng if rng is not None else np.random.default_rng()
    obs = c.measured()
    out = final_state(c, psi0)
    if isinstance(out, StateVector):
        rho_diag = out.probabilities()
        exact = float(np.vdot(out.amplitudes, obs.matrix @ out.amplitudes).real)
        probs = np.array([np.vdot(out.amplitudes, p @ out.amplitudes).real for p in obs.projectors])
    else:
        rho_diag = np.real(np.diag(out.matrix))
        exact = dm.expectation(obs, out)
        probs = np.array([p for _, p in dm.measure_probabilities(obs, out)])
    probs = np.clip(probs, 0.0, None)
    if readout == "observable":
        est, se, counts = estimate_from_probabilities(obs.eigenvalues, probs, shots, rng)
        hist = {str(i): int(k) for i, k in enumerate(counts) if k}
        return RunResult(readout, shots, hist, obs.eigenvalues.tolist(), probs.tolist(), exact, est, se)
    if readout == "bitstring":
        rho_diag = np.clip(rho_diag, 0.0, None)
        idx = rng.choice(len(rho_diag), size=shots, p=rho_diag / rho_diag.sum())
        counts = np.bincount(idx, minlength=len(rho_diag))
        hist = {format(i, f"0{c.n_qubits}b"): int(k) for i, k in enumerate(counts) if k}
        est = se = None
        diag = np.diag(obs.matrix)
        if np.allclose(obs.matrix, np.diag(diag)):
            vals = diag.real[idx]
            est = float(vals.mean())
            se = float(vals.std(ddof=1) / math.sqrt(shots)) if shots > 1 else 0.0
        return RunResult(readout, shots, hist, obs.eigenvalues.tolist(), rho_diag.tolist(), exact, est, se)
    raise CircuitError(f"unknown readout mode {readout!r}")


# --- constructors -------------------------------------------------------------


def _controlled_phase_label(m: int) -> str:
    # R_m = diag(1, exp(2 pi i / 2^m)); R_2 = S and R_3 = T
    if m == 2:
        return "CU(S)"
    if m == 3:
        return "CU(T)"
    return f"CU(P(2*pi/{1 << m}))"


def qft(n_qubits: int) -> Circuit:
    """Hadamards, controlled R_m phases and a final qubit reversal by SWAPs."""
    if not 1 <= n_qubits <= MAX_DENSE_QUBITS:
        raise CircuitError(f"qft size must be in [1, {MAX_DENSE_QUBITS}]")
    ops = []
    for j in range(n_qubits):
        ops.append(Op("H", (j,)))
        for k in range(j + 1, n_qubits):
            ops.append(Op(_controlled_phase_label(k - j + 1), (k, j)))
    for i in range(n_qubits // 2):
        ops.append(Op("SWAP", (i, n_qubits - 1 - i)))
    return Circuit(n_qubits, tuple(ops))


def dft_matrix(n_qubits: int) -> np.ndarray:
    n = 1 << n_qubits
    j = np.arange(n)
    return np.exp(2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


def fold(c: Circuit, scale: int) -> Circuit:
    """Global unitary folding U -> U (U^dag U)^((scale-1)/2) for odd ``scale``."""
    if scale < 1 or scale % 2 == 0:
        raise CircuitError(f"fold scale must be an odd positive integer, got {scale}")
    inv = c.inverse().ops
    ops = c.ops + (inv + c.ops) * ((scale - 1) // 2)
    return replace(c, ops=ops)


# --- file format --------------------------------------------------------------

_GATE_LINE = re.compile(r"^(?P<label>[A-Za-z]+\s*(?:\(.*\))?)\s+(?P<targets>q?\d+(?:\s*,\s*q?\d+)*)\s*$")


def _load_matrix(path: Path) -> np.ndarray:
    if path.suffix == ".npy":
        return np.load(path)
    data = json.loads(path.read_text())
    arr = np.array(data, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    return arr


def observable_from_spec(spec: str, n_qubits: int, base_dir: Path | None = None) -> Observable:
    s = spec.strip()
    if s.lower() in ("zall", "z^n", "default"):
        return z_all(n_qubits)
    if re.fullmatch(r"[IXYZixyz]+", s):
        if len(s) == 1 and n_qubits > 1:
            s = s * n_qubits
        if len(s) != n_qubits:
            raise CircuitError(f"Pauli string {s!r} has length {len(s)}, circuit has {n_qubits} qubits")
        return spectral(pauli_string(s), name=s.upper())
    path = Path(s)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise CircuitError(f"observable {spec!r} is neither a Pauli string nor an existing file")
    m = _load_matrix(path)
    if m.shape != (1 << n_qubits, 1 << n_qubits):
        raise CircuitError(f"observable matrix shape {m.shape} does not match {n_qubits} qubits")
    return spectral(m, name=path.name)


def _parse_kv(tokens: list[str], line_no: int, line: str, source: str) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise CircuitParseError(f"expected key=value, got {tok!r}", line_no, line.find(tok) + 1, source)
        k, v = tok.split("=", 1)
        out[k.lower()] = v
    return out


def parse_noise_line(tokens: list[str], line_no: int, line: str, source: str) -> NoiseSpec:
    if len(tokens) < 2:
        raise CircuitParseError("noise needs a kind and p=...", line_no, 1, source)
    kv = _parse_kv(tokens[2:], line_no, line, source)
    try:
        p = eval_param(kv["p"])
        q = kv.get("qubits", "all")
        qubits = None if q == "all" else tuple(int(x) for x in q.split(","))
        return NoiseSpec(tokens[1].lower(), p, qubits, kv.get("at", "end"))
    except KeyError:
        raise CircuitParseError("noise directive needs p=...", line_no, 1, source) from None
    except (ValueError, GateError) as exc:
        raise CircuitParseError(str(exc), line_no, line.find(tokens[1]) + 1, source) from None


def parse_circuit(text: str, source: str = "<circuit>", base_dir: Path | None = None) -> Circuit:
    n_qubits = None
    ops: list[Op] = []
    obs_spec = None
    obs_pos = (0, 0)
    channels: list[NoiseSpec] = []
    eps = 0.0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        col = len(line) - len(line.lstrip()) + 1
        tokens = stripped.split()
        head = tokens[0].lower()
        if head == "qubits":
            if n_qubits is not None:
                raise CircuitParseError("duplicate qubits header", line_no, col, source)
            if len(tokens) != 2 or not tokens[1].isdigit():
                raise CircuitParseError("expected 'qubits N'", line_no, col, source)
            n_qubits = int(tokens[1])
            if not 1 <= n_qubits <= MAX_QUBITS:
                raise CircuitParseError(f"qubit count must be in [1, {MAX_QUBITS}]", line_no, col, source)
            continue
        if n_qubits is None:
            raise CircuitParseError("file must start with 'qubits N'", line_no, col, source)
        if head == "observable":
            if len(tokens) != 2:
                raise CircuitParseError("expected 'observable NAME'", line_no, col, source)
            obs_spec, obs_pos = tokens[1], (line_no, line.find(tokens[1]) + 1)
            continue
        if head == "noise":
            spec = parse_noise_line(tokens, line_no, line, source)
            if spec.qubits is not None and any(not 0 <= q < n_qubits for q in spec.qubits):
                raise CircuitParseError("noise qubit out of range", line_no, col, source)
            channels.append(spec)
            continue
        if head == "cce":
            kv = _parse_kv(tokens[1:], line_no, line, source)
            try:
                eps = eval_param(kv["epsilon"])
            except (KeyError, GateError):
                raise CircuitParseError("expected 'cce epsilon=<value>'", line_no, col, source) from None
            continue
        m = _GATE_LINE.match(stripped)
        if not m:
            raise CircuitParseError(f"cannot parse gate line {stripped!r}", line_no, col, source)
        label = re.sub(r"\s+", "", m.group("label"))
        targets = tuple(int(t.strip().lstrip("q")) for t in m.group("targets").split(","))
        tcol = col + m.start("targets")
        try:
            g = gate_from_label(label)
        except GateError as exc:
            raise CircuitParseError(str(exc), line_no, col, source) from None
        if len(targets) != g.arity:
            raise CircuitParseError(f"{label} acts on {g.arity} qubit(s), given {len(targets)}", line_no, tcol, source)
        if len(set(targets)) != len(targets):
            raise CircuitParseError("duplicate target qubits", line_no, tcol, source)
        for t in targets:
            if t >= n_qubits:
                raise CircuitParseError(f"target {t} out of range for {n_qubits} qubits", line_no, tcol, source)
        ops.append(Op(label, targets))
    if n_qubits is None:
        raise CircuitParseError("missing 'qubits N' header", 1, 1, source)
    observable = None
    if obs_spec is not None:
        try:
            observable = observable_from_spec(obs_spec, n_qubits, base_dir)
        except (CircuitError, ValueError) as exc:
            raise CircuitParseError(str(exc), obs_pos[0], obs_pos[1], source) from None
    return Circuit(n_qubits, tuple(ops), observable, obs_spec, NoiseModel(tuple(channels), eps))


def load_circuit(path: str | Path) -> Circuit:
    p = Path(path)
    return parse_circuit(p.read_text(), source=str(p), base_dir=p.parent)


def parse_noise_text(text: str, source: str = "<noise>") -> NoiseModel:
    """A file holding only ``noise`` and ``cce`` directives."""
    channels, eps = [], 0.0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        tokens = line.split()
        if not tokens:
            continue
        head = tokens[0].lower()
        if head == "noise":
            channels.append(parse_noise_line(tokens, line_no, line, source))
        elif head == "cce":
            kv = _parse_kv(tokens[1:], line_no, line, source)
            try:
                eps = eval_param(kv["epsilon"])
            except (KeyError, GateError):
                raise CircuitParseError("expected 'cce epsilon=<value>'", line_no, 1, source) from None
        else:
            raise CircuitParseError(f"unexpected directive {tokens[0]!r} in noise file", line_no, 1, source)
    return NoiseModel(tuple(channels), eps)


def to_text(c: Circuit) -> str:
    lines = [f"qubits {c.n_qubits}"]
    if c.observable_spec:
        lines.append(f"observable {c.observable_spec}")
    for s in c.noise.channels:
        q = "all" if s.qubits is None else ",".join(map(str, s.qubits))
        lines.append(f"noise {s.kind} p={s.p!r} qubits={q} at={s.at}")
    if c.noise.cce_epsilon:
        lines.append(f"cce epsilon={c.noise.cce_epsilon!r}")
    for op in c.ops:
        if op.adjoint:
            raise CircuitError("adjoint ops have no text form")
        lines.append(f"{op.label} {','.join(map(str, op.targets))}")
    return "\n".join(lines) + "\n"
