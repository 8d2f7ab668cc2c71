"""Gate constructors, generator exponentials, register embedding and application."""

from __future__ import annotations

import ast
import math
import operator
import re
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .state import StateError, StateVector

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-10

# Dense 2^n x 2^n matrices are only built up to this many qubits.
MAX_DENSE_QUBITS = 10


class GateError(ValueError):
    pass


def _arity_for(dim: int) -> int:
    k = dim.bit_length() - 1
    if dim < 2 or 1 << k != dim:
        raise GateError(f"matrix dimension {dim} is not a power of two >= 2")
    return k


@dataclass(frozen=True, eq=False)
class Gate:
    """Unitary acting on ``arity`` qubits."""

    matrix: np.ndarray
    label: str = "U"
    arity: int = field(init=False)

    def __init__(self, matrix, label: str = "U", *, check: bool = True):
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise GateError(f"gate matrix must be square, got shape {m.shape}")
        arity = _arity_for(m.shape[0])
        if check:
            err = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]))
            if err >= UNITARY_TOL:
                raise GateError(f"{label}: matrix is not unitary (||U^dag U - I||_F = {err:.3g})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "arity", arity)

    def dagger(self) -> Gate:
        label = self.label[:-1] if self.label.endswith("†") else self.label + "†"
        return Gate(self.matrix.conj().T, label, check=False)

    def __matmul__(self, other: Gate) -> Gate:
        """Series composition: (self @ other) applies ``other`` first."""
        if self.arity != other.arity:
            raise GateError("cannot compose gates of different arity")
        return Gate(self.matrix @ other.matrix, f"{self.label}·{other.label}", check=False)

    def kron(self, other: Gate) -> Gate:
        """Parallel composition, self on the leading qubits."""
        return Gate(np.kron(self.matrix, other.matrix), f"{self.label}⊗{other.label}", check=False)

    def __repr__(self) -> str:
        return f"Gate({self.label!r}, arity={self.arity})"


@dataclass(frozen=True, eq=False)
class HermitianGenerator:
    """Hermitian H with U = exp(-i t H); eigendecomposition is cached."""

    matrix: np.ndarray
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __init__(self, matrix):
        h = np.array(matrix, dtype=np.complex128)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise GateError(f"generator must be square, got shape {h.shape}")
        _arity_for(h.shape[0])
        if np.linalg.norm(h - h.conj().T) >= HERMITIAN_TOL:
            raise GateError("generator is not Hermitian")
        h = (h + h.conj().T) / 2
        w, v = np.linalg.eigh(h)
        for a in (h, w, v):
            a.setflags(write=False)
        object.__setattr__(self, "matrix", h)
        object.__setattr__(self, "eigenvalues", w)
        object.__setattr__(self, "eigenvectors", v)

    @property
    def arity(self) -> int:
        return _arity_for(self.matrix.shape[0])

    def spectral_norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def exp(self, t: float) -> np.ndarray:
        """exp(-i t H) via the eigendecomposition."""
        v = self.eigenvectors
        return (v * np.exp(-1j * t * self.eigenvalues)) @ v.conj().T

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


# --- standard gates ---------------------------------------------------------

_I2 = np.eye(2, dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
PAULI_MATRICES = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}


def identity(n_qubits: int = 1) -> Gate:
    return Gate(np.eye(1 << n_qubits), "I", check=False)


def pauli(which: str) -> Gate:
    key = which.upper()
    if key not in ("X", "Y", "Z"):
        raise GateError(f"unknown Pauli {which!r}")
    return Gate(PAULI_MATRICES[key], key, check=False)


def _fmt(x: float) -> str:
    return repr(float(x))


def rotation(axis: str, theta: float) -> Gate:
    """R_axis(theta) = exp(-i theta/2 P)."""
    ax = axis.lower()
    if ax not in ("x", "y", "z"):
        raise GateError(f"unknown rotation axis {axis!r}")
    if not math.isfinite(theta):
        raise GateError("rotation angle must be finite")
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    m = c * _I2 - 1j * s * PAULI_MATRICES[ax.upper()]
    return Gate(m, f"R{ax.upper()}({_fmt(theta)})", check=False)


def hadamard() -> Gate:
    return Gate(np.array([[1, 1], [1, -1]]) / np.sqrt(2), "H", check=False)


def phase_s() -> Gate:
    return Gate(np.diag([1, 1j]), "S", check=False)


def phase_t() -> Gate:
    return Gate(np.diag([1, np.exp(1j * np.pi / 4)]), "T", check=False)


def phase(phi: float) -> Gate:
    """diag(1, e^{i phi})."""
    if not math.isfinite(phi):
        raise GateError("phase angle must be finite")
    return Gate(np.diag([1, np.exp(1j * phi)]), f"P({_fmt(phi)})", check=False)


def cnot() -> Gate:
    m = np.eye(4, dtype=np.complex128)[[0, 1, 3, 2]]
    return Gate(m, "CNOT", check=False)


def swap() -> Gate:
    m = np.eye(4, dtype=np.complex128)[[0, 2, 1, 3]]
    return Gate(m, "SWAP", check=False)


def controlled(u: Gate) -> Gate:
    """Controlled-u with the first (most significant) qubit as control."""
    if u.arity != 1:
        raise GateError(f"controlled() needs a single-qubit gate, got arity {u.arity}")
    m = np.eye(4, dtype=np.complex128)
    m[2:, 2:] = u.matrix
    return Gate(m, f"CU({u.label})", check=False)


def from_generator(h: HermitianGenerator | np.ndarray, t: float = 1.0, label: str | None = None) -> Gate:
    if not isinstance(h, HermitianGenerator):
        h = HermitianGenerator(h)
    if not math.isfinite(t):
        raise GateError("generator time must be finite")
    return Gate(h.exp(t), label or f"EXP({_fmt(t)})")


# --- embedding and application ---------------------------------------------


def _check_targets(targets, n_qubits: int, arity: int) -> tuple[int, ...]:
    tg = tuple(int(t) for t in targets)
    if len(tg) != arity:
        raise GateError(f"gate of arity {arity} given {len(tg)} targets")
    if len(set(tg)) != len(tg):
        raise GateError(f"duplicate targets {tg}")
    for t in tg:
        if not 0 <= t < n_qubits:
            raise GateError(f"target {t} out of range for {n_qubits} qubits")
    return tg


def embed_matrix(u: np.ndarray, targets, n_qubits: int) -> np.ndarray:
    """Dense 2^n matrix acting as ``u`` on ``targets`` (in order), identity elsewhere."""
    k = _arity_for(u.shape[0])
    tg = _check_targets(targets, n_qubits, k)
    if n_qubits > MAX_DENSE_QUBITS:
        raise GateError(f"dense embedding limited to {MAX_DENSE_QUBITS} qubits")
    rest = [q for q in range(n_qubits) if q not in tg]
    full = np.kron(u, np.eye(1 << len(rest))).reshape((2,) * (2 * n_qubits))
    # axes of ``full`` are ordered (tg..., rest...) for rows then columns
    order = list(tg) + rest
    perm = np.argsort(order)
    axes = list(perm) + [n_qubits + p for p in perm]
    return full.transpose(axes).reshape(1 << n_qubits, 1 << n_qubits)


def embed(u: Gate, targets, n_qubits: int) -> Gate:
    tg = _check_targets(targets, n_qubits, u.arity)
    if tg == tuple(range(n_qubits)):
        return u
    m = embed_matrix(u.matrix, tg, n_qubits)
    return Gate(m, f"{u.label}@{','.join(map(str, tg))}", check=False)


def apply_matrix(u: np.ndarray, amps: np.ndarray, targets, n_qubits: int) -> np.ndarray:
    """Apply small ``u`` to ``targets`` of an amplitude array without forming 2^n matrices.

    ``amps`` may carry leading batch axes; the last axis has length 2^n.
    """
    k = _arity_for(u.shape[0])
    tg = _check_targets(targets, n_qubits, k)
    batch = amps.shape[:-1]
    nb = len(batch)
    psi = amps.reshape(batch + (2,) * n_qubits)
    ut = u.reshape((2,) * (2 * k))
    out = np.tensordot(ut, psi, axes=(list(range(k, 2 * k)), [nb + t for t in tg]))
    # tensordot puts the k output axes first; move them back into place
    out = np.moveaxis(out, list(range(k)), [nb + t for t in tg])
    return out.reshape(amps.shape)


def apply_batched(us: np.ndarray, amps: np.ndarray, targets, n_qubits: int) -> np.ndarray:
    """Apply a different small gate per batch row: ``us`` (B, d, d), ``amps`` (B, 2^n)."""
    k = _arity_for(us.shape[-1])
    tg = _check_targets(targets, n_qubits, k)
    b = amps.shape[0]
    psi = amps.reshape((b,) + (2,) * n_qubits)
    psi = np.moveaxis(psi, [1 + t for t in tg], list(range(1, 1 + k)))
    shp = psi.shape
    psi = psi.reshape(b, 1 << k, -1)
    psi = np.einsum("bij,bjr->bir", us, psi)
    psi = np.moveaxis(psi.reshape(shp), list(range(1, 1 + k)), [1 + t for t in tg])
    return psi.reshape(amps.shape)


def apply(u: Gate, psi: StateVector, targets=None) -> StateVector:
    """U|psi>. Without ``targets`` the gate must span the whole register."""
    n = psi.n_qubits
    if targets is None:
        if u.arity != n:
            raise GateError(f"gate arity {u.arity} does not match {n}-qubit state; pass targets")
        return StateVector(u.matrix @ psi.amplitudes)
    return StateVector(apply_matrix(u.matrix, psi.amplitudes, targets, n))


def kron_all(*mats: np.ndarray) -> np.ndarray:
    return reduce(np.kron, mats)


def pauli_string(spec: str) -> np.ndarray:
    """Dense matrix of a Pauli string such as 'ZZI'."""
    try:
        return kron_all(*(PAULI_MATRICES[c] for c in spec.upper()))
    except KeyError as exc:
        raise GateError(f"invalid Pauli string {spec!r}") from exc


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# --- labels -----------------------------------------------------------------

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_NAMES = {"pi": math.pi, "e": math.e, "tau": math.tau}


def eval_param(text: str) -> float:
    """Evaluate a numeric gate parameter such as '0.5', 'pi/4' or '-3*pi/8'."""

    def ev(node):
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise GateError(f"invalid parameter expression {text!r}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise GateError(f"invalid parameter expression {text!r}") from exc
    val = ev(tree.body)
    if not math.isfinite(val):
        raise GateError(f"parameter {text!r} is not finite")
    return val


_FIXED = {
    "I": lambda: identity(1),
    "X": lambda: pauli("X"),
    "Y": lambda: pauli("Y"),
    "Z": lambda: pauli("Z"),
    "H": hadamard,
    "S": phase_s,
    "T": phase_t,
    "CNOT": cnot,
    "CX": cnot,
    "SWAP": swap,
}
_PARAMETRIC = {
    "RX": lambda t: rotation("x", t),
    "RY": lambda t: rotation("y", t),
    "RZ": lambda t: rotation("z", t),
    "P": phase,
}
PARAMETERIZED_LABELS = frozenset(_PARAMETRIC)

_LABEL_RE = re.compile(r"^\s*([A-Za-z]+)\s*(?:\((.*)\))?\s*$", re.S)


def split_label(label: str) -> tuple[str, str | None]:
    m = _LABEL_RE.match(label)
    if not m:
        raise GateError(f"malformed gate label {label!r}")
    return m.group(1).upper(), m.group(2)


def gate_from_label(label: str, scale: float = 1.0) -> Gate:
    """Build a gate from its label, e.g. 'H', 'RX(pi/2)', 'CU(RZ(0.3))'.

    ``scale`` multiplies the angle of parameterized rotations; it is how
    coherent over-rotation is attached to a circuit.
    """
    name, arg = split_label(label)
    if name == "CU":
        if not arg:
            raise GateError("CU needs an argument, e.g. CU(S)")
        return controlled(gate_from_label(arg, scale))
    if name in _FIXED:
        if arg is not None and arg.strip():
            raise GateError(f"gate {name} takes no parameter")
        return _FIXED[name]()
    if name in _PARAMETRIC:
        if arg is None or not arg.strip():
            raise GateError(f"gate {name} needs a parameter")
        return _PARAMETRIC[name](scale * eval_param(arg))
    raise GateError(f"unknown gate {name!r}")


def is_parameterized(label: str) -> bool:
    name, arg = split_label(label)
    if name == "CU" and arg:
        return is_parameterized(arg)
    return name in _PARAMETRIC


def generator_of_label(label: str) -> HermitianGenerator:
    """Hermitian generator H_U with exp(-i H_U) equal to the gate (rotations only)."""
    name, arg = split_label(label)
    if name in ("RX", "RY", "RZ"):
        return HermitianGenerator(eval_param(arg) / 2 * PAULI_MATRICES[name[1]])
    raise GateError(f"no closed-form generator for {label!r}")


__all__ = [
    "Gate",
    "GateError",
    "HermitianGenerator",
    "StateError",
    "apply",
    "apply_matrix",
    "cnot",
    "controlled",
    "embed",
    "embed_matrix",
    "from_generator",
    "gate_from_label",
    "hadamard",
    "identity",
    "pauli",
    "pauli_string",
    "phase",
    "phase_s",
    "phase_t",
    "rotation",
    "swap",
]
