"""Variational algorithms: parameterized circuits, parameter-shift gradients, gradient descent,
and the VQE / QAOA / QML instantiations.

A :class:`ParameterizedCircuit` stores its layers in *product order*:
``U(theta) = U_1(theta_1) U_2(theta_2) ... U_N(theta_N)``, so the last layer
acts on the input state first. Use :meth:`ParameterizedCircuit.from_circuit_order`
to build one from a left-to-right gate list instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .gates import (
    PAULI_MATRICES,
    GateError,
    HermitianGenerator,
    apply_batched,
    apply_matrix,
    cnot,
    kron_all,
)
from .measure import Observable, estimate_from_probabilities, spectral
from .state import StateVector, basis_state, tensor, plus_state

SPECTRUM_TOL = 1e-8


class VQAError(ValueError):
    pass


# --- circuit description --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Layer:
    """One factor exp(-i angle H) on ``targets``, or a fixed unitary.

    ``slot`` is 'trainable' (angle = theta[index]), 'data' (angle = x[index])
    or 'fixed' (angle = value, or ``unitary`` applied as is).
    """

    targets: tuple[int, ...]
    slot: str = "trainable"
    index: int = 0
    generator: HermitianGenerator | None = None
    value: float = 0.0
    unitary: np.ndarray | None = None

    def __post_init__(self):
        if self.slot not in ("trainable", "data", "fixed"):
            raise VQAError(f"unknown slot kind {self.slot!r}")
        if self.generator is None and self.unitary is None:
            raise VQAError("a layer needs a generator or a fixed unitary")
        if self.unitary is not None and self.slot != "fixed":
            raise VQAError("only fixed layers may carry a plain unitary")
        dim = (self.generator.matrix if self.generator is not None else self.unitary).shape[0]
        if dim != 1 << len(self.targets):
            raise VQAError(f"layer matrix of size {dim} does not fit targets {self.targets}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))

    def shift_rule(self) -> tuple[float, float]:
        """(r, s): derivative = r [f(angle + s) - f(angle - s)] with s = pi / (4 r)."""
        if self.generator is None:
            raise VQAError("fixed unitaries have no shift rule")
        w = self.generator.eigenvalues
        lo, hi = w.min(), w.max()
        inner = w[(w > lo + SPECTRUM_TOL) & (w < hi - SPECTRUM_TOL)]
        if hi - lo <= SPECTRUM_TOL or inner.size:
            raise VQAError("parameter-shift rule needs a generator with exactly two distinct eigenvalues")
        r = (hi - lo) / 2
        return float(r), float(math.pi / (4 * r))


def _pauli_gen(axis: str) -> HermitianGenerator:
    return HermitianGenerator(PAULI_MATRICES[axis.upper()] / 2)


def rot(axis: str, qubit: int, index: int, slot: str = "trainable") -> Layer:
    """R_axis(angle) = exp(-i angle P / 2) on one qubit."""
    return Layer((qubit,), slot, index, _pauli_gen(axis))


def fixed_rot(axis: str, qubit: int, angle: float) -> Layer:
    return Layer((qubit,), "fixed", 0, _pauli_gen(axis), value=angle)


def fixed_gate(matrix: np.ndarray, *targets: int) -> Layer:
    return Layer(tuple(targets), "fixed", 0, unitary=np.asarray(matrix, dtype=np.complex128))


def generator_layer(h, targets: Sequence[int], index: int, slot: str = "trainable") -> Layer:
    g = h if isinstance(h, HermitianGenerator) else HermitianGenerator(h)
    return Layer(tuple(targets), slot, index, g)


@dataclass(frozen=True, eq=False)
class ParameterizedCircuit:
    n_qubits: int
    layers: tuple[Layer, ...]
    observable: Observable
    psi0: StateVector | None = None
    n_params: int = field(init=False)
    n_data: int = field(init=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        obs = self.observable if isinstance(self.observable, Observable) else spectral(self.observable)
        object.__setattr__(self, "observable", obs)
        d = 1 << self.n_qubits
        if obs.dim != d:
            raise VQAError("observable dimension does not match the register")
        psi0 = self.psi0 or basis_state(self.n_qubits, 0)
        if psi0.dim != d:
            raise VQAError("initial state dimension does not match the register")
        object.__setattr__(self, "psi0", psi0)
        for lay in layers:
            for t in lay.targets:
                if not 0 <= t < self.n_qubits:
                    raise VQAError(f"layer target {t} out of range")
        for kind, attr in (("trainable", "n_params"), ("data", "n_data")):
            idx = sorted({lay.index for lay in layers if lay.slot == kind})
            if idx != list(range(len(idx))):
                raise VQAError(f"{kind} indices must be contiguous from 0, got {idx}")
            object.__setattr__(self, attr, len(idx))

    @classmethod
    def from_circuit_order(cls, n_qubits: int, layers: Sequence[Layer], observable, psi0=None):
        """Layers listed in the order they act on the state."""
        return cls(n_qubits, tuple(reversed(list(layers))), observable, psi0)

    # --- evaluation engine ---

    def _angle_vector(self, theta, x) -> np.ndarray:
        theta = np.asarray(theta, dtype=float).reshape(-1)
        if theta.size != self.n_params:
            raise VQAError(f"expected {self.n_params} trainable parameters, got {theta.size}")
        if self.n_data:
            if x is None:
                raise VQAError(f"circuit has {self.n_data} data slots but no x was given")
            x = np.asarray(x, dtype=float).reshape(-1)
            if x.size != self.n_data:
                raise VQAError(f"expected data vector of length {self.n_data}, got {x.size}")
        out = np.empty(len(self.layers))
        for i, lay in enumerate(self.layers):
            if lay.slot == "trainable":
                out[i] = theta[lay.index]
            elif lay.slot == "data":
                out[i] = x[lay.index]
            else:
                out[i] = lay.value
        return out

    def states(self, angles: np.ndarray) -> np.ndarray:
        """Output amplitudes for each row of per-layer angles, shape (B, 2^n)."""
        angles = np.atleast_2d(angles)
        b = angles.shape[0]
        amps = np.broadcast_to(self.psi0.amplitudes, (b, self.psi0.dim)).copy()
        for i in range(len(self.layers) - 1, -1, -1):
            lay = self.layers[i]
            if lay.unitary is not None:
                amps = apply_matrix(lay.unitary, amps, lay.targets, self.n_qubits)
                continue
            g = lay.generator
            col = angles[:, i]
            if np.all(col == col[0]):
                u = g.exp(col[0])
                amps = apply_matrix(u, amps, lay.targets, self.n_qubits)
            else:
                v = g.eigenvectors
                phases = np.exp(-1j * np.outer(col, g.eigenvalues))
                us = np.einsum("ij,bj,kj->bik", v, phases, v.conj())
                amps = apply_batched(us, amps, lay.targets, self.n_qubits)
        return amps

    def expectations(self, angles: np.ndarray) -> np.ndarray:
        amps = self.states(angles)
        return np.einsum("bi,ij,bj->b", amps.conj(), self.observable.matrix, amps).real

    def outcome_probabilities(self, angles: np.ndarray) -> np.ndarray:
        amps = self.states(angles)
        probs = np.stack(
            [np.einsum("bi,ij,bj->b", amps.conj(), p, amps).real for p in self.observable.projectors], axis=1
        )
        return np.clip(probs, 0.0, None)

    def state(self, theta, x=None) -> StateVector:
        return StateVector(self.states(self._angle_vector(theta, x))[0])


@dataclass
class Mode:
    """Exact expectation (``shots`` is None) or a shot-based estimate."""

    shots: int | None = None
    rng: np.random.Generator | None = None

    @classmethod
    def exact(cls) -> Mode:
        return cls()

    @classmethod
    def sampled(cls, shots: int, rng: np.random.Generator) -> Mode:
        if shots < 1:
            raise VQAError("shots must be positive")
        return cls(shots, rng)

    @property
    def is_exact(self) -> bool:
        return self.shots is None


def _batch_costs(pc: ParameterizedCircuit, angles: np.ndarray, mode: Mode) -> np.ndarray:
    if mode.is_exact:
        return pc.expectations(angles)
    probs = pc.outcome_probabilities(angles)
    rng = mode.rng if mode.rng is not None else np.random.default_rng()
    ev = pc.observable.eigenvalues
    return np.array([estimate_from_probabilities(ev, p, mode.shots, rng)[0] for p in probs])


def evaluate_cost(pc: ParameterizedCircuit, theta, x=None, mode: Mode | None = None) -> float:
    """f(theta) = <psi0| U^dag M U |psi0>, exactly or from ``mode.shots`` samples."""
    mode = mode or Mode.exact()
    return float(_batch_costs(pc, pc._angle_vector(theta, x)[None, :], mode)[0])


def _shift_plan(pc: ParameterizedCircuit):
    cached = pc.__dict__.get("_plan")
    if cached is not None:
        return cached
    plan = []
    for i, lay in enumerate(pc.layers):
        if lay.slot != "trainable":
            continue
        try:
            r, s = lay.shift_rule()
        except VQAError as exc:
            raise VQAError(f"layer {i}: {exc}") from None
        plan.append((i, lay.index, r, s))
    object.__setattr__(pc, "_plan", plan)
    return plan


def shifted_angles(pc: ParameterizedCircuit, theta, x=None) -> tuple[np.ndarray, list]:
    """Angle rows [+s, -s] for every trainable layer occurrence."""
    base = pc._angle_vector(theta, x)
    plan = _shift_plan(pc)
    rows = np.repeat(base[None, :], 2 * len(plan), axis=0)
    for k, (i, _, _, s) in enumerate(plan):
        rows[2 * k, i] += s
        rows[2 * k + 1, i] -= s
    return rows, plan


def parameter_shift_gradient(pc: ParameterizedCircuit, theta, x=None, mode: Mode | None = None) -> np.ndarray:
    """Exact gradient from shifted cost evaluations.

    For a layer whose generator has eigenvalues {a, b}, r = |b - a| / 2 and
    d f / d angle = r [f(angle + pi/(4r)) - f(angle - pi/(4r))]. Parameters
    shared by several layers accumulate the contribution of each.
    """
    mode = mode or Mode.exact()
    grad = np.zeros(pc.n_params)
    rows, plan = shifted_angles(pc, theta, x)
    if not plan:
        return grad
    vals = _batch_costs(pc, rows, mode)
    for k, (_, j, r, _) in enumerate(plan):
        grad[j] += r * (vals[2 * k] - vals[2 * k + 1])
    return grad


def finite_difference_gradient(f: Callable[[np.ndarray], float], theta, h: float = 1e-5) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    g = np.zeros_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        g[j] = (f(theta + e) - f(theta - e)) / (2 * h)
    return g


# --- optimization -----------------------------------------------------------------


class CostEvaluator(Protocol):
    """What the optimizer sees: parameters in, cost values and gradients out."""

    n_params: int
    stochastic: bool

    def cost(self, theta: np.ndarray) -> float: ...

    def gradient(self, theta: np.ndarray) -> np.ndarray: ...


@dataclass
class CircuitCost:
    pc: ParameterizedCircuit
    x: np.ndarray | None = None
    mode: Mode = field(default_factory=Mode.exact)

    @property
    def n_params(self) -> int:
        return self.pc.n_params

    @property
    def stochastic(self) -> bool:
        return not self.mode.is_exact

    def cost(self, theta) -> float:
        return evaluate_cost(self.pc, theta, self.x, self.mode)

    def gradient(self, theta) -> np.ndarray:
        return parameter_shift_gradient(self.pc, theta, self.x, self.mode)


@dataclass
class OptimizerState:
    theta: np.ndarray
    gamma: float
    k: int = 0
    history: list[tuple[list[float], float]] = field(default_factory=list)
    grad_norms: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def cost(self) -> float:
        return self.history[-1][1]

    def best(self) -> tuple[np.ndarray, float]:
        th, f = min(self.history, key=lambda h: h[1])
        return np.array(th), f

    def to_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "gamma": self.gamma,
            "iterations": self.k,
            "converged": self.converged,
            "theta_history": [h[0] for h in self.history],
            "cost_history": [h[1] for h in self.history],
            "grad_norms": self.grad_norms,
        }


def gradient_descent(
    evaluator: CostEvaluator | ParameterizedCircuit,
    theta0,
    gamma: float = 0.1,
    max_iters: int = 1000,
    tol: float = 1e-6,
    mode: Mode | None = None,
    *,
    backtrack: bool = True,
    min_gamma: float = 1e-8,
) -> OptimizerState:
    """theta_{k+1} = theta_k - gamma grad f(theta_k).

    Stops once ||grad f|| < tol or after ``max_iters`` steps. For exact
    evaluators a step that raises the cost is retried with gamma halved.
    """
    if gamma <= 0:
        raise VQAError("step size must be positive")
    if isinstance(evaluator, ParameterizedCircuit):
        evaluator = CircuitCost(evaluator, mode=mode or Mode.exact())
    theta = np.array(theta0, dtype=float).reshape(-1)
    if theta.size != evaluator.n_params:
        raise VQAError(f"theta0 has {theta.size} entries, expected {evaluator.n_params}")
    f = evaluator.cost(theta)
    if not math.isfinite(f):
        raise VQAError("non-finite cost encountered")
    state = OptimizerState(theta.copy(), gamma, 0, [(theta.tolist(), f)])
    for _ in range(max_iters):
        g = evaluator.gradient(theta)
        gn = float(np.linalg.norm(g))
        state.grad_norms.append(gn)
        if not math.isfinite(gn):
            raise VQAError("non-finite gradient encountered")
        if gn < tol:
            state.converged = True
            break
        while True:
            cand = theta - gamma * g
            fc = evaluator.cost(cand)
            if not math.isfinite(fc):
                raise VQAError("non-finite cost encountered")
            if backtrack and not evaluator.stochastic and fc > f and gamma > min_gamma:
                gamma /= 2
                continue
            break
        theta, f = cand, fc
        state.k += 1
        state.history.append((theta.tolist(), f))
    state.theta, state.gamma = theta, gamma
    return state


@dataclass
class OptimizerConfig:
    gamma: float = 0.1
    max_iters: int = 1000
    tol: float = 1e-6
    restarts: int = 5

    @classmethod
    def from_dict(cls, d: dict | None) -> OptimizerConfig:
        d = d or {}
        unknown = set(d) - {"gamma", "max_iters", "tol", "restarts"}
        if unknown:
            raise VQAError(f"unknown optimizer keys {sorted(unknown)}")
        return cls(**d)


def multistart(
    make_evaluator: Callable[[], CostEvaluator],
    n_params: int,
    config: OptimizerConfig,
    rng: np.random.Generator,
    theta0s: Sequence[np.ndarray] | None = None,
) -> list[OptimizerState]:
    """Gradient descent from ``restarts`` uniform starting points in [0, 2 pi)^N."""
    starts = list(theta0s) if theta0s is not None else [
        rng.uniform(0, 2 * np.pi, n_params) for _ in range(config.restarts)
    ]
    return [
        gradient_descent(make_evaluator(), t0, config.gamma, config.max_iters, config.tol) for t0 in starts
    ]


# --- VQE ---------------------------------------------------------------------------


def hardware_efficient_ansatz(n_qubits: int, n_layers: int, observable, psi0: StateVector | None = None):
    """Layers of RY and RZ on every qubit followed by a CNOT chain, then a final rotation layer."""
    seq: list[Layer] = []
    j = 0

    def rotations():
        nonlocal j
        for axis in "yz":
            for q in range(n_qubits):
                seq.append(rot(axis, q, j))
                j += 1

    for _ in range(n_layers):
        rotations()
        for q in range(n_qubits - 1):
            seq.append(fixed_gate(cnot().matrix, q, q + 1))
    rotations()
    return ParameterizedCircuit.from_circuit_order(n_qubits, seq, observable, psi0)


@dataclass
class VQEResult:
    energy: float
    theta: np.ndarray
    history: OptimizerState
    run_energies: list[float]
    exact_ground_energy: float

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "theta": self.theta.tolist(),
            "run_energies": self.run_energies,
            "exact_ground_energy": self.exact_ground_energy,
            "history": self.history.to_dict(),
        }


def vqe(
    h,
    pc: ParameterizedCircuit,
    config: OptimizerConfig | None = None,
    rng: np.random.Generator | None = None,
    mode: Mode | None = None,
    theta0s: Sequence[np.ndarray] | None = None,
) -> VQEResult:
    """Minimize <psi(theta)|H|psi(theta)> over the ansatz; returns the best run."""
    config = config or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng()
    mode = mode or Mode.exact()
    hm = h.matrix if isinstance(h, Observable) else np.asarray(h, dtype=np.complex128)
    if hm.shape != pc.observable.matrix.shape or not np.allclose(hm, pc.observable.matrix, atol=1e-10):
        raise VQAError("the ansatz must measure the Hamiltonian being minimized")
    runs = multistart(lambda: CircuitCost(pc, mode=mode), pc.n_params, config, rng, theta0s)
    # in shots mode the sampled history is noisy, so re-score each run's final point exactly
    scored = []
    for st in runs:
        th, f = st.best() if mode.is_exact else (st.theta, evaluate_cost(pc, st.theta))
        scored.append((f, th, st))
    f, th, st = min(scored, key=lambda t: t[0])
    lam_min = float(np.linalg.eigvalsh(hm)[0])
    return VQEResult(float(f), th, st, [s[0] for s in scored], lam_min)


# --- QAOA ---------------------------------------------------------------------------


@dataclass
class CostHamiltonianSpec:
    """Cost Q over bit strings of length n; bit i is qubit i (qubit 0 most significant)."""

    n: int
    q: Callable[[tuple[int, ...]], float] | None = None
    table: Sequence[float] | None = None

    def values(self) -> np.ndarray:
        if self.n > 12:
            raise VQAError("cost tables are materialized only up to 12 bits")
        if self.table is not None:
            vals = np.asarray(self.table, dtype=float)
            if vals.size != 1 << self.n:
                raise VQAError("cost table must have 2^n entries")
            return vals
        if self.q is None:
            raise VQAError("need a cost function or a table")
        return np.array([float(self.q(bits(x, self.n))) for x in range(1 << self.n)])


def bits(x: int, n: int) -> tuple[int, ...]:
    return tuple((x >> (n - 1 - i)) & 1 for i in range(n))


def maxcut(n: int, edges: Sequence[tuple[int, int]]) -> CostHamiltonianSpec:
    """Q(x) = -(number of cut edges), so the minimum is the maximum cut."""
    edges = [tuple(e) for e in edges]
    for a, b in edges:
        if not (0 <= a < n and 0 <= b < n) or a == b:
            raise VQAError(f"invalid edge {(a, b)}")

    def q(x):
        return -float(sum(x[a] != x[b] for a, b in edges))

    return CostHamiltonianSpec(n, q)


def build_cost_hamiltonian(spec: CostHamiltonianSpec) -> Observable:
    """Diagonal C with C|x> = Q(x)|x>."""
    return spectral(np.diag(spec.values()).astype(np.complex128), name="C")


def walsh_terms(values: np.ndarray, n: int, tol: float = 1e-12) -> list[tuple[tuple[int, ...], float]]:
    """Coefficients c_S with Q(x) = sum_S c_S prod_{i in S} (-1)^{x_i}."""
    out = []
    xs = np.arange(1 << n)
    for mask in range(1 << n):
        qubits = tuple(i for i in range(n) if mask >> (n - 1 - i) & 1)
        sign = (-1.0) ** np.array([bin(x & mask).count("1") for x in xs])
        c = float(np.dot(sign, values) / (1 << n))
        if abs(c) > tol:
            out.append((qubits, c))
    return out


def qaoa_ansatz(spec: CostHamiltonianSpec, p: int) -> ParameterizedCircuit:
    """U(theta) = exp(-i b1 B) exp(-i g1 C) ... exp(-i bp B) exp(-i gp C) on |+>^n.

    theta = (b1, g1, ..., bp, gp). B = sum_j X_j splits into commuting single-qubit
    factors and C into commuting Z-string factors, so every factor is two-valued.
    """
    if p < 1:
        raise VQAError("p must be at least 1")
    n = spec.n
    vals = spec.values()
    terms = [(s, c) for s, c in walsh_terms(vals, n) if s]
    layers: list[Layer] = []
    for j in range(p):
        for q in range(n):
            layers.append(generator_layer(PAULI_MATRICES["X"], (q,), 2 * j))
        for qubits, c in terms:
            zs = kron_all(*([PAULI_MATRICES["Z"]] * len(qubits)))
            layers.append(generator_layer(c * zs, qubits, 2 * j + 1))
    psi0 = tensor(*([plus_state()] * n))
    return ParameterizedCircuit(n, tuple(layers), build_cost_hamiltonian(spec), psi0)


@dataclass
class QAOAResult:
    best_bitstring: str
    best_q: float
    theta: np.ndarray
    expectation: float
    counts: dict[str, int]
    history: OptimizerState
    run_expectations: list[float]

    def to_dict(self) -> dict:
        return {
            "best_bitstring": self.best_bitstring,
            "best_Q": self.best_q,
            "theta": self.theta.tolist(),
            "expectation": self.expectation,
            "counts": self.counts,
            "run_expectations": self.run_expectations,
            "history": self.history.to_dict(),
        }


def qaoa(
    spec: CostHamiltonianSpec,
    p: int,
    config: OptimizerConfig | None = None,
    rng: np.random.Generator | None = None,
    samples: int = 1024,
    mode: Mode | None = None,
) -> QAOAResult:
    config = config or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng()
    mode = mode or Mode.exact()
    pc = qaoa_ansatz(spec, p)
    runs = multistart(lambda: CircuitCost(pc, mode=mode), pc.n_params, config, rng)
    scored = []
    for st in runs:
        th = st.best()[0] if mode.is_exact else st.theta
        scored.append((evaluate_cost(pc, th), th, st))
    f, th, st = min(scored, key=lambda t: t[0])
    probs = pc.state(th).probabilities()
    idx = rng.choice(len(probs), size=samples, p=probs / probs.sum())
    vals = spec.values()
    best = int(idx[np.argmin(vals[idx])])
    counts = np.bincount(idx, minlength=len(probs))
    hist = {format(i, f"0{spec.n}b"): int(k) for i, k in enumerate(counts) if k}
    return QAOAResult(format(best, f"0{spec.n}b"), float(vals[best]), th, float(f), hist, st, [s[0] for s in scored])


# --- QML ----------------------------------------------------------------------------


def predict(pc: ParameterizedCircuit, theta, xs) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    rows = np.stack([pc._angle_vector(theta, x) for x in xs])
    return pc.expectations(rows)


@dataclass
class SquaredLoss:
    """sum_i (f(x_i, theta) - y_i)^2 with parameter-shift gradients per sample."""

    pc: ParameterizedCircuit
    xs: np.ndarray
    ys: np.ndarray
    mode: Mode = field(default_factory=Mode.exact)

    def __post_init__(self):
        self.xs = np.atleast_2d(np.asarray(self.xs, dtype=float))
        self.ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if len(self.xs) != len(self.ys) or not len(self.ys):
            raise VQAError("dataset must be nonempty with one target per input")
        if self.xs.shape[1] != self.pc.n_data:
            raise VQAError(f"inputs have {self.xs.shape[1]} features, circuit expects {self.pc.n_data}")

    @property
    def n_params(self) -> int:
        return self.pc.n_params

    @property
    def stochastic(self) -> bool:
        return not self.mode.is_exact

    def predictions(self, theta) -> np.ndarray:
        rows = np.stack([self.pc._angle_vector(theta, x) for x in self.xs])
        return _batch_costs(self.pc, rows, self.mode)

    def cost(self, theta) -> float:
        return float(np.sum((self.predictions(theta) - self.ys) ** 2))

    def gradient(self, theta) -> np.ndarray:
        resid = self.predictions(theta) - self.ys
        grad = np.zeros(self.pc.n_params)
        # all shift points of all samples go through the engine as one batch
        blocks = [shifted_angles(self.pc, theta, x) for x in self.xs]
        plan = blocks[0][1]
        if not plan:
            return grad
        vals = _batch_costs(self.pc, np.concatenate([b[0] for b in blocks]), self.mode).reshape(len(self.xs), -1)
        # samples are reduced in dataset order
        for e, v in zip(resid, vals):
            for k, (_, j, r, _) in enumerate(plan):
                grad[j] += 2 * e * r * (v[2 * k] - v[2 * k + 1])
        return grad


@dataclass
class QMLResult:
    theta: np.ndarray
    losses: list[float]
    history: OptimizerState

    def to_dict(self) -> dict:
        return {"theta": self.theta.tolist(), "losses": self.losses, "history": self.history.to_dict()}


def qml_fit(
    pc: ParameterizedCircuit,
    xs,
    ys,
    config: OptimizerConfig | None = None,
    rng: np.random.Generator | None = None,
    theta0=None,
    mode: Mode | None = None,
) -> QMLResult:
    """Minimize sum_i ||f(x_i, theta) - y_i||^2 by gradient descent (best of ``restarts``)."""
    config = config or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng()
    if pc.n_data == 0:
        raise VQAError("QML circuit needs data slots")
    loss = SquaredLoss(pc, xs, ys, mode or Mode.exact())
    starts = [np.asarray(theta0, dtype=float)] if theta0 is not None else None
    runs = multistart(lambda: loss, pc.n_params, config if starts is None else OptimizerConfig(
        config.gamma, config.max_iters, config.tol, 1), rng, starts)
    best = min(runs, key=lambda st: st.cost)
    return QMLResult(best.theta, [h[1] for h in best.history], best)


def pauli_observable_on(pauli: str, qubit: int, n_qubits: int) -> Observable:
    ops = [PAULI_MATRICES["I"]] * n_qubits
    ops[qubit] = PAULI_MATRICES[pauli.upper()]
    return spectral(kron_all(*ops), name=f"{pauli.upper()}{qubit}")


__all__ = [
    "CircuitCost",
    "CostHamiltonianSpec",
    "GateError",
    "Layer",
    "Mode",
    "OptimizerConfig",
    "OptimizerState",
    "ParameterizedCircuit",
    "build_cost_hamiltonian",
    "evaluate_cost",
    "gradient_descent",
    "hardware_efficient_ansatz",
    "maxcut",
    "parameter_shift_gradient",
    "qaoa",
    "qaoa_ansatz",
    "qml_fit",
    "vqe",
]
