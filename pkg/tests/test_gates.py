from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdesk.gates import (
    Gate,
    GateError,
    HermitianGenerator,
    PAULI_MATRICES,
    apply,
    apply_batched,
    apply_matrix,
    cnot,
    controlled,
    embed,
    embed_matrix,
    eval_param,
    from_generator,
    gate_from_label,
    hadamard,
    identity,
    pauli,
    phase_s,
    random_unitary,
    rotation,
    swap,
)
from qdesk.state import StateVector, basis_state, bell_state, minus_state, plus_state, random_state, tensor

X, Y, Z, I2 = (PAULI_MATRICES[k] for k in "XYZI")


def embed_oracle(u: np.ndarray, targets, n: int) -> np.ndarray:
    """Matrix element by matrix element from the bit layout of basis indices."""
    d = 1 << n
    m = np.zeros((d, d), dtype=complex)
    k = len(targets)
    for x in range(d):
        bits = [(x >> (n - 1 - q)) & 1 for q in range(n)]
        s = sum(bits[t] << (k - 1 - i) for i, t in enumerate(targets))
        for s2 in range(1 << k):
            out = list(bits)
            for i, t in enumerate(targets):
                out[t] = (s2 >> (k - 1 - i)) & 1
            y = sum(b << (n - 1 - q) for q, b in enumerate(out))
            m[y, x] += u[s2, s]
    return m


def test_pauli_examples():
    assert np.allclose(apply(pauli("X"), basis_state(1, 0)).amplitudes, [0, 1])
    assert np.allclose(apply(pauli("Z"), basis_state(1, 1)).amplitudes, [0, -1])
    assert np.allclose((pauli("Y") @ pauli("Y")).matrix, I2)


def test_rotation_examples():
    assert np.allclose(rotation("x", math.pi).matrix, -1j * X)
    assert np.allclose(rotation("z", 0).matrix, I2)
    out = apply(rotation("y", math.pi / 2), basis_state(1, 0))
    assert np.allclose(out.amplitudes, plus_state().amplitudes)


def test_hadamard_and_phase():
    assert np.allclose(apply(hadamard(), basis_state(1, 0)).amplitudes, plus_state().amplitudes)
    assert np.allclose(apply(hadamard(), basis_state(1, 1)).amplitudes, minus_state().amplitudes)
    assert np.allclose(apply(phase_s(), basis_state(1, 1)).amplitudes, [0, 1j])


def test_two_qubit_gates(rng):
    psi = random_state(1, rng)
    out = apply(cnot(), tensor(basis_state(1, 1), psi))
    assert np.allclose(out.amplitudes, tensor(basis_state(1, 1), StateVector(X @ psi.amplitudes)).amplitudes)
    bell = apply(cnot(), tensor(plus_state(), basis_state(1, 0)))
    assert np.allclose(bell.amplitudes, bell_state("phi+").amplitudes)
    a, b = random_state(1, rng), random_state(1, rng)
    assert np.allclose(apply(swap(), tensor(a, b)).amplitudes, tensor(b, a).amplitudes)


def test_controlled_uses_first_qubit_as_control():
    cx = controlled(pauli("X"))
    assert np.allclose(cx.matrix, cnot().matrix)
    with pytest.raises(GateError):
        controlled(cnot())


def test_from_generator_examples():
    assert np.allclose(from_generator(X, math.pi / 2).matrix, rotation("x", math.pi).matrix)
    assert np.allclose(from_generator(Z, 0).matrix, I2)
    h = hadamard().matrix
    gen = math.pi / 2 * (h - np.eye(2))
    assert np.max(np.abs(from_generator(gen, 1).matrix - h)) < 1e-9


def test_generator_rejects_non_hermitian():
    with pytest.raises(GateError):
        HermitianGenerator(np.array([[0, 1], [0, 0]]))


def test_gate_rejects_non_unitary():
    with pytest.raises(GateError):
        Gate(np.array([[1, 1], [0, 1]]))


def test_embed_examples():
    assert np.allclose(embed(pauli("X"), [1], 2).matrix, np.kron(I2, X))
    assert np.allclose(embed(cnot(), [0, 1], 2).matrix, cnot().matrix)
    m = embed(cnot(), [1, 0], 2).matrix
    e = np.eye(4)
    assert np.allclose(m @ e[1], e[3])  # |01> -> |11>
    assert np.allclose(m @ e[3], e[1])
    assert np.allclose(m @ e[0], e[0])
    assert np.allclose(m @ e[2], e[2])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_embed_matches_bit_oracle_for_all_orderings(n, rng):
    for k in range(1, min(n, 3) + 1):
        u = random_unitary(1 << k, rng)
        for targets in itertools.permutations(range(n), k):
            m = embed_matrix(u, targets, n)
            assert np.allclose(m, embed_oracle(u, targets, n), atol=1e-12)
            assert np.linalg.norm(m.conj().T @ m - np.eye(1 << n)) < 1e-10


def test_apply_examples():
    hh = hadamard().kron(hadamard())
    assert np.allclose(apply(hh, basis_state(2, 0)).amplitudes, [0.5] * 4)
    psi = basis_state(2, 3)
    assert np.allclose(apply(identity(2), psi).amplitudes, psi.amplitudes)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_apply_preserves_norm_and_matches_dense(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, min(n, 2) + 1))
    targets = list(rng.permutation(n)[:k])
    u = random_unitary(1 << k, rng)
    psi = random_state(n, rng)
    out = apply_matrix(u, psi.amplitudes, targets, n)
    assert abs(np.linalg.norm(out) - 1) < 1e-10
    assert np.allclose(out, embed_matrix(u, targets, n) @ psi.amplitudes, atol=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_series_and_parallel_composition(seed):
    rng = np.random.default_rng(seed)
    u1, u2 = Gate(random_unitary(2, rng)), Gate(random_unitary(2, rng))
    psi = random_state(1, rng)
    assert np.allclose(apply(u2, apply(u1, psi)).amplitudes, apply(u2 @ u1, psi).amplitudes, atol=1e-10)
    a, b = random_state(1, rng), random_state(1, rng)
    assert np.allclose(
        apply(u1.kron(u2), tensor(a, b)).amplitudes, tensor(apply(u1, a), apply(u2, b)).amplitudes, atol=1e-10
    )
    assert np.linalg.norm((u2 @ u1).matrix.conj().T @ (u2 @ u1).matrix - np.eye(2)) < 1e-10


def test_apply_batched_matches_loop(rng):
    n, b = 3, 5
    us = np.stack([random_unitary(4, rng) for _ in range(b)])
    amps = np.stack([random_state(n, rng).amplitudes for _ in range(b)])
    out = apply_batched(us, amps, (2, 0), n)
    for i in range(b):
        assert np.allclose(out[i], apply_matrix(us[i], amps[i], (2, 0), n))


def test_target_validation():
    with pytest.raises(GateError):
        apply_matrix(cnot().matrix, basis_state(2).amplitudes, (0, 0), 2)
    with pytest.raises(GateError):
        apply_matrix(X, basis_state(2).amplitudes, (2,), 2)
    with pytest.raises(GateError):
        apply(cnot(), basis_state(1))


def test_labels():
    assert np.allclose(gate_from_label("RX(pi)").matrix, -1j * X)
    assert np.allclose(gate_from_label("CU(S)").matrix, np.diag([1, 1, 1, 1j]))
    assert np.allclose(gate_from_label("RY(pi/2)", scale=1.25).matrix, rotation("y", 1.25 * math.pi / 2).matrix)
    assert eval_param("2*pi/8") == pytest.approx(math.pi / 4)
    for bad in ("FOO", "H(1)", "RX", "RX(__import__('os'))"):
        with pytest.raises(GateError):
            gate_from_label(bad)
