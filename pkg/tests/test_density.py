from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qdesk import density as dm
from qdesk.gates import PAULI_MATRICES, Gate, hadamard, pauli, random_unitary
from qdesk.measure import outcome_probabilities, spectral
from qdesk.state import StateVector, basis_state, bell_state, minus_state, plus_state, qubit, random_state

from conftest import random_hermitian

Z = PAULI_MATRICES["Z"]
HALF_I = np.eye(2) / 2


def test_rejects_invalid_matrices():
    with pytest.raises(dm.DensityError):
        dm.DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(dm.DensityError):
        dm.DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(dm.DensityError):
        dm.DensityMatrix(np.array([[0.5, 0.5], [0, 0.5]]))


def test_ensemble_examples():
    mixed = dm.from_ensemble([basis_state(1, 0), basis_state(1, 1)], [0.5, 0.5])
    assert np.allclose(mixed.matrix, HALF_I)
    psi = random_state(2, np.random.default_rng(0))
    assert dm.purity(dm.from_ensemble([psi], [1])) == pytest.approx(1)
    caption = dm.from_ensemble([plus_state(), minus_state(), qubit(1 / math.sqrt(2), 1j / math.sqrt(2))], [0.2, 0.4, 0.4])
    assert abs(dm.purity(caption) - 0.6) < 1e-10
    with pytest.raises(dm.DensityError):
        dm.from_ensemble([basis_state(1)], [0.5])


def test_purity_examples():
    assert dm.purity(dm.from_state(basis_state(1))) == pytest.approx(1)
    assert dm.purity(dm.maximally_mixed(1)) == pytest.approx(0.5)
    assert dm.purity(dm.maximally_mixed(3)) == pytest.approx(1 / 8)


def test_apply_gate_examples(rng):
    rho0 = dm.from_state(basis_state(1))
    assert np.allclose(dm.apply_gate(pauli("X"), rho0).matrix, np.diag([0, 1]))
    assert np.allclose(dm.apply_gate(hadamard(), rho0).matrix, plus_state().density())
    u = Gate(random_unitary(2, rng))
    assert np.allclose(dm.apply_gate(u, dm.maximally_mixed(1)).matrix, HALF_I)


def test_measurement_examples():
    assert dm.measure_probabilities(Z, dm.maximally_mixed(1)) == [(1.0, 0.5), (-1.0, 0.5)]
    post = dm.collapse(Z, dm.from_state(plus_state()), 0)
    assert np.allclose(post.matrix, np.diag([1, 0]))
    with pytest.raises(dm.DensityError):
        dm.collapse(Z, dm.from_state(basis_state(1)), 1)


@given(st.integers(0, 2**32 - 1))
def test_pure_state_measurement_matches_statevector(seed):
    rng = np.random.default_rng(seed)
    obs = spectral(random_hermitian(4, rng))
    psi = random_state(2, rng)
    a = [p for _, p in outcome_probabilities(obs, psi)]
    b = [p for _, p in dm.measure_probabilities(obs, dm.from_state(psi))]
    assert np.allclose(a, b, atol=1e-10)


def test_partial_trace_examples(rng):
    ra, rb = dm.random_density(1, rng), dm.random_density(2, rng)
    assert np.allclose(dm.partial_trace(dm.tensor(ra, rb), [0]).matrix, ra.matrix)
    assert np.allclose(dm.partial_trace(dm.tensor(ra, rb), [1, 2]).matrix, rb.matrix)
    bell = dm.from_state(bell_state("phi+"))
    for keep in ([0], [1]):
        assert np.max(np.abs(dm.partial_trace(bell, keep).matrix - HALF_I)) < 1e-10
    zero = dm.from_state(basis_state(2, 0))
    assert np.allclose(dm.partial_trace(zero, [0]).matrix, np.diag([1, 0]))
    with pytest.raises(dm.DensityError):
        dm.partial_trace(zero, [0, 1])


@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_partial_trace_linear(seed, a):
    rng = np.random.default_rng(seed)
    r, s = dm.random_density(3, rng), dm.random_density(3, rng)
    mix = dm.DensityMatrix(a * r.matrix + (1 - a) * s.matrix)
    lhs = dm.partial_trace(mix, [0, 2]).matrix
    rhs = a * dm.partial_trace(r, [0, 2]).matrix + (1 - a) * dm.partial_trace(s, [0, 2]).matrix
    assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_trace_distance_examples(rng):
    r = dm.random_density(2, rng)
    assert dm.trace_distance(r, r) == pytest.approx(0, abs=1e-12)
    zero, one = dm.from_state(basis_state(1, 0)), dm.from_state(basis_state(1, 1))
    assert dm.trace_distance(zero, one) == pytest.approx(1)


@given(st.integers(0, 2**32 - 1))
def test_trace_distance_is_half_bloch_distance(seed):
    rng = np.random.default_rng(seed)
    r, s = dm.random_density(1, rng), dm.random_density(1, rng)
    d = np.linalg.norm(dm.bloch_vector(r) - dm.bloch_vector(s)) / 2
    assert abs(dm.trace_distance(r, s) - d) < 1e-10


@given(st.integers(0, 2**32 - 1))
def test_trace_distance_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (dm.random_density(2, rng) for _ in range(3))
    assert dm.trace_distance(a, c) <= dm.trace_distance(a, b) + dm.trace_distance(b, c) + 1e-9


def test_fidelity_examples(rng):
    r = dm.random_density(2, rng)
    assert dm.fidelity(r, r) == pytest.approx(1, abs=1e-8)
    zero, one = dm.from_state(basis_state(1, 0)), dm.from_state(basis_state(1, 1))
    assert dm.fidelity(zero, one) == pytest.approx(0, abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_pure_fidelity_and_distance(seed):
    rng = np.random.default_rng(seed)
    a, b = random_state(2, rng), random_state(2, rng)
    ra, rb = dm.from_state(a), dm.from_state(b)
    f = dm.fidelity(ra, rb)
    assert abs(f - abs(a.inner(b))) < 1e-7
    assert abs(dm.trace_distance(ra, rb) - math.sqrt(1 - abs(a.inner(b)) ** 2)) < 1e-9


@given(st.integers(0, 2**32 - 1))
def test_outputs_stay_valid(seed):
    rng = np.random.default_rng(seed)
    rho = dm.random_density(3, rng)
    u = random_unitary(4, rng)
    out = dm.DensityMatrix(dm.conjugate(u, rho.matrix, (2, 0), 3))  # validating constructor
    assert dm.purity(out) <= 1 + 1e-10
    assert np.allclose(np.linalg.eigvalsh(out.matrix), np.linalg.eigvalsh(rho.matrix), atol=1e-10)


def test_register_cap():
    with pytest.raises(dm.DensityError):
        dm.maximally_mixed(11)
