from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (a + a.conj().T) / 2


SINGLE = ("H", "X", "Y", "Z", "S", "T")
ROTATIONS = ("RX", "RY", "RZ", "P")


def random_circuit(n: int, depth: int, rng: np.random.Generator):
    from qdesk.circuit import Circuit, Op

    ops = []
    for _ in range(depth):
        r = rng.random()
        if n > 1 and r < 0.3:
            a, b = (int(q) for q in rng.permutation(n)[:2])
            label = ["CNOT", "SWAP", "CU(S)", f"CU(RY({rng.uniform(-3, 3)!r}))"][rng.integers(4)]
            ops.append(Op(label, (a, b)))
        elif r < 0.65:
            ops.append(Op(SINGLE[rng.integers(len(SINGLE))], (int(rng.integers(n)),)))
        else:
            ops.append(Op(f"{ROTATIONS[rng.integers(4)]}({rng.uniform(-4, 4)!r})", (int(rng.integers(n)),)))
    return Circuit(n, tuple(ops))


def random_pc(rng: np.random.Generator, max_qubits: int = 3, max_rotations: int = 6):
    """Random rotation layers (some sharing a parameter) interleaved with CNOTs."""
    from qdesk import vqa
    from qdesk.gates import cnot
    from qdesk.measure import spectral
    from qdesk.state import random_state

    n = int(rng.integers(1, max_qubits + 1))
    n_rot = int(rng.integers(1, max_rotations + 1))
    n_params = int(rng.integers(1, n_rot + 1))
    # every parameter index appears at least once
    idx = list(range(n_params)) + list(rng.integers(0, n_params, n_rot - n_params))
    rng.shuffle(idx)
    layers = []
    for j in idx:
        layers.append(vqa.rot("xyz"[rng.integers(3)], int(rng.integers(n)), int(j)))
        if n > 1 and rng.random() < 0.5:
            a, b = (int(q) for q in rng.permutation(n)[:2])
            layers.append(vqa.fixed_gate(cnot().matrix, a, b))
    obs = spectral(random_hermitian(1 << n, rng))
    return vqa.ParameterizedCircuit.from_circuit_order(n, layers, obs, random_state(n, rng))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
