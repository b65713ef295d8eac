import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkge.statevector import (
    Circuit,
    Gate,
    GateKind,
    Statevector,
    anti_controlled,
    apply_gate,
    circuit_unitary,
    cnot,
    controlled,
    cswap,
    h,
    inner_product,
    marginal_probability,
    probability_of,
    run_circuit,
    rx,
    ry,
    rz,
    sample,
    swap,
    x,
)

# Independent dense oracle: every gate as a full 2^n x 2^n matrix built from
# Kronecker products and projectors, qubit 0 = least-significant bit.
I2 = np.eye(2)
P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])
MATS = {
    GateKind.H: np.array([[1, 1], [1, -1]]) / np.sqrt(2),
    GateKind.X: np.array([[0, 1], [1, 0]]),
}


def rot(kind, theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return {
        GateKind.RX: np.array([[c, -1j * s], [-1j * s, c]]),
        GateKind.RY: np.array([[c, -s], [s, c]]),
        GateKind.RZ: np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)]),
    }[kind]


def embed(ops: dict, n: int) -> np.ndarray:
    """Kronecker product with ``ops[q]`` on qubit q, identity elsewhere."""
    out = np.array([[1.0]])
    for q in reversed(range(n)):
        out = np.kron(out, ops.get(q, I2))
    return out


def dense(gate: Gate, n: int) -> np.ndarray:
    kind = gate.kind
    if kind in (GateKind.H, GateKind.X):
        return embed({gate.targets[0]: MATS[kind]}, n)
    if kind in (GateKind.RX, GateKind.RY, GateKind.RZ):
        return embed({gate.targets[0]: rot(kind, gate.angle)}, n)
    if kind is GateKind.CNOT:
        (c,), (t,) = gate.controls, gate.targets
        return embed({c: P0}, n) + embed({c: P1, t: MATS[GateKind.X]}, n)
    if kind is GateKind.SWAP:
        a, b = gate.targets
        return _swap_matrix(a, b, n)
    if kind is GateKind.CSWAP:
        (c,), (a, b) = gate.controls, gate.targets
        return embed({c: P0}, n) + embed({c: P1}, n) @ _swap_matrix(a, b, n)
    body = np.eye(2**n)
    for inner in gate.body.gates:
        body = dense(inner, n) @ body
    on, off = (P1, P0) if kind is GateKind.CU else (P0, P1)
    c = gate.controls[0]
    return embed({c: on}, n) @ body + embed({c: off}, n)


def _swap_matrix(a, b, n):
    dim = 2**n
    m = np.zeros((dim, dim))
    for i in range(dim):
        ba, bb = (i >> a) & 1, (i >> b) & 1
        j = i & ~(1 << a) & ~(1 << b) | (bb << a) | (ba << b)
        m[j, i] = 1
    return m


def random_state(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return Statevector(n, v / np.linalg.norm(v))


def random_gate(rng, n, depth=0):
    kinds = [GateKind.H, GateKind.X, GateKind.RX, GateKind.RY, GateKind.RZ]
    if n >= 2:
        kinds += [GateKind.CNOT, GateKind.SWAP]
    if n >= 3 and depth == 0:
        kinds += [GateKind.CSWAP, GateKind.CU, GateKind.ANTI_CU]
    kind = kinds[rng.integers(len(kinds))]
    qubits = [int(q) for q in rng.permutation(n)]
    if kind in (GateKind.H, GateKind.X):
        return Gate(kind, (qubits[0],))
    if kind in (GateKind.RX, GateKind.RY, GateKind.RZ):
        return Gate(kind, (qubits[0],), angle=float(rng.uniform(-np.pi, np.pi)))
    if kind is GateKind.CNOT:
        return cnot(qubits[0], qubits[1])
    if kind is GateKind.SWAP:
        return swap(qubits[0], qubits[1])
    if kind is GateKind.CSWAP:
        return cswap(qubits[0], qubits[1], qubits[2])
    control = qubits[0]
    body = []
    for _ in range(3):
        g = random_gate(rng, n, depth + 1)
        while control in g.qubits:
            g = random_gate(rng, n, depth + 1)
        body.append(g)
    make = controlled if kind is GateKind.CU else anti_controlled
    return make(Circuit(n, body), control)


def random_circuit(rng, n, length=8):
    return Circuit(n, [random_gate(rng, n) for _ in range(length)])


class TestApplyGate:
    def test_hadamard_on_zero(self):
        out = apply_gate(Statevector.zero(1), h(0))
        np.testing.assert_allclose(out.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)

    def test_cnot_truth_table(self):
        # |10>: qubit 1 set; CNOT(control=1, target=0) gives |11>
        out = apply_gate(Statevector.basis("10"), cnot(1, 0))
        assert probability_of(out, "11") == pytest.approx(1.0)

    def test_rz_on_basis_only_changes_phase(self):
        out = apply_gate(Statevector.zero(1), rz(1.234, 0))
        np.testing.assert_allclose(out.probabilities(), [1.0, 0.0], atol=1e-15)
        assert abs(out.amplitudes[0]) == pytest.approx(1.0)
        assert out.amplitudes[0] != 1.0

    def test_index_out_of_range(self):
        with pytest.raises(IndexError):
            apply_gate(Statevector.zero(2), h(2))

    def test_rotation_needs_angle(self):
        with pytest.raises(ValueError, match="angle"):
            Gate(GateKind.RY, (0,))
        with pytest.raises(ValueError, match="no angle"):
            Gate(GateKind.H, (0,), angle=0.1)

    def test_overlapping_control_and_target(self):
        with pytest.raises(ValueError):
            cnot(1, 1)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_dense_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        state = random_state(rng, n)
        gate = random_gate(rng, n)
        expected = dense(gate, n) @ state.amplitudes
        np.testing.assert_allclose(apply_gate(state, gate).amplitudes, expected, atol=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_unitarity_every_kind(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = 3
        state = random_state(rng, n)
        gate = random_gate(rng, n)
        back = apply_gate(apply_gate(state, gate), gate.adjoint())
        np.testing.assert_allclose(back.amplitudes, state.amplitudes, atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4))
def test_norm_preserved(seed, n):
    rng = np.random.default_rng(seed)
    out = apply_gate(random_state(rng, n), random_gate(rng, n))
    assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-10


class TestControlledSubcircuit:
    @pytest.mark.parametrize("seed", range(5))
    def test_cu_acts_as_body_when_control_set(self, seed):
        rng = np.random.default_rng(seed)
        body = Circuit(3, [ry(0.7, 0), cnot(0, 1), rz(-1.1, 1), h(0)])
        gate = controlled(body, 2)
        sub = random_state(rng, 2)
        for ctrl, expect_body in ((1, True), (0, False)):
            ctrl_vec = np.array([1 - ctrl, ctrl], dtype=complex)
            full = Statevector(3, np.kron(ctrl_vec, sub.amplitudes))
            out = apply_gate(full, gate)
            if expect_body:
                inner = run_circuit(Circuit(2, body.gates), initial=sub).amplitudes
            else:
                inner = sub.amplitudes
            np.testing.assert_allclose(out.amplitudes, np.kron(ctrl_vec, inner), atol=1e-12)

    def test_anti_control_is_mirror(self):
        body = Circuit(2, [x(0)])
        gate = anti_controlled(body, 1)
        assert probability_of(apply_gate(Statevector.basis("00"), gate), "01") == pytest.approx(1)
        assert probability_of(apply_gate(Statevector.basis("10"), gate), "10") == pytest.approx(1)

    def test_body_touching_control_rejected(self):
        with pytest.raises(ValueError):
            Circuit(2, [controlled(Circuit(2, [x(0), x(1)]), 1)])


class TestRunCircuit:
    def test_empty(self):
        out = run_circuit(Circuit(2))
        np.testing.assert_array_equal(out.amplitudes, [1, 0, 0, 0])

    def test_uniform(self):
        out = run_circuit(Circuit(2, [h(0), h(1)]))
        np.testing.assert_allclose(out.amplitudes, [0.5] * 4, atol=1e-15)

    @pytest.mark.parametrize("seed", range(10))
    def test_circuit_then_adjoint_is_identity(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        circ = random_circuit(rng, n)
        oracle = np.eye(2**n)
        for gate in circ.gates:
            oracle = dense(gate, n) @ oracle
        # the dense product of C and its adjoint is the identity
        np.testing.assert_allclose(oracle.conj().T @ oracle, np.eye(2**n), atol=1e-10)
        np.testing.assert_allclose(circuit_unitary(circ), oracle, atol=1e-10)
        out = run_circuit(circ + circ.adjoint())
        np.testing.assert_allclose(out.amplitudes, Statevector.zero(n).amplitudes, atol=1e-10)

    def test_depth(self):
        circ = Circuit(3, [h(0), h(1), cnot(0, 1), cnot(1, 2), h(0)])
        assert circ.depth() == 3
        assert Circuit(2).depth() == 0


class TestProbabilities:
    def test_basis(self):
        assert probability_of(Statevector.zero(2), "00") == 1.0

    def test_uniform(self):
        state = run_circuit(Circuit(2, [h(0), h(1)]))
        assert probability_of(state, "00") == pytest.approx(0.25)

    def test_completeness(self):
        state = random_state(np.random.default_rng(1), 3)
        total = sum(probability_of(state, format(i, "03b")) for i in range(8))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            probability_of(Statevector.zero(2), "0")

    def test_marginals(self):
        plus = run_circuit(Circuit(1, [h(0)]))
        assert marginal_probability(plus, 0, 0) == pytest.approx(0.5)
        assert marginal_probability(Statevector.basis("10"), 1, 1) == 1.0
        state = random_state(np.random.default_rng(2), 3)
        for q in range(3):
            total = marginal_probability(state, q, 0) + marginal_probability(state, q, 1)
            assert total == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(IndexError):
            marginal_probability(state, 3, 0)


class TestSample:
    def test_basis_state(self):
        assert sample(Statevector.zero(2), 100, seed=3) == {"00": 100}

    def test_plus_frequency(self):
        plus = run_circuit(Circuit(1, [h(0)]))
        counts = sample(plus, 10**6, seed=7)
        assert abs(counts["0"] / 10**6 - 0.5) <= 0.002

    def test_deterministic(self):
        state = random_state(np.random.default_rng(4), 3)
        assert sample(state, 1000, seed=11) == sample(state, 1000, seed=11)

    def test_zero_shots(self):
        with pytest.raises(ValueError):
            sample(Statevector.zero(1), 0, seed=0)

    def test_converges_at_binomial_rate(self):
        state = random_state(np.random.default_rng(5), 2)
        shots = 20000
        counts = sample(state, shots, seed=1)
        for i, p in enumerate(state.probabilities()):
            sigma = np.sqrt(p * (1 - p) / shots)
            assert abs(counts.get(format(i, "02b"), 0) / shots - p) <= 4 * sigma + 1e-12


class TestInnerProduct:
    def test_self(self):
        state = random_state(np.random.default_rng(6), 3)
        assert inner_product(state, state) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert inner_product(Statevector.basis("0"), Statevector.basis("1")) == 0

    def test_cauchy_schwarz(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            assert abs(inner_product(random_state(rng, 2), random_state(rng, 2))) <= 1 + 1e-12

    def test_conjugate_linear_in_first(self):
        a = Statevector(1, [1j, 0])
        b = Statevector.basis("0")
        assert inner_product(a, b) == pytest.approx(-1j)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            inner_product(Statevector.zero(1), Statevector.zero(2))


def test_statevector_validation():
    with pytest.raises(ValueError, match="normalized"):
        Statevector(1, [1, 1])
    with pytest.raises(ValueError):
        Statevector(2, [1, 0])
    state = Statevector.zero(1)
    with pytest.raises(ValueError):
        state.amplitudes[0] = 0
