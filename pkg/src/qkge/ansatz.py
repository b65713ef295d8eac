"""Layered hardware-efficient ansatz for entity states and relation unitaries.

Each layer applies RY then RZ on every qubit, followed by a ring of CNOTs
``i -> (i + 1) % n`` (omitted for a single qubit). Parameters are laid out
layer-major, then by qubit, then RY before RZ, so a checkpoint written for
one ``AnsatzSpec`` is readable by any other build using the same layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .statevector import Circuit, Gate, cnot, h, ry, rz

PARAMETER_ORDER = "layer-major, qubit, (RY, RZ)"


@dataclass(frozen=True)
class AnsatzSpec:
    n_qubits: int
    n_layers: int = 2

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_layers < 1:
            raise ValueError(f"n_qubits and n_layers must be positive: {self}")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def seed_convention(self) -> str:
        return PARAMETER_ORDER


def param_count(spec: AnsatzSpec) -> int:
    return 2 * spec.n_qubits * spec.n_layers


def ring_pairs(n_qubits: int) -> list[tuple[int, int]]:
    if n_qubits == 1:
        return []
    return [(i, (i + 1) % n_qubits) for i in range(n_qubits)]


def _check_params(spec: AnsatzSpec, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    expected = param_count(spec)
    if theta.size != expected:
        raise ValueError(f"expected {expected} parameters for {spec}, got {theta.size}")
    return theta


def layered_gates(spec: AnsatzSpec, theta) -> list[Gate]:
    theta = _check_params(spec, theta)
    n = spec.n_qubits
    gates = []
    k = 0
    for _ in range(spec.n_layers):
        for q in range(n):
            gates.append(ry(theta[k], q))
            gates.append(rz(theta[k + 1], q))
            k += 2
        gates.extend(cnot(c, t) for c, t in ring_pairs(n))
    return gates


def hadamard_wall(n_qubits: int) -> Circuit:
    return Circuit(n_qubits, tuple(h(q) for q in range(n_qubits)))


def entity_state_circuit(spec: AnsatzSpec, theta_e) -> Circuit:
    """H on every qubit followed by the layered ansatz; prepares ``|e>``."""
    return hadamard_wall(spec.n_qubits) + Circuit(spec.n_qubits, layered_gates(spec, theta_e))


def relation_unitary_circuit(spec: AnsatzSpec, theta_r) -> Circuit:
    return Circuit(spec.n_qubits, layered_gates(spec, theta_r))


def adjoint(circuit: Circuit) -> Circuit:
    return circuit.adjoint()


# Vectorized simulation ------------------------------------------------------
#
# Training evaluates the same ansatz at many parameter vectors at once (every
# entity, every shifted copy). These helpers push a whole batch of states
# through the layered ansatz with one numpy operation per gate.


def _bit_indices(n_qubits: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(2**n_qubits)
    low = idx[(idx >> q) & 1 == 0]
    return low, low | (1 << q)


def _cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    return np.where((idx >> control) & 1, idx ^ (1 << target), idx)


def apply_layers(spec: AnsatzSpec, thetas: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Apply the layered ansatz to a batch of states.

    ``thetas`` has shape ``(B, param_count)`` and ``states`` shape ``(B, dim)``;
    row ``b`` of the result is ``V(thetas[b]) states[b]``.
    """
    n = spec.n_qubits
    thetas = np.asarray(thetas, dtype=np.float64)
    psi = np.array(states, dtype=np.complex128, copy=True)
    if thetas.shape != (psi.shape[0], param_count(spec)):
        raise ValueError(f"thetas shape {thetas.shape} does not match {psi.shape[0]} states and {spec}")
    pairs = [_bit_indices(n, q) for q in range(n)]
    perms = [_cnot_permutation(n, c, t) for c, t in ring_pairs(n)]
    k = 0
    for _ in range(spec.n_layers):
        for q in range(n):
            lo, hi = pairs[q]
            half = thetas[:, k : k + 1] / 2
            c, s = np.cos(half), np.sin(half)
            a0, a1 = psi[:, lo], psi[:, hi]
            psi[:, lo], psi[:, hi] = c * a0 - s * a1, s * a0 + c * a1
            phase = np.exp(0.5j * thetas[:, k + 1 : k + 2])
            psi[:, lo] *= phase.conj()
            psi[:, hi] *= phase
            k += 2
        for perm in perms:
            psi = psi[:, perm]
    return psi


def entity_states(spec: AnsatzSpec, thetas: np.ndarray) -> np.ndarray:
    """Batch of ``|e> = V(theta) H^n |0>``, shape ``(B, dim)``."""
    thetas = np.atleast_2d(thetas)
    plus = np.full((thetas.shape[0], spec.dim), 1 / np.sqrt(spec.dim), dtype=np.complex128)
    return apply_layers(spec, thetas, plus)


def relation_unitaries(spec: AnsatzSpec, thetas: np.ndarray) -> np.ndarray:
    """Batch of dense ``U(theta)`` matrices, shape ``(B, dim, dim)``."""
    thetas = np.atleast_2d(thetas)
    batch, dim = thetas.shape[0], spec.dim
    basis = np.tile(np.eye(dim, dtype=np.complex128), (batch, 1))
    images = apply_layers(spec, np.repeat(thetas, dim, axis=0), basis)
    # images[b * dim + j] is U_b |j>, i.e. column j of U_b
    return images.reshape(batch, dim, dim).transpose(0, 2, 1)
