"""Dense statevector simulation of small qubit registers.

Qubit 0 is the least-significant bit of a basis-state index, so the bitstring
``"10"`` on two qubits means qubit 1 is set and qubit 0 is not (index 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

NORM_ATOL = 1e-10


class GateKind(str, Enum):
    H = "H"
    X = "X"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"
    SWAP = "SWAP"
    CSWAP = "CSWAP"
    CU = "CU"            # body circuit applied when the control reads 1
    ANTI_CU = "ANTI_CU"  # body circuit applied when the control reads 0


ROTATIONS = frozenset({GateKind.RX, GateKind.RY, GateKind.RZ})

# (number of controls, number of targets) for the fixed-arity kinds
_ARITY = {
    GateKind.H: (0, 1),
    GateKind.X: (0, 1),
    GateKind.RX: (0, 1),
    GateKind.RY: (0, 1),
    GateKind.RZ: (0, 1),
    GateKind.CNOT: (1, 1),
    GateKind.SWAP: (0, 2),
    GateKind.CSWAP: (1, 2),
}


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    angle: Optional[float] = None
    body: Optional["Circuit"] = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        object.__setattr__(self, "controls", tuple(int(q) for q in self.controls))
        if kind in ROTATIONS:
            if self.angle is None:
                raise ValueError(f"{kind.value} gate requires an angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise ValueError(f"{kind.value} gate takes no angle")
        if kind in (GateKind.CU, GateKind.ANTI_CU):
            if self.body is None:
                raise ValueError(f"{kind.value} gate requires a body circuit")
            if len(self.controls) != 1:
                raise ValueError(f"{kind.value} gate takes exactly one control")
        else:
            if self.body is not None:
                raise ValueError(f"{kind.value} gate takes no body circuit")
            n_ctrl, n_tgt = _ARITY[kind]
            if len(self.controls) != n_ctrl or len(self.targets) != n_tgt:
                raise ValueError(
                    f"{kind.value} expects {n_ctrl} control(s) and {n_tgt} target(s), "
                    f"got {self.controls} and {self.targets}"
                )
        qubits = self.qubits
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"control and target qubits overlap in {kind.value}: {qubits}")
        if any(q < 0 for q in qubits):
            raise ValueError(f"negative qubit index in {kind.value}: {qubits}")

    @property
    def qubits(self) -> tuple[int, ...]:
        """Every qubit the gate touches, controls first."""
        return self.controls + self.targets

    def adjoint(self) -> "Gate":
        if self.kind in ROTATIONS:
            return Gate(self.kind, self.targets, self.controls, angle=-self.angle)
        if self.body is not None:
            return Gate(self.kind, self.targets, self.controls, body=self.body.adjoint())
        return self


def h(q: int) -> Gate:
    return Gate(GateKind.H, (q,))


def x(q: int) -> Gate:
    return Gate(GateKind.X, (q,))


def rx(theta: float, q: int) -> Gate:
    return Gate(GateKind.RX, (q,), angle=theta)


def ry(theta: float, q: int) -> Gate:
    return Gate(GateKind.RY, (q,), angle=theta)


def rz(theta: float, q: int) -> Gate:
    return Gate(GateKind.RZ, (q,), angle=theta)


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, (target,), (control,))


def swap(a: int, b: int) -> Gate:
    return Gate(GateKind.SWAP, (a, b))


def cswap(control: int, a: int, b: int) -> Gate:
    return Gate(GateKind.CSWAP, (a, b), (control,))


def controlled(body: "Circuit", control: int) -> Gate:
    return Gate(GateKind.CU, body.active_qubits(), (control,), body=body)


def anti_controlled(body: "Circuit", control: int) -> Gate:
    return Gate(GateKind.ANTI_CU, body.active_qubits(), (control,), body=body)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be positive, got {self.n_qubits}")
        object.__setattr__(self, "gates", tuple(self.gates))
        for gate in self.gates:
            _check_indices(gate, self.n_qubits)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate circuits of different width")
        return Circuit(self.n_qubits, self.gates + other.gates)

    def __len__(self) -> int:
        return len(self.gates)

    def adjoint(self) -> "Circuit":
        return Circuit(self.n_qubits, tuple(g.adjoint() for g in reversed(self.gates)))

    def active_qubits(self) -> tuple[int, ...]:
        used = set()
        for gate in self.gates:
            used.update(gate.qubits)
            if gate.body is not None:
                used.update(gate.body.active_qubits())
        return tuple(sorted(used))

    def depth(self) -> int:
        """Longest chain of gates that share a qubit.

        A controlled sub-circuit occupies its control for the full depth of
        its body.
        """
        front = [0] * self.n_qubits
        for gate in self.gates:
            if gate.body is not None:
                qubits = set(gate.qubits) | set(gate.body.active_qubits())
                span = max(gate.body.depth(), 1)
            else:
                qubits = set(gate.qubits)
                span = 1
            level = max(front[q] for q in qubits) + span
            for q in qubits:
                front[q] = level
        return max(front, default=0)

    def remap(self, mapping: Sequence[int], n_qubits: int) -> "Circuit":
        """Relabel qubit ``q`` as ``mapping[q]`` inside a register of ``n_qubits``."""
        return Circuit(n_qubits, tuple(_remap_gate(g, mapping, n_qubits) for g in self.gates))


def _remap_gate(gate: Gate, mapping: Sequence[int], n_qubits: int) -> Gate:
    body = gate.body.remap(mapping, n_qubits) if gate.body is not None else None
    return Gate(
        gate.kind,
        tuple(mapping[q] for q in gate.targets),
        tuple(mapping[q] for q in gate.controls),
        angle=gate.angle,
        body=body,
    )


def _check_indices(gate: Gate, n_qubits: int) -> None:
    for q in gate.qubits:
        if not 0 <= q < n_qubits:
            raise IndexError(f"qubit {q} out of range for {n_qubits}-qubit register")
    if gate.body is not None:
        if gate.body.n_qubits != n_qubits:
            raise ValueError("controlled body must span the enclosing register")
        if gate.controls[0] in gate.body.active_qubits():
            raise ValueError("controlled body acts on its own control qubit")


@dataclass(frozen=True, eq=False)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != 2**self.n_qubits:
            raise ValueError(
                f"expected {2 ** self.n_qubits} amplitudes for {self.n_qubits} qubits, got {amps.size}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"statevector is not normalized (squared norm {norm!r})")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, bits: str) -> "Statevector":
        amps = np.zeros(2 ** len(bits), dtype=np.complex128)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


# Single-qubit matrices.
_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


def rotation_matrix(kind: GateKind, theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if kind is GateKind.RZ:
        return np.array([[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=np.complex128)
    raise ValueError(f"{kind} is not a rotation")


def _axis(q: int, n: int) -> int:
    # C-order reshape puts the most significant bit first
    return n - 1 - q


def _apply_1q(psi: np.ndarray, matrix: np.ndarray, q: int, n: int) -> np.ndarray:
    ax = _axis(q, n)
    out = np.tensordot(matrix, psi, axes=([1], [ax]))
    return np.moveaxis(out, 0, ax)


def _apply_tensor(psi: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """Apply ``gate`` to a state tensor of shape ``(2,) * n``."""
    kind = gate.kind
    if kind in (GateKind.CU, GateKind.ANTI_CU):
        acted = psi
        for inner in gate.body.gates:
            acted = _apply_tensor(acted, inner, n)
        return _select(psi, acted, gate.controls, n, 1 if kind is GateKind.CU else 0)

    if kind is GateKind.H:
        acted = _apply_1q(psi, _H, gate.targets[0], n)
    elif kind in (GateKind.X, GateKind.CNOT):
        acted = _apply_1q(psi, _X, gate.targets[0], n)
    elif kind in ROTATIONS:
        acted = _apply_1q(psi, rotation_matrix(kind, gate.angle), gate.targets[0], n)
    elif kind in (GateKind.SWAP, GateKind.CSWAP):
        a, b = gate.targets
        acted = np.swapaxes(psi, _axis(a, n), _axis(b, n))
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unsupported gate kind {kind}")

    if gate.controls:
        return _select(psi, acted, gate.controls, n, 1)
    return acted


def _select(psi: np.ndarray, acted: np.ndarray, controls, n: int, value: int) -> np.ndarray:
    idx = [slice(None)] * n
    for c in controls:
        idx[_axis(c, n)] = value
    idx = tuple(idx)
    out = np.array(psi, copy=True)
    out[idx] = acted[idx]
    return out


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    n = state.n_qubits
    _check_indices(gate, n)
    psi = state.amplitudes.reshape((2,) * n)
    return Statevector(n, _apply_tensor(psi, gate, n).reshape(-1))


def run_circuit(circuit: Circuit, initial: Optional[Statevector] = None) -> Statevector:
    """Apply every gate of ``circuit`` in order, starting from ``|0...0>`` by default."""
    n = circuit.n_qubits
    if initial is None:
        initial = Statevector.zero(n)
    elif initial.n_qubits != n:
        raise ValueError(f"initial state has {initial.n_qubits} qubits, circuit has {n}")
    psi = initial.amplitudes.reshape((2,) * n)
    for gate in circuit.gates:
        psi = _apply_tensor(psi, gate, n)
    return Statevector(n, psi.reshape(-1))


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense matrix of ``circuit``; column ``j`` is the image of basis state ``j``."""
    n = circuit.n_qubits
    dim = 2**n
    columns = []
    for j in range(dim):
        psi = np.zeros(dim, dtype=np.complex128)
        psi[j] = 1.0
        psi = psi.reshape((2,) * n)
        for gate in circuit.gates:
            psi = _apply_tensor(psi, gate, n)
        columns.append(psi.reshape(-1))
    return np.stack(columns, axis=1)


def _index_of(outcome: str, n_qubits: int) -> int:
    if len(outcome) != n_qubits or set(outcome) - {"0", "1"}:
        raise ValueError(f"outcome {outcome!r} is not a {n_qubits}-bit string")
    return int(outcome, 2)


def probability_of(state: Statevector, outcome: str) -> float:
    amp = state.amplitudes[_index_of(outcome, state.n_qubits)]
    return float(abs(amp) ** 2)


def marginal_probability(state: Statevector, qubit: int, value: int) -> float:
    n = state.n_qubits
    if not 0 <= qubit < n:
        raise IndexError(f"qubit {qubit} out of range for {n}-qubit state")
    if value not in (0, 1):
        raise ValueError(f"bit value must be 0 or 1, got {value}")
    probs = state.probabilities().reshape((2,) * n)
    return float(np.take(probs, value, axis=_axis(qubit, n)).sum())


def sample_counts(probabilities: np.ndarray, shots: int, seed: int) -> np.ndarray:
    """Multinomial draw of ``shots`` outcomes; returns a count per basis index."""
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    p = np.clip(np.asarray(probabilities, dtype=np.float64), 0.0, None)
    p = p / p.sum()
    return np.random.default_rng(seed).multinomial(shots, p)


def sample(state: Statevector, shots: int, seed: int) -> dict[str, int]:
    """Histogram of ``shots`` computational-basis measurements, keyed by bitstring."""
    counts = sample_counts(state.probabilities(), shots, seed)
    n = state.n_qubits
    return {format(i, f"0{n}b"): int(c) for i, c in enumerate(counts) if c}


def inner_product(a: Statevector, b: Statevector) -> complex:
    """``<a|b>``, conjugate-linear in ``a``."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    return complex(np.vdot(a.amplitudes, b.amplitudes))
