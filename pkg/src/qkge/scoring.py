"""Triple scores from the switch test, the swap test and compute-uncompute.

All three circuits compare ``U_1|0> = U(theta_r) V(theta_h) H^n |0>`` against
``U_2|0> = V(theta_t) H^n |0>``:

* switch test, n + 1 qubits: ``P(ancilla = 0) = (1 + Re<t|U_r|h>) / 2``
* swap test, 2n + 1 qubits: ``P(ancilla = 0) = (1 + |<t|U_r|h>|^2) / 2``
* compute-uncompute, n qubits: ``P(0...0) = |<t|U_r|h>|^2``

Both ancilla tests recover the score as ``2 P(ancilla = 0) - 1``. The ancilla
is always the highest-indexed qubit. Passing ``theta_r=None`` anywhere below
means the identity relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .ansatz import AnsatzSpec, entity_state_circuit, relation_unitary_circuit
from .statevector import (
    Circuit,
    Statevector,
    anti_controlled,
    controlled,
    cswap,
    h,
    inner_product,
    marginal_probability,
    probability_of,
    run_circuit,
    sample,
)


class ScoreScheme(str, Enum):
    SWITCH = "switch"
    SWAP = "swap"
    COMPUTE_UNCOMPUTE = "cu"

    @property
    def score_range(self) -> tuple[float, float]:
        return (-1.0, 1.0) if self is ScoreScheme.SWITCH else (0.0, 1.0)

    @property
    def uses_ancilla(self) -> bool:
        return self is not ScoreScheme.COMPUTE_UNCOMPUTE

    def n_qubits(self, n: int) -> int:
        return {ScoreScheme.SWITCH: n + 1, ScoreScheme.SWAP: 2 * n + 1}.get(self, n)

    def from_probability(self, p):
        """Score from the probability of the accepting outcome (ancilla 0, or all-zero)."""
        return p if self is ScoreScheme.COMPUTE_UNCOMPUTE else 2 * p - 1

    def to_probability(self, score):
        return score if self is ScoreScheme.COMPUTE_UNCOMPUTE else (1 + score) / 2

    def from_amplitude(self, amp):
        """Score as a function of the overlap ``<t|U_r|h>``; works elementwise on arrays."""
        if self is ScoreScheme.SWITCH:
            return np.real(amp)
        return np.abs(amp) ** 2


class ScoreMode(str, Enum):
    EXACT = "exact"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class ScoreResult:
    value: float
    scheme: ScoreScheme
    mode: ScoreMode
    shots: Optional[int] = None
    seed: Optional[int] = None
    raw_value: Optional[float] = None

    def __post_init__(self):
        if self.raw_value is None:
            object.__setattr__(self, "raw_value", self.value)


def clamp(value: float, scheme: ScoreScheme) -> float:
    lo, hi = scheme.score_range
    return float(min(max(value, lo), hi))


def prepare_u1(spec: AnsatzSpec, theta_h, theta_r) -> Circuit:
    circuit = entity_state_circuit(spec, theta_h)
    if theta_r is not None:
        circuit = circuit + relation_unitary_circuit(spec, theta_r)
    return circuit


def prepare_u2(spec: AnsatzSpec, theta_t) -> Circuit:
    return entity_state_circuit(spec, theta_t)


def _embed(circuit: Circuit, offset: int, n_total: int) -> Circuit:
    return circuit.remap([q + offset for q in range(circuit.n_qubits)], n_total)


def build_switch_circuit(spec: AnsatzSpec, theta_h, theta_r, theta_t) -> Circuit:
    n = spec.n_qubits
    anc = n
    u1 = _embed(prepare_u1(spec, theta_h, theta_r), 0, n + 1)
    u2 = _embed(prepare_u2(spec, theta_t), 0, n + 1)
    return Circuit(n + 1, (h(anc), controlled(u1, anc), anti_controlled(u2, anc), h(anc)))


def build_swap_circuit(spec: AnsatzSpec, theta_h, theta_r, theta_t) -> Circuit:
    n = spec.n_qubits
    total = 2 * n + 1
    anc = 2 * n
    u1 = _embed(prepare_u1(spec, theta_h, theta_r), 0, total)
    u2 = _embed(prepare_u2(spec, theta_t), n, total)
    test = Circuit(total, (h(anc),) + tuple(cswap(anc, i, n + i) for i in range(n)) + (h(anc),))
    return u1 + u2 + test


def build_cu_circuit(spec: AnsatzSpec, theta_h, theta_r, theta_t) -> Circuit:
    return prepare_u1(spec, theta_h, theta_r) + prepare_u2(spec, theta_t).adjoint()


_BUILDERS = {
    ScoreScheme.SWITCH: build_switch_circuit,
    ScoreScheme.SWAP: build_swap_circuit,
    ScoreScheme.COMPUTE_UNCOMPUTE: build_cu_circuit,
}


def build_circuit(scheme, spec: AnsatzSpec, theta_h, theta_r, theta_t) -> Circuit:
    return _BUILDERS[ScoreScheme(scheme)](spec, theta_h, theta_r, theta_t)


def accept_probability(scheme: ScoreScheme, state: Statevector) -> float:
    """Probability of the outcome the score is read from."""
    if scheme.uses_ancilla:
        return marginal_probability(state, state.n_qubits - 1, 0)
    return probability_of(state, "0" * state.n_qubits)


def exact_score(scheme, spec: AnsatzSpec, theta_h, theta_r, theta_t) -> ScoreResult:
    scheme = ScoreScheme(scheme)
    state = run_circuit(build_circuit(scheme, spec, theta_h, theta_r, theta_t))
    value = float(scheme.from_probability(accept_probability(scheme, state)))
    return ScoreResult(value, scheme, ScoreMode.EXACT)


def accepted_count(scheme: ScoreScheme, counts: dict[str, int]) -> int:
    if scheme.uses_ancilla:
        # bitstrings are written most-significant first, so the ancilla leads
        return sum(c for bits, c in counts.items() if bits[0] == "0")
    return sum(c for bits, c in counts.items() if "1" not in bits)


def estimate_score(scheme, spec: AnsatzSpec, theta_h, theta_r, theta_t, shots: int, seed: int) -> ScoreResult:
    scheme = ScoreScheme(scheme)
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    state = run_circuit(build_circuit(scheme, spec, theta_h, theta_r, theta_t))
    freq = accepted_count(scheme, sample(state, shots, seed)) / shots
    raw = float(scheme.from_probability(freq))
    return ScoreResult(clamp(raw, scheme), scheme, ScoreMode.SAMPLED, shots, seed, raw)


def oracle_overlap(spec: AnsatzSpec, theta_h, theta_r, theta_t) -> complex:
    """``<t|U_r|h>`` from plain n-qubit statevectors, without any test circuit."""
    head = run_circuit(entity_state_circuit(spec, theta_h))
    if theta_r is not None:
        head = run_circuit(relation_unitary_circuit(spec, theta_r), initial=head)
    tail = run_circuit(entity_state_circuit(spec, theta_t))
    return inner_product(tail, head)


def oracle_score(scheme, spec: AnsatzSpec, theta_h, theta_r, theta_t) -> float:
    return float(ScoreScheme(scheme).from_amplitude(oracle_overlap(spec, theta_h, theta_r, theta_t)))


def shots_for_precision(epsilon: float) -> int:
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    # guard against 1/eps**2 landing a hair above an integer, e.g. eps = 0.1
    return math.ceil(round(1.0 / epsilon**2, 9))


def derive_seed(*parts: int) -> int:
    """Stable 64-bit seed from a tuple of non-negative integers."""
    seq = np.random.SeedSequence([int(p) for p in parts])
    return int(seq.generate_state(1, dtype=np.uint64)[0])
