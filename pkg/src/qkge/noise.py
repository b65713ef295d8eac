"""Readout and two-qubit gate noise applied to measurement distributions.

The simulator stays pure-state. Noise acts on the exact outcome distribution
of a scoring circuit in two steps:

1. gate error: the distribution keeps weight ``(1 - p2) ** N2`` and the rest
   is spread uniformly, where ``N2`` is the lowered two-qubit gate count of
   the circuit (a global-depolarizing approximation);
2. readout error: each measured bit flips independently with probability
   ``1 - F_read``.

Only the ancilla is measured in the switch and swap tests; all ``n`` qubits
are measured in compute-uncompute.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .ansatz import AnsatzSpec, param_count
from .resources import estimate_resources
from .scoring import (
    ScoreMode,
    ScoreResult,
    ScoreScheme,
    build_circuit,
    clamp,
    exact_score,
)
from .statevector import run_circuit, sample_counts

DIST_ATOL = 1e-10

DEFAULT_READOUT_FIDELITIES = (0.95, 0.99)
DEFAULT_TWO_QUBIT_ERRORS = (0.0, 0.005, 0.01)

NOISE_COLUMNS = (
    "scheme", "n", "F_read", "p2", "shots",
    "mean_abs_bias", "std_bias", "mean_exact", "mean_noisy", "policy",
)


@dataclass(frozen=True)
class NoiseModel:
    readout_fidelity: float = 1.0
    two_qubit_error: float = 0.0

    def __post_init__(self):
        if not 0.5 < self.readout_fidelity <= 1.0:
            raise ValueError(f"readout fidelity must lie in (0.5, 1], got {self.readout_fidelity}")
        if not 0.0 <= self.two_qubit_error < 1.0:
            raise ValueError(f"two-qubit error must lie in [0, 1), got {self.two_qubit_error}")

    @property
    def is_noiseless(self) -> bool:
        return self.readout_fidelity == 1.0 and self.two_qubit_error == 0.0


def _check_distribution(probabilities) -> np.ndarray:
    p = np.asarray(probabilities, dtype=np.float64)
    if p.ndim != 1 or p.size < 2 or p.size & (p.size - 1):
        raise ValueError(f"distribution length must be a power of two >= 2, got shape {p.shape}")
    if np.any(p < -DIST_ATOL) or abs(p.sum() - 1.0) > DIST_ATOL:
        raise ValueError("malformed distribution: negative entries or total != 1")
    return p


def apply_readout_error(
    probabilities,
    n_measured: int,
    model: NoiseModel,
    qubits: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Symmetric bit-flip confusion on ``n_measured`` qubits of a distribution.

    By default the distribution is over exactly ``n_measured`` qubits and all
    of them are measured. ``qubits`` selects a subset of a wider register
    (qubit 0 is the least-significant bit of the index).
    """
    p = _check_distribution(probabilities)
    n_total = p.size.bit_length() - 1
    if qubits is None:
        if n_measured != n_total:
            raise ValueError(f"distribution covers {n_total} qubits, expected {n_measured}")
        qubits = range(n_total)
    qubits = list(qubits)
    if len(qubits) != n_measured or any(not 0 <= q < n_total for q in qubits):
        raise ValueError(f"invalid measured qubits {qubits} for a {n_total}-qubit distribution")
    if model.readout_fidelity == 1.0:
        return p.copy()
    f = model.readout_fidelity
    confusion = np.array([[f, 1 - f], [1 - f, f]])
    tensor = p.reshape((2,) * n_total)
    for q in qubits:
        ax = n_total - 1 - q
        tensor = np.moveaxis(np.tensordot(confusion, tensor, axes=([1], [ax])), 0, ax)
    return tensor.reshape(-1)


def apply_gate_error(probabilities, n_two_qubit: int, model: NoiseModel) -> np.ndarray:
    p = _check_distribution(probabilities)
    if model.two_qubit_error == 0.0 or n_two_qubit == 0:
        return p.copy()
    keep = (1.0 - model.two_qubit_error) ** n_two_qubit
    return keep * p + (1.0 - keep) / p.size


def measured_qubits(scheme: ScoreScheme, n_total: int) -> list[int]:
    return [n_total - 1] if scheme.uses_ancilla else list(range(n_total))


def noisy_distribution(scheme, spec: AnsatzSpec, theta_h, theta_r, theta_t, model: NoiseModel) -> np.ndarray:
    """Full outcome distribution of the scoring circuit after gate and readout noise."""
    scheme = ScoreScheme(scheme)
    state = run_circuit(build_circuit(scheme, spec, theta_h, theta_r, theta_t))
    p = state.probabilities()
    if model.is_noiseless:
        return p
    p = apply_gate_error(p, estimate_resources(scheme, spec).two_qubit_gates, model)
    qubits = measured_qubits(scheme, state.n_qubits)
    return apply_readout_error(p, len(qubits), model, qubits=qubits)


def _accept_mass(scheme: ScoreScheme, p: np.ndarray) -> float:
    if scheme.uses_ancilla:
        # ancilla is the top bit: indices below the midpoint have it at 0
        return float(p[: p.size // 2].sum())
    return float(p[0])


def noisy_score(
    scheme,
    spec: AnsatzSpec,
    theta_h,
    theta_r,
    theta_t,
    model: NoiseModel,
    shots: Optional[int] = None,
    seed: Optional[int] = None,
) -> ScoreResult:
    """Score read from the noisy distribution; sampled when ``shots`` is given.

    With ``shots=None`` the accepting probability is taken from the noisy
    distribution directly.
    """
    scheme = ScoreScheme(scheme)
    p = noisy_distribution(scheme, spec, theta_h, theta_r, theta_t, model)
    if shots is None:
        raw = float(scheme.from_probability(_accept_mass(scheme, p)))
        return ScoreResult(clamp(raw, scheme), scheme, ScoreMode.EXACT, raw_value=raw)
    if seed is None:
        raise ValueError("sampled noisy scores need a seed")
    counts = sample_counts(p, shots, seed)
    freq = _accept_mass(scheme, counts.astype(np.float64)) / shots
    raw = float(scheme.from_probability(freq))
    return ScoreResult(clamp(raw, scheme), scheme, ScoreMode.SAMPLED, shots, seed, raw)


def _parameter_draws(spec: AnsatzSpec, policy: str, samples: int, seed: int):
    rng = np.random.default_rng(seed)
    size = param_count(spec)
    for _ in range(samples):
        if policy == "random":
            yield tuple(rng.uniform(-np.pi, np.pi, size=(3, size)))
        elif policy == "perfect":
            theta = rng.uniform(-np.pi, np.pi, size=size)
            yield theta, None, theta
        else:
            raise ValueError(f"unknown parameter policy {policy!r}")


def scheme_bias_sweep(
    n_values: Iterable[int],
    model: NoiseModel,
    shots: Optional[int] = None,
    samples: int = 20,
    seed: int = 0,
    n_layers: int = 2,
    policy: str = "random",
    schemes: Iterable = tuple(ScoreScheme),
) -> list[dict]:
    """Noisy-minus-exact score statistics per (scheme, n).

    ``policy="random"`` draws independent head, relation and tail parameters;
    ``policy="perfect"`` uses equal head and tail with the identity relation,
    so the exact score is 1. Every scheme sees the same parameter draws.
    ``shots=None`` reads scores from the noisy distribution (recorded as 0).
    """
    rows = []
    for scheme in sorted(ScoreScheme(s) for s in schemes):
        for n in sorted(n_values):
            spec = AnsatzSpec(n, n_layers)
            exact, noisy = [], []
            for i, (th, tr, tt) in enumerate(_parameter_draws(spec, policy, samples, seed)):
                exact.append(exact_score(scheme, spec, th, tr, tt).value)
                noisy.append(noisy_score(scheme, spec, th, tr, tt, model, shots, seed + i).raw_value)
            bias = np.array(noisy) - np.array(exact)
            rows.append({
                "scheme": scheme.value,
                "n": n,
                "F_read": model.readout_fidelity,
                "p2": model.two_qubit_error,
                "shots": shots or 0,
                "mean_abs_bias": float(np.mean(np.abs(bias))),
                "std_bias": float(np.std(bias)),
                "mean_exact": float(np.mean(exact)),
                "mean_noisy": float(np.mean(noisy)),
                "policy": policy,
            })
    return rows


def rows_to_csv(rows: list[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in columns})
    return buf.getvalue()


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value
