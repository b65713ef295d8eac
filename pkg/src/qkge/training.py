"""Knowledge graph data, MSE training and gradients for the quantum embeddings.

Entity ``e`` is the state ``|e> = V(theta_e) H^n |0>`` and relation ``r`` the
unitary ``U(theta_r)``; a triple is scored from the overlap ``<t|U_r|h>``.
Training evaluates these overlaps with the vectorized ansatz simulator in
:mod:`qkge.ansatz`. Exact scores agree with the scoring circuits of
:mod:`qkge.scoring` to machine precision, which the test-suite checks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .ansatz import AnsatzSpec, entity_states, param_count, relation_unitaries
from .scoring import ScoreMode, ScoreScheme, derive_seed

logger = logging.getLogger(__name__)

# Tags separating the random streams derived from one user seed.
_NEGATIVES, _INIT, _SHUFFLE, _SAMPLE_LOSS, _SAMPLE_GRAD, _SPSA = range(6)


@dataclass(frozen=True)
class KnowledgeGraph:
    entities: tuple[str, ...]
    relations: tuple[str, ...]
    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "relations", tuple(self.relations))
        triples = tuple((int(h), int(r), int(t)) for h, r, t in self.triples)
        object.__setattr__(self, "triples", triples)
        n_e, n_r = len(self.entities), len(self.relations)
        for h, r, t in triples:
            if not (0 <= h < n_e and 0 <= t < n_e and 0 <= r < n_r):
                raise ValueError(f"triple {(h, r, t)} out of bounds for {n_e} entities, {n_r} relations")
        if len(set(triples)) != len(triples):
            raise ValueError("duplicate triples in knowledge graph")
        if len(set(self.entities)) != n_e or len(set(self.relations)) != n_r:
            raise ValueError("entity and relation names must be unique")

    @classmethod
    def from_named(cls, named: Iterable[tuple[str, str, str]], entities=(), relations=()) -> "KnowledgeGraph":
        """Build from name triples; dictionaries grow in order of first appearance."""
        ent = {name: i for i, name in enumerate(entities)}
        rel = {name: i for i, name in enumerate(relations)}
        triples = []
        seen = set()
        for h, r, t in named:
            key = (ent.setdefault(h, len(ent)), rel.setdefault(r, len(rel)), ent.setdefault(t, len(ent)))
            if key not in seen:
                seen.add(key)
                triples.append(key)
        return cls(tuple(ent), tuple(rel), tuple(triples))

    @cached_property
    def entity_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.entities)}

    @cached_property
    def relation_index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.relations)}

    @cached_property
    def triple_set(self) -> frozenset:
        return frozenset(self.triples)

    def index_triple(self, h: str, r: str, t: str) -> tuple[int, int, int]:
        return self.entity_index[h], self.relation_index[r], self.entity_index[t]


class LabeledTriple(NamedTuple):
    head: int
    relation: int
    tail: int
    label: int


def negative_sample(
    kg: KnowledgeGraph,
    k: int,
    seed: int,
    exclude: Iterable[tuple[int, int, int]] = (),
) -> list[LabeledTriple]:
    """Each positive followed by ``k`` corruptions labeled 0.

    A corruption replaces the head or the tail (fair coin) with a uniformly
    drawn entity and is rejected while it is a known triple. ``exclude`` adds
    triples that must never be emitted as negatives, e.g. held-out facts.
    """
    if k < 1:
        raise ValueError(f"negatives per positive must be positive, got {k}")
    if not kg.triples:
        raise ValueError("empty knowledge graph")
    forbidden = kg.triple_set | frozenset(exclude)
    rng = np.random.default_rng(derive_seed(seed, _NEGATIVES))
    n_e = len(kg.entities)
    data = []
    for h, r, t in kg.triples:
        heads = [e for e in range(n_e) if (e, r, t) not in forbidden]
        tails = [e for e in range(n_e) if (h, r, e) not in forbidden]
        if not heads and not tails:
            raise ValueError(f"no negative exists for triple {(h, r, t)}: every corruption is a known triple")
        data.append(LabeledTriple(h, r, t, 1))
        for _ in range(k):
            while True:
                corrupt_head = rng.random() < 0.5
                e = int(rng.integers(n_e))
                cand = (e, r, t) if corrupt_head else (h, r, e)
                if cand not in forbidden:
                    break
            data.append(LabeledTriple(*cand, 0))
    return data


@dataclass
class ParameterStore:
    spec: AnsatzSpec
    entity_params: np.ndarray
    relation_params: np.ndarray

    def __post_init__(self):
        size = param_count(self.spec)
        self.entity_params = np.array(self.entity_params, dtype=np.float64).reshape(-1, size)
        self.relation_params = np.array(self.relation_params, dtype=np.float64).reshape(-1, size)

    @classmethod
    def initialize(cls, spec: AnsatzSpec, n_entities: int, n_relations: int, seed: int) -> "ParameterStore":
        """Independent uniform draws from ``[-pi, pi)``."""
        rng = np.random.default_rng(derive_seed(seed, _INIT))
        size = param_count(spec)
        ent = rng.uniform(-np.pi, np.pi, size=(n_entities, size))
        rel = rng.uniform(-np.pi, np.pi, size=(n_relations, size))
        return cls(spec, ent, rel)

    def copy(self) -> "ParameterStore":
        return ParameterStore(self.spec, self.entity_params.copy(), self.relation_params.copy())

    def shifted(self, d_ent: np.ndarray, d_rel: np.ndarray) -> "ParameterStore":
        return ParameterStore(self.spec, self.entity_params + d_ent, self.relation_params + d_rel)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.entity_params, self.relation_params


def _as_arrays(data: Sequence) -> np.ndarray:
    """Columns ``(h, r, t, y)``; bare 3-tuples get label 0."""
    rows = [tuple(d) if len(d) == 4 else tuple(d) + (0,) for d in data]
    return np.array(rows, dtype=np.int64).reshape(-1, 4).T


def overlaps(params: ParameterStore, heads, relations, tails) -> np.ndarray:
    """``<t|U_r|h>`` for parallel index arrays."""
    heads, relations, tails = (np.asarray(a, dtype=np.int64) for a in (heads, relations, tails))
    ents, e_pos = np.unique(np.concatenate([heads, tails]), return_inverse=True)
    rels, r_pos = np.unique(relations, return_inverse=True)
    states = entity_states(params.spec, params.entity_params[ents])
    unitaries = relation_unitaries(params.spec, params.relation_params[rels])
    h_pos, t_pos = e_pos[: heads.size], e_pos[heads.size :]
    moved = np.einsum("ide,ie->id", unitaries[r_pos], states[h_pos])
    return np.einsum("id,id->i", states[t_pos].conj(), moved)


def _sampled(scores: np.ndarray, scheme: ScoreScheme, shots: int, rng: np.random.Generator) -> np.ndarray:
    p = np.clip(scheme.to_probability(scores), 0.0, 1.0)
    return scheme.from_probability(rng.binomial(shots, p) / shots)


def triple_scores(
    params: ParameterStore,
    data: Sequence,
    scheme,
    mode=ScoreMode.EXACT,
    shots: Optional[int] = None,
    seed: int = 0,
) -> np.ndarray:
    """Scores for each ``(h, r, t[, y])`` in ``data``.

    Sampled mode draws the accepting-outcome count of each circuit from a
    binomial with ``shots`` trials using a generator seeded by ``seed``.
    """
    scheme, mode = ScoreScheme(scheme), ScoreMode(mode)
    h, r, t, _ = _as_arrays(data)
    scores = scheme.from_amplitude(overlaps(params, h, r, t))
    if mode is ScoreMode.SAMPLED:
        if not shots or shots < 1:
            raise ValueError("sampled mode needs a positive shot count")
        scores = _sampled(scores, scheme, shots, np.random.default_rng(seed))
    return scores


def mse_loss(
    params: ParameterStore,
    data: Sequence,
    scheme,
    mode=ScoreMode.EXACT,
    shots: Optional[int] = None,
    seed: int = 0,
) -> float:
    if len(data) == 0:
        raise ValueError("empty data")
    labels = _as_arrays(data)[3].astype(np.float64)
    scores = triple_scores(params, data, scheme, mode, shots, seed)
    return float(np.mean((scores - labels) ** 2))


# Gradients -------------------------------------------------------------------

# Two-point shift (s, c): d score / d theta = c * (score(theta + s) - score(theta - s)).
# Each rotation angle enters an overlap with frequency 1/2, so the real part
# used by the switch test needs a shift of pi, while the squared overlap
# (frequencies 0 and 1) takes the familiar pi/2 rule.
SHIFT_RULES = {
    ScoreScheme.SWITCH: (np.pi, 0.25),
    ScoreScheme.SWAP: (np.pi / 2, 0.5),
    ScoreScheme.COMPUTE_UNCOMPUTE: (np.pi / 2, 0.5),
}


class Coordinate(NamedTuple):
    group: str  # "entity" or "relation"
    index: int
    position: int


def _shift_bank(thetas: np.ndarray, shift: float) -> np.ndarray:
    """Copies of each row with one coordinate moved by +shift / -shift.

    Output shape ``(m, P, 2, P)``.
    """
    m, size = thetas.shape
    eye = np.eye(size) * shift
    bank = np.empty((m, size, 2, size))
    bank[:, :, 0, :] = thetas[:, None, :] + eye
    bank[:, :, 1, :] = thetas[:, None, :] - eye
    return bank


def parameter_shift_gradient(
    params: ParameterStore,
    batch: Sequence,
    scheme,
    mode=ScoreMode.EXACT,
    shots: Optional[int] = None,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the batch MSE with respect to every entity and relation angle.

    Each occurrence of a parameter (head, relation or tail slot of a triple)
    is shifted on its own and the contributions are summed, which keeps the
    rule exact when an entity is both head and tail. Per-triple terms are
    accumulated in batch order.
    """
    scheme, mode = ScoreScheme(scheme), ScoreMode(mode)
    if len(batch) == 0:
        raise ValueError("empty batch")
    spec = params.spec
    size, dim = param_count(spec), spec.dim
    shift, coef = SHIFT_RULES[scheme]
    h, r, t, y = _as_arrays(batch)

    ents, e_pos = np.unique(np.concatenate([h, t]), return_inverse=True)
    rels, r_pos = np.unique(r, return_inverse=True)
    h_pos, t_pos = e_pos[: h.size], e_pos[h.size :]

    ent_theta = params.entity_params[ents]
    rel_theta = params.relation_params[rels]
    states = entity_states(spec, ent_theta)
    unitaries = relation_unitaries(spec, rel_theta)
    states_sh = entity_states(spec, _shift_bank(ent_theta, shift).reshape(-1, size)).reshape(len(ents), size, 2, dim)
    unitaries_sh = relation_unitaries(spec, _shift_bank(rel_theta, shift).reshape(-1, size)).reshape(
        len(rels), size, 2, dim, dim
    )

    bra = states[t_pos].conj()
    moved = np.einsum("ide,ie->id", unitaries[r_pos], states[h_pos])
    amp = np.einsum("id,id->i", bra, moved)
    amp_head = np.einsum("id,ide,ikse->iks", bra, unitaries[r_pos], states_sh[h_pos])
    amp_rel = np.einsum("id,iksde,ie->iks", bra, unitaries_sh[r_pos], states[h_pos])
    amp_tail = np.einsum("iksd,id->iks", states_sh[t_pos].conj(), moved)

    score = scheme.from_amplitude(amp)
    shifted = [scheme.from_amplitude(a) for a in (amp_head, amp_rel, amp_tail)]
    if mode is ScoreMode.SAMPLED:
        if not shots or shots < 1:
            raise ValueError("sampled mode needs a positive shot count")
        rng = np.random.default_rng(seed)
        score = _sampled(score, scheme, shots, rng)
        shifted = [_sampled(s, scheme, shots, rng) for s in shifted]

    weight = 2.0 * (score - y) / len(batch)
    d_head, d_rel, d_tail = (weight[:, None] * coef * (s[..., 0] - s[..., 1]) for s in shifted)

    grad_e = np.zeros_like(params.entity_params)
    grad_r = np.zeros_like(params.relation_params)
    # np.add.at accumulates unbuffered, in index order
    np.add.at(grad_e, h, d_head)
    np.add.at(grad_e, t, d_tail)
    np.add.at(grad_r, r, d_rel)
    return grad_e, grad_r


def gradient_parameter_shift(params: ParameterStore, batch: Sequence, scheme, coordinate) -> float:
    """One component of :func:`parameter_shift_gradient` (exact mode)."""
    group, index, position = Coordinate(*coordinate)
    table = {"entity": params.entity_params, "relation": params.relation_params}.get(group)
    if table is None:
        raise ValueError(f"coordinate group must be 'entity' or 'relation', got {group!r}")
    if not (0 <= index < table.shape[0] and 0 <= position < table.shape[1]):
        raise IndexError(f"coordinate {coordinate} out of range for shape {table.shape}")
    grad_e, grad_r = parameter_shift_gradient(params, batch, scheme)
    return float((grad_e if group == "entity" else grad_r)[index, position])


def gradient_spsa(
    params: ParameterStore,
    batch: Sequence,
    scheme,
    mode=ScoreMode.EXACT,
    seed: int = 0,
    perturbation: float = 0.1,
    shots: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Simultaneous-perturbation estimate from two loss evaluations.

    Every angle moves by ``+/- perturbation`` with a random sign; the two
    sampled losses (if any) use independent derived seeds.
    """
    if not perturbation > 0:
        raise ValueError(f"perturbation magnitude must be positive, got {perturbation}")
    rng = np.random.default_rng(derive_seed(seed, _SPSA))
    d_e = rng.choice([-1.0, 1.0], size=params.entity_params.shape)
    d_r = rng.choice([-1.0, 1.0], size=params.relation_params.shape)
    plus = params.shifted(perturbation * d_e, perturbation * d_r)
    minus = params.shifted(-perturbation * d_e, -perturbation * d_r)
    l_plus = mse_loss(plus, batch, scheme, mode, shots, derive_seed(seed, _SPSA, 1))
    l_minus = mse_loss(minus, batch, scheme, mode, shots, derive_seed(seed, _SPSA, 2))
    scale = (l_plus - l_minus) / (2 * perturbation)
    return scale * d_e, scale * d_r


# Optimizers ------------------------------------------------------------------


class SGD:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class Adam:
    def __init__(self, learning_rate: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = None
        self._v = None

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        if self._m is None:
            self._m = [np.zeros_like(p) for p in params]
            self._v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for p, g, m, v in zip(params, grads, self._m, self._v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1**self.t)
            v_hat = v / (1 - b2**self.t)
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


class GradientMethod(str, Enum):
    PARAMETER_SHIFT = "parameter_shift"
    SPSA = "spsa"


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass
class TrainConfig:
    scheme: ScoreScheme = ScoreScheme.COMPUTE_UNCOMPUTE
    n_qubits: int = 2
    n_layers: int = 2
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: Optional[int] = None  # None trains full-batch
    negatives_per_positive: int = 1
    seed: int = 0
    mode: ScoreMode = ScoreMode.EXACT
    shots: Optional[int] = None
    gradient_method: GradientMethod = GradientMethod.PARAMETER_SHIFT
    optimizer: OptimizerKind = OptimizerKind.ADAM
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    spsa_perturbation: float = 0.1

    def __post_init__(self):
        self.scheme = ScoreScheme(self.scheme)
        self.mode = ScoreMode(self.mode)
        self.gradient_method = GradientMethod(self.gradient_method)
        self.optimizer = OptimizerKind(self.optimizer)
        counts = {
            "n_qubits": self.n_qubits,
            "n_layers": self.n_layers,
            "epochs": self.epochs,
            "negatives_per_positive": self.negatives_per_positive,
        }
        if self.batch_size is not None:
            counts["batch_size"] = self.batch_size
        for name, value in counts.items():
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")
        if self.mode is ScoreMode.SAMPLED and (self.shots is None or self.shots < 1):
            raise ValueError("sampled mode needs a positive shot count")
        if not self.spsa_perturbation > 0:
            raise ValueError("spsa_perturbation must be positive")

    @property
    def spec(self) -> AnsatzSpec:
        return AnsatzSpec(self.n_qubits, self.n_layers)

    def make_optimizer(self):
        if self.optimizer is OptimizerKind.SGD:
            return SGD(self.learning_rate)
        return Adam(self.learning_rate, self.beta1, self.beta2, self.eps_adam)


@dataclass
class TrainResult:
    params: ParameterStore
    history: list[float]
    data: list[LabeledTriple] = field(default_factory=list)

    def __iter__(self):
        # unpacks as (params, history)
        return iter((self.params, self.history))


def train(
    kg: KnowledgeGraph,
    config: TrainConfig,
    extra: Iterable[LabeledTriple] = (),
    exclude: Iterable[tuple[int, int, int]] = (),
    init: Optional[ParameterStore] = None,
) -> TrainResult:
    """Hybrid training loop: score, MSE, gradient, optimizer step.

    The dataset is built once: every positive of ``kg`` with its sampled
    negatives, then ``extra`` labeled triples. ``history[i]`` is the loss
    on the whole dataset after epoch ``i``.
    """
    extra = [LabeledTriple(*e) for e in extra]
    data = negative_sample(kg, config.negatives_per_positive, config.seed, exclude=exclude) + extra
    params = init.copy() if init is not None else ParameterStore.initialize(
        config.spec, len(kg.entities), len(kg.relations), config.seed
    )
    optimizer = config.make_optimizer()
    size = len(data)
    batch_size = size if config.batch_size is None else min(config.batch_size, size)
    history = []
    for epoch in range(config.epochs):
        if batch_size < size:
            order = np.random.default_rng(derive_seed(config.seed, _SHUFFLE, epoch)).permutation(size)
        else:
            order = np.arange(size)
        for step, start in enumerate(range(0, size, batch_size)):
            batch = [data[i] for i in order[start : start + batch_size]]
            grad_seed = derive_seed(config.seed, _SAMPLE_GRAD, epoch, step)
            if config.gradient_method is GradientMethod.PARAMETER_SHIFT:
                grads = parameter_shift_gradient(params, batch, config.scheme, config.mode, config.shots, grad_seed)
            else:
                grads = gradient_spsa(
                    params, batch, config.scheme, config.mode, grad_seed, config.spsa_perturbation, config.shots
                )
            optimizer.step(list(params.arrays()), list(grads))
        loss = mse_loss(
            params, data, config.scheme, config.mode, config.shots, derive_seed(config.seed, _SAMPLE_LOSS, epoch)
        )
        history.append(loss)
        logger.debug("epoch %d loss %.6g", epoch, loss)
    return TrainResult(params, history, data)
