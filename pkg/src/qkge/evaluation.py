"""Link-prediction metrics and relation-pattern probes."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Iterable, Optional, Sequence

import numpy as np

from .ansatz import entity_states, relation_unitaries
from .scoring import ScoreScheme
from .training import KnowledgeGraph, LabeledTriple, ParameterStore, TrainConfig, train, triple_scores

HITS_AT = (1, 3, 10)


class Protocol(str, Enum):
    RAW = "raw"
    FILTERED = "filtered"


@dataclass(frozen=True)
class EvalReport:
    mrr: float
    hits_at: dict
    protocol: Protocol
    n_queries: int

    def as_record(self) -> dict:
        record = {"protocol": self.protocol.value, "n_queries": self.n_queries, "mrr": self.mrr}
        for k in HITS_AT:
            record[f"hits@{k}"] = self.hits_at[k]
        return record


def rank_of(scores: np.ndarray, true_index: int, exclude: Iterable[int] = ()) -> float:
    """Rank of ``scores[true_index]`` in descending order; ties share their mean rank.

    Indices in ``exclude`` are dropped from the candidate list (the true index
    never is).
    """
    scores = np.asarray(scores, dtype=np.float64)
    keep = np.ones(scores.size, dtype=bool)
    for i in exclude:
        if i != true_index:
            keep[i] = False
    target = scores[true_index]
    others = scores[keep]
    higher = int(np.count_nonzero(others > target))
    tied = int(np.count_nonzero(others == target))  # includes the target itself
    return 1.0 + higher + (tied - 1) / 2.0


def _candidate_scores(params: ParameterStore, scheme: ScoreScheme, head: int, relation: int, tail: int):
    """Scores of every entity as tail of ``(head, relation, ?)`` and as head of ``(?, relation, tail)``."""
    states = entity_states(params.spec, params.entity_params)
    unitary = relation_unitaries(params.spec, params.relation_params[relation : relation + 1])[0]
    tail_amp = states.conj() @ (unitary @ states[head])
    head_amp = np.einsum("d,de,ne->n", states[tail].conj(), unitary, states)
    return scheme.from_amplitude(tail_amp), scheme.from_amplitude(head_amp)


def _check_triple(kg: KnowledgeGraph, params: ParameterStore, h: int, r: int, t: int) -> None:
    n_e = params.entity_params.shape[0]
    n_r = params.relation_params.shape[0]
    if not (0 <= h < n_e and 0 <= t < n_e and 0 <= r < n_r):
        raise IndexError(f"triple {(h, r, t)} out of range for {n_e} entities and {n_r} relations")


def rank_tail(
    params: ParameterStore,
    head: int,
    relation: int,
    true_tail: int,
    kg: KnowledgeGraph,
    protocol=Protocol.RAW,
    scheme=ScoreScheme.COMPUTE_UNCOMPUTE,
) -> float:
    _check_triple(kg, params, head, relation, true_tail)
    scores, _ = _candidate_scores(params, ScoreScheme(scheme), head, relation, true_tail)
    exclude = ()
    if Protocol(protocol) is Protocol.FILTERED:
        exclude = [e for e in range(scores.size) if (head, relation, e) in kg.triple_set]
    return rank_of(scores, true_tail, exclude)


def rank_head(
    params: ParameterStore,
    true_head: int,
    relation: int,
    tail: int,
    kg: KnowledgeGraph,
    protocol=Protocol.RAW,
    scheme=ScoreScheme.COMPUTE_UNCOMPUTE,
) -> float:
    _check_triple(kg, params, true_head, relation, tail)
    _, scores = _candidate_scores(params, ScoreScheme(scheme), true_head, relation, tail)
    exclude = ()
    if Protocol(protocol) is Protocol.FILTERED:
        exclude = [e for e in range(scores.size) if (e, relation, tail) in kg.triple_set]
    return rank_of(scores, true_head, exclude)


def report_from_ranks(ranks: Sequence[float], protocol) -> EvalReport:
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ValueError("no queries to evaluate")
    hits = {k: float(np.mean(ranks <= k)) for k in HITS_AT}
    return EvalReport(float(np.mean(1.0 / ranks)), hits, Protocol(protocol), int(ranks.size))


def evaluate(
    params: ParameterStore,
    test_triples: Sequence[tuple[int, int, int]],
    kg: KnowledgeGraph,
    protocol=Protocol.FILTERED,
    scheme=ScoreScheme.COMPUTE_UNCOMPUTE,
) -> EvalReport:
    """MRR and hits@k over head- and tail-replacement queries.

    Under the filtered protocol, ``kg`` should hold every known true triple
    (train and test) so that other correct answers do not count against the
    target.
    """
    if len(test_triples) == 0:
        raise ValueError("empty test set")
    ranks = []
    for h, r, t in test_triples:
        ranks.append(rank_tail(params, h, r, t, kg, protocol, scheme))
        ranks.append(rank_head(params, h, r, t, kg, protocol, scheme))
    return report_from_ranks(ranks, protocol)


# Relation patterns -----------------------------------------------------------


class Pattern(str, Enum):
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"
    INVERSE = "inverse"
    COMPOSITION = "composition"


@dataclass
class PatternCase:
    """A small graph whose held-out triples witness one relation pattern.

    ``probes`` are training positives whose scores are reported next to the
    held-out ones (e.g. the forward pair in the antisymmetric case).
    """

    pattern: Pattern
    kg: KnowledgeGraph
    negatives: list[LabeledTriple] = field(default_factory=list)
    held_out: list[LabeledTriple] = field(default_factory=list)
    probes: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        for h, r, t, _ in self.held_out:
            if (h, r, t) in self.kg.triple_set:
                raise ValueError(f"held-out triple {(h, r, t)} also appears in training")


def load_pattern_case(pattern) -> PatternCase:
    """Read a shipped fixture: rows of ``split, head, relation, tail, label``.

    ``split`` is ``train`` (label 1 adds a graph triple, label 0 an explicit
    negative), ``heldout``, or ``probe``.
    """
    pattern = Pattern(pattern)
    text = resources.files("qkge").joinpath("data", "patterns", f"{pattern.value}.tsv").read_text("utf-8")
    return parse_pattern_case(pattern, text.splitlines())


def parse_pattern_case(pattern, lines: Iterable[str]) -> PatternCase:
    rows = [row for row in csv.reader(lines, delimiter="\t") if row and not row[0].startswith("#")]
    positives = [(h, r, t) for split, h, r, t, y in rows if split == "train" and y == "1"]
    kg = KnowledgeGraph.from_named(positives)
    # later rows may introduce names not seen among the positives
    ent, rel = dict(kg.entity_index), dict(kg.relation_index)

    def index(h, r, t):
        return ent.setdefault(h, len(ent)), rel.setdefault(r, len(rel)), ent.setdefault(t, len(ent))

    negatives, held_out, probes = [], [], []
    for split, h, r, t, y in rows:
        if split == "train" and y == "0":
            negatives.append(LabeledTriple(*index(h, r, t), 0))
        elif split == "heldout":
            held_out.append(LabeledTriple(*index(h, r, t), int(y)))
        elif split == "probe":
            probes.append(index(h, r, t))
        elif split != "train":
            raise ValueError(f"unknown split {split!r}")
    kg = KnowledgeGraph(tuple(ent), tuple(rel), kg.triples)
    return PatternCase(Pattern(pattern), kg, negatives, held_out, probes)


@dataclass
class PatternResult:
    pattern: Pattern
    final_loss: float
    held_out: list[tuple[tuple[int, int, int], int, float]]  # (triple, expected label, score)
    probes: list[tuple[tuple[int, int, int], float]]

    def rows(self, kg: KnowledgeGraph) -> list[dict]:
        out = []
        for (h, r, t), label, score in self.held_out:
            out.append({"role": "heldout", "triple": _name(kg, h, r, t), "label": label, "score": score})
        for (h, r, t), score in self.probes:
            out.append({"role": "probe", "triple": _name(kg, h, r, t), "label": 1, "score": score})
        return out


def _name(kg: KnowledgeGraph, h: int, r: int, t: int) -> str:
    return f"{kg.entities[h]} {kg.relations[r]} {kg.entities[t]}"


def pattern_check(pattern, scheme, config: TrainConfig, case: Optional[PatternCase] = None) -> PatternResult:
    """Train on a pattern fixture and score its held-out and probe triples."""
    case = case or load_pattern_case(pattern)
    scheme = ScoreScheme(scheme)
    config = TrainConfig(**{**config.__dict__, "scheme": scheme})
    held = [(h, r, t) for h, r, t, _ in case.held_out]
    result = train(case.kg, config, extra=case.negatives, exclude=held)
    params = result.params

    held_scores = triple_scores(params, held, scheme) if held else []
    probe_scores = triple_scores(params, case.probes, scheme) if case.probes else []
    return PatternResult(
        case.pattern,
        result.history[-1],
        [(tuple(x[:3]), x.label, float(s)) for x, s in zip(case.held_out, held_scores)],
        [(tuple(p), float(s)) for p, s in zip(case.probes, probe_scores)],
    )
