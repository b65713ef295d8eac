"""Command-line entry points: train, evaluate, score, compare-schemes.

Every command accepts ``--config FILE`` (a JSON object keyed by option name,
dashes or underscores); options given on the command line override it.
Exit status is 0 on success, 1 on invalid input and 2 on runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ansatz import PARAMETER_ORDER, AnsatzSpec, param_count
from .evaluation import HITS_AT, Protocol, evaluate
from .noise import (
    DEFAULT_READOUT_FIDELITIES,
    DEFAULT_TWO_QUBIT_ERRORS,
    NOISE_COLUMNS,
    NoiseModel,
    rows_to_csv,
    scheme_bias_sweep,
)
from .resources import RESOURCE_COLUMNS, estimate_resources
from .scoring import ScoreMode, ScoreScheme, estimate_score, exact_score, oracle_overlap
from .training import KnowledgeGraph, ParameterStore, TrainConfig, train

logger = logging.getLogger("qkge")

CHECKPOINT_VERSION = 1


class ValidationError(Exception):
    """Bad user input; reported with exit status 1."""


# Files -----------------------------------------------------------------------


def read_triples(path) -> list[tuple[str, str, str]]:
    """Tab-separated ``head, relation, tail`` lines; blank lines are skipped."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ValidationError(f"cannot read triples file {path}: {exc}") from exc
    triples = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not all(f.strip() for f in fields):
            raise ValidationError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        triples.append(tuple(f.strip() for f in fields))
    return triples


def ingest_triples(path) -> KnowledgeGraph:
    named = read_triples(path)
    if not named:
        raise ValidationError(f"{path}: empty knowledge graph")
    kg = KnowledgeGraph.from_named(named)
    duplicates = len(named) - len(kg.triples)
    if duplicates:
        logger.warning("%s: dropped %d duplicate triple(s)", path, duplicates)
    return kg


def write_atomic(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def write_outputs(files: dict) -> None:
    """Write a set of fully rendered files; nothing is written before all render."""
    for path, text in files.items():
        write_atomic(path, text)


def save_checkpoint(path, params: ParameterStore, kg: KnowledgeGraph, provenance: dict) -> None:
    write_atomic(path, checkpoint_json(params, kg, provenance))


def checkpoint_json(params: ParameterStore, kg: KnowledgeGraph, provenance: dict) -> str:
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "spec": {
            "n_qubits": params.spec.n_qubits,
            "n_layers": params.spec.n_layers,
            "parameter_order": PARAMETER_ORDER,
        },
        # floats go through repr, which round-trips binary64 exactly
        "entities": {name: params.entity_params[i].tolist() for i, name in enumerate(kg.entities)},
        "relations": {name: params.relation_params[i].tolist() for i, name in enumerate(kg.relations)},
        "provenance": provenance,
    }
    return json.dumps(doc, indent=1) + "\n"


def load_checkpoint(path) -> tuple[ParameterStore, KnowledgeGraph, dict]:
    """Parameters plus an edge-free graph carrying the entity and relation names."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read checkpoint {path}: {exc}") from exc
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise ValidationError(f"{path}: unsupported checkpoint version {doc.get('format_version')!r}")
    spec = AnsatzSpec(int(doc["spec"]["n_qubits"]), int(doc["spec"]["n_layers"]))
    entities, relations = list(doc["entities"]), list(doc["relations"])
    ent = np.array([doc["entities"][e] for e in entities], dtype=np.float64).reshape(-1, param_count(spec))
    rel = np.array([doc["relations"][r] for r in relations], dtype=np.float64).reshape(-1, param_count(spec))
    kg = KnowledgeGraph(tuple(entities), tuple(relations), ())
    return ParameterStore(spec, ent, rel), kg, doc.get("provenance", {})


def _csv(rows: list[dict], columns: Sequence[str]) -> str:
    return rows_to_csv(rows, columns)


# Configuration -----------------------------------------------------------------

TRAIN_DEFAULTS = {
    "scheme": "cu",
    "n_qubits": 2,
    "n_layers": 2,
    "learning_rate": 0.01,
    "epochs": 100,
    "batch_size": None,
    "negatives_per_positive": 1,
    "seed": 0,
    "mode": "exact",
    "shots": None,
    "gradient_method": "parameter_shift",
    "optimizer": "adam",
    "beta1": 0.9,
    "beta2": 0.999,
    "eps_adam": 1e-8,
    "spsa_perturbation": 0.1,
}


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit command-line options."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ValidationError("config file must hold a JSON object")
        for key, value in loaded.items():
            key = key.replace("-", "_")
            if key not in merged:
                raise ValidationError(f"unknown config key {key!r}")
            merged[key] = value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _train_config(values: dict) -> TrainConfig:
    try:
        return TrainConfig(**{k: values[k] for k in TRAIN_DEFAULTS})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"invalid training configuration: {exc}") from exc


def _config_hash(values: dict) -> str:
    blob = json.dumps(values, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _require_file(path, what: str) -> Path:
    if path is None:
        raise ValidationError(f"missing {what} path")
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"{what} not found: {path}")
    return path


# Commands ----------------------------------------------------------------------


def command_train(args: argparse.Namespace) -> int:
    values = _merge(args, {**TRAIN_DEFAULTS, "dataset": None, "out": None})
    dataset = _require_file(values["dataset"], "dataset")
    if values["out"] is None:
        raise ValidationError("missing output directory (--out)")
    config = _train_config(values)
    kg = ingest_triples(dataset)

    start = time.perf_counter()
    result = train(kg, config)
    wall = time.perf_counter() - start

    out = Path(values["out"])
    run_values = {k: values[k] for k in TRAIN_DEFAULTS}
    provenance = {
        "config_hash": _config_hash(run_values),
        "epochs": config.epochs,
        "final_loss": result.history[-1],
        "scheme": config.scheme.value,
    }
    loss_rows = [{"epoch": i + 1, "loss": loss} for i, loss in enumerate(result.history)]
    metadata = {
        "command": "train",
        "dataset": str(dataset),
        "config": run_values,
        "n_entities": len(kg.entities),
        "n_relations": len(kg.relations),
        "n_triples": len(kg.triples),
        "n_training_examples": len(result.data),
        "final_loss": result.history[-1],
        "wall_time_s": wall,
    }
    write_outputs({
        out / "checkpoint.json": checkpoint_json(result.params, kg, provenance),
        out / "loss.csv": _csv(loss_rows, ("epoch", "loss")),
        out / "run.json": json.dumps(metadata, indent=1, default=str) + "\n",
    })
    print(f"trained {config.epochs} epochs, final loss {result.history[-1]!r}; outputs in {out}")
    return 0


def _resolve(named, kg: KnowledgeGraph):
    known, unknown = [], []
    for h, r, t in named:
        try:
            known.append(kg.index_triple(h, r, t))
        except KeyError:
            unknown.append((h, r, t))
    return known, unknown


def command_evaluate(args: argparse.Namespace) -> int:
    values = _merge(args, {"checkpoint": None, "test": None, "dataset": None, "out": None,
                           "protocol": "filtered", "scheme": "cu"})
    checkpoint = _require_file(values["checkpoint"], "checkpoint")
    test_path = _require_file(values["test"], "test set")
    if values["dataset"] is not None:
        _require_file(values["dataset"], "dataset")
    if values["out"] is None:
        raise ValidationError("missing output directory (--out)")
    try:
        protocol, scheme = Protocol(values["protocol"]), ScoreScheme(values["scheme"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc

    params, names, _ = load_checkpoint(checkpoint)
    test, skipped = _resolve(read_triples(test_path), names)
    for triple in skipped:
        logger.warning("skipping test triple with unknown names: %s", "\t".join(triple))
    if not test:
        raise ValidationError("every test triple references names missing from the checkpoint")
    known = list(dict.fromkeys(test))
    if values["dataset"] is not None:
        train_known, _ = _resolve(read_triples(values["dataset"]), names)
        known = list(dict.fromkeys(train_known + known))
    kg = KnowledgeGraph(names.entities, names.relations, tuple(known))

    report = evaluate(params, test, kg, protocol, scheme)
    record = {"scheme": scheme.value, **report.as_record(), "skipped": len(skipped)}
    doc = {**record, "skipped_triples": ["\t".join(t) for t in skipped], "checkpoint": str(checkpoint)}
    columns = ("scheme", "protocol", "n_queries", "mrr", *[f"hits@{k}" for k in HITS_AT], "skipped")
    out = Path(values["out"])
    write_outputs({
        out / "report.json": json.dumps(doc, indent=1) + "\n",
        out / "report.csv": _csv([record], columns),
    })
    print(f"MRR {report.mrr!r} over {report.n_queries} queries ({len(skipped)} skipped)")
    return 0


def command_score(args: argparse.Namespace) -> int:
    values = _merge(args, {"checkpoint": None, "scheme": "cu", "mode": "exact", "shots": None, "seed": 0})
    checkpoint = _require_file(values["checkpoint"], "checkpoint")
    try:
        scheme, mode = ScoreScheme(values["scheme"]), ScoreMode(values["mode"])
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc
    params, names, _ = load_checkpoint(checkpoint)
    try:
        h, r, t = names.index_triple(args.head, args.relation, args.tail)
    except KeyError as exc:
        raise ValidationError(f"unknown name {exc.args[0]!r}") from exc
    thetas = (params.entity_params[h], params.relation_params[r], params.entity_params[t])
    if mode is ScoreMode.EXACT:
        result = exact_score(scheme, params.spec, *thetas)
    else:
        if not values["shots"] or values["shots"] < 1:
            raise ValidationError("sampled mode needs --shots >= 1")
        result = estimate_score(scheme, params.spec, *thetas, values["shots"], values["seed"])
    print(repr(result.value))
    return 0


COMPARE_DEFAULTS = {
    "out": None,
    "n_values": [1, 2, 3, 4],
    "n": 2,
    "n_layers": 2,
    "samples": 20,
    "seed": 0,
    "shots": None,
    "readout": list(DEFAULT_READOUT_FIDELITIES),
    "p2": list(DEFAULT_TWO_QUBIT_ERRORS),
}

EQUIVALENCE_COLUMNS = (
    "n", "draws", "max_abs_swap_minus_cu", "max_abs_swap_minus_oracle",
    "max_abs_cu_minus_oracle", "max_abs_switch_minus_oracle",
)


def equivalence_rows(n_values, n_layers: int, draws: int, seed: int) -> list[dict]:
    rows = []
    for n in sorted(n_values):
        spec = AnsatzSpec(n, n_layers)
        rng = np.random.default_rng([seed, n])
        worst = np.zeros(4)
        for _ in range(draws):
            th, tr, tt = rng.uniform(-np.pi, np.pi, size=(3, param_count(spec)))
            amp = oracle_overlap(spec, th, tr, tt)
            swap = exact_score(ScoreScheme.SWAP, spec, th, tr, tt).value
            cu = exact_score(ScoreScheme.COMPUTE_UNCOMPUTE, spec, th, tr, tt).value
            switch = exact_score(ScoreScheme.SWITCH, spec, th, tr, tt).value
            diffs = [abs(swap - cu), abs(swap - abs(amp) ** 2), abs(cu - abs(amp) ** 2), abs(switch - amp.real)]
            worst = np.maximum(worst, diffs)
        rows.append(dict(zip(EQUIVALENCE_COLUMNS, [n, draws, *map(float, worst)])))
    return rows


def command_compare_schemes(args: argparse.Namespace) -> int:
    values = _merge(args, COMPARE_DEFAULTS)
    if values["out"] is None:
        raise ValidationError("missing output directory (--out)")
    try:
        spec = AnsatzSpec(int(values["n"]), int(values["n_layers"]))
        models = [NoiseModel(f, p) for f in values["readout"] for p in values["p2"]]
        n_values = [int(n) for n in values["n_values"]]
        if not n_values or min(n_values) < 1 or int(values["samples"]) < 1:
            raise ValueError("n values and samples must be positive")
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from exc

    start = time.perf_counter()
    equivalence = equivalence_rows(n_values, spec.n_layers, int(values["samples"]), int(values["seed"]))
    resources = [estimate_resources(s, spec).as_row() for s in ScoreScheme]
    noise_rows = []
    for policy in ("perfect", "random"):
        for model in models:
            noise_rows.extend(scheme_bias_sweep(
                n_values, model, shots=values["shots"], samples=int(values["samples"]),
                seed=int(values["seed"]), n_layers=spec.n_layers, policy=policy,
            ))
    wall = time.perf_counter() - start

    out = Path(values["out"])
    metadata = {"command": "compare-schemes", "config": values, "wall_time_s": wall,
                "noise_shots": "exact distribution" if values["shots"] is None else values["shots"]}
    write_outputs({
        out / "equivalence.csv": _csv(equivalence, EQUIVALENCE_COLUMNS),
        out / "resources.csv": _csv(resources, RESOURCE_COLUMNS),
        out / "noise.csv": _csv(noise_rows, NOISE_COLUMNS),
        out / "run.json": json.dumps(metadata, indent=1, default=str) + "\n",
    })
    print(f"wrote equivalence.csv, resources.csv, noise.csv to {out}")
    return 0


# Parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    schemes = [s.value for s in ScoreScheme]

    p = sub.add_parser("train", help="train embeddings on a triples file")
    p.add_argument("--config")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--scheme", choices=schemes)
    p.add_argument("--n-qubits", dest="n_qubits", type=int)
    p.add_argument("--layers", dest="n_layers", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--negatives", dest="negatives_per_positive", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=[m.value for m in ScoreMode])
    p.add_argument("--shots", type=int)
    p.add_argument("--gradient", dest="gradient_method", choices=["parameter_shift", "spsa"])
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.set_defaults(func=command_train)

    p = sub.add_parser("evaluate", help="link-prediction metrics for a checkpoint")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--test")
    p.add_argument("--dataset", help="training triples, used by the filtered protocol")
    p.add_argument("--out")
    p.add_argument("--protocol", choices=[p.value for p in Protocol])
    p.add_argument("--scheme", choices=schemes)
    p.set_defaults(func=command_evaluate)

    p = sub.add_parser("score", help="print the score of one triple")
    p.add_argument("--config")
    p.add_argument("--checkpoint")
    p.add_argument("--scheme", choices=schemes)
    p.add_argument("--mode", choices=[m.value for m in ScoreMode])
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("head")
    p.add_argument("relation")
    p.add_argument("tail")
    p.set_defaults(func=command_score)

    p = sub.add_parser("compare-schemes", help="equivalence, resource and noise tables")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--n-values", dest="n_values", type=int, nargs="+")
    p.add_argument("--n", type=int, help="register size for resources.csv")
    p.add_argument("--layers", dest="n_layers", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--readout", type=float, nargs="+")
    p.add_argument("--p2", type=float, nargs="+")
    p.set_defaults(func=command_compare_schemes)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"runtime error: {exc!r}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
