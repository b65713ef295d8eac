import csv
import json
from pathlib import Path

import numpy as np
import pytest

from qkge.cli import (
    ValidationError,
    checkpoint_json,
    ingest_triples,
    load_checkpoint,
    main,
    save_checkpoint,
)
from qkge.training import ParameterStore, KnowledgeGraph
from qkge.ansatz import AnsatzSpec


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def toy(tmp_path):
    return write(tmp_path / "toy.tsv", "a\tr\tb\n")


@pytest.fixture
def trained(tmp_path, toy):
    out = tmp_path / "run"
    assert main(["train", "--dataset", str(toy), "--out", str(out), "--epochs", "60", "--lr", "0.05"]) == 0
    return out


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestIngest:
    def test_two_triples(self, tmp_path):
        kg = ingest_triples(write(tmp_path / "kg.tsv", "a\tr\tb\nb\tr\ta\n"))
        assert (len(kg.entities), len(kg.relations), len(kg.triples)) == (2, 1, 2)

    def test_empty(self, tmp_path):
        with pytest.raises(ValidationError, match="empty knowledge graph"):
            ingest_triples(write(tmp_path / "kg.tsv", "\n"))

    def test_bad_line_number(self, tmp_path):
        with pytest.raises(ValidationError, match=":2:"):
            ingest_triples(write(tmp_path / "kg.tsv", "a\tr\tb\na\tr\n"))

    def test_duplicates_dropped(self, tmp_path, caplog):
        kg = ingest_triples(write(tmp_path / "kg.tsv", "a\tr\tb\na\tr\tb\n"))
        assert len(kg.triples) == 1
        assert "duplicate" in caplog.text


class TestCheckpoint:
    def test_round_trip_exact(self, tmp_path):
        spec = AnsatzSpec(2, 2)
        params = ParameterStore.initialize(spec, 3, 2, seed=5)
        params.entity_params[0, 0] = 0.1 + 0.2  # not representable with few digits
        kg = KnowledgeGraph(("x", "y", "z"), ("p", "q"), ())
        path = tmp_path / "ck.json"
        save_checkpoint(path, params, kg, {"note": "t"})
        loaded, names, prov = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.entity_params, params.entity_params)
        np.testing.assert_array_equal(loaded.relation_params, params.relation_params)
        assert names.entities == kg.entities and names.relations == kg.relations
        assert prov == {"note": "t"}
        assert checkpoint_json(loaded, names, prov) == path.read_text()

    def test_bad_version(self, tmp_path):
        path = write(tmp_path / "ck.json", json.dumps({"format_version": 99}))
        with pytest.raises(ValidationError):
            load_checkpoint(path)


class TestTrain:
    def test_outputs(self, trained):
        assert (trained / "checkpoint.json").is_file()
        rows = read_csv(trained / "loss.csv")
        assert len(rows) == 60 and rows[0]["epoch"] == "1"
        meta = json.loads((trained / "run.json").read_text())
        assert meta["config"]["epochs"] == 60 and "wall_time_s" in meta

    def test_default_config(self, tmp_path, toy):
        out = tmp_path / "default"
        assert main(["train", "--dataset", str(toy), "--out", str(out)]) == 0
        assert len(read_csv(out / "loss.csv")) == 100

    def test_rerun_byte_identical(self, tmp_path, toy, trained):
        again = tmp_path / "again"
        main(["train", "--dataset", str(toy), "--out", str(again), "--epochs", "60", "--lr", "0.05"])
        for name in ("loss.csv", "checkpoint.json"):
            assert (again / name).read_bytes() == (trained / name).read_bytes()

    def test_config_file_overridden_by_flags(self, tmp_path, toy):
        cfg = write(tmp_path / "cfg.json", json.dumps({"epochs": 7, "learning_rate": 0.02}))
        out = tmp_path / "cfg_run"
        assert main(["train", "--config", str(cfg), "--dataset", str(toy), "--out", str(out), "--epochs", "3"]) == 0
        meta = json.loads((out / "run.json").read_text())
        assert meta["config"]["epochs"] == 3 and meta["config"]["learning_rate"] == 0.02

    def test_missing_dataset(self, tmp_path, capsys):
        out = tmp_path / "none"
        assert main(["train", "--dataset", str(tmp_path / "nope.tsv"), "--out", str(out)]) == 1
        assert not out.exists()
        assert "not found" in capsys.readouterr().err

    def test_invalid_config_value(self, tmp_path, toy):
        assert main(["train", "--dataset", str(toy), "--out", str(tmp_path / "x"), "--lr", "-1"]) == 1


class TestEvaluate:
    def run(self, tmp_path, trained, test, scheme="cu", name="ev"):
        out = tmp_path / name
        code = main(["evaluate", "--checkpoint", str(trained / "checkpoint.json"), "--test", str(test),
                     "--out", str(out), "--scheme", scheme])
        return code, out

    def test_perfect_toy(self, tmp_path, trained, toy):
        code, out = self.run(tmp_path, trained, toy)
        assert code == 0
        assert json.loads((out / "report.json").read_text())["mrr"] == 1.0

    def test_unknown_entity_counted(self, tmp_path, trained):
        test = write(tmp_path / "test.tsv", "a\tr\tb\na\tr\tzz\n")
        code, out = self.run(tmp_path, trained, test)
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["skipped"] == 1 and report["n_queries"] == 2

    def test_swap_and_cu_identical(self, tmp_path, trained, toy):
        _, a = self.run(tmp_path, trained, toy, "swap", "a")
        _, b = self.run(tmp_path, trained, toy, "cu", "b")
        ra, rb = read_csv(a / "report.csv")[0], read_csv(b / "report.csv")[0]
        ra.pop("scheme"), rb.pop("scheme")
        assert ra == rb


class TestScore:
    def score(self, capsys, trained, *args):
        capsys.readouterr()
        code = main(["score", "--checkpoint", str(trained / "checkpoint.json"), *args])
        return code, capsys.readouterr()

    def test_positive_triple(self, capsys, trained):
        code, out = self.score(capsys, trained, "a", "r", "b")
        assert code == 0
        assert 0 <= float(out.out) <= 1

    def test_swap_equals_cu(self, capsys, trained):
        _, a = self.score(capsys, trained, "--scheme", "swap", "a", "r", "b")
        _, b = self.score(capsys, trained, "--scheme", "cu", "a", "r", "b")
        assert abs(float(a.out) - float(b.out)) <= 1e-10

    def test_unknown_name(self, capsys, trained):
        code, out = self.score(capsys, trained, "a", "r", "nobody")
        assert code == 1 and "nobody" in out.err

    def test_sampled(self, capsys, trained):
        code, out = self.score(capsys, trained, "--mode", "sampled", "--shots", "100", "a", "r", "b")
        assert code == 0 and float(out.out) in {k / 100 for k in range(101)}


def test_compare_schemes(tmp_path):
    out = tmp_path / "cmp"
    args = ["compare-schemes", "--out", str(out), "--n-values", "1", "2", "--samples", "3",
            "--readout", "0.95", "--p2", "0", "0.01"]
    assert main(args) == 0
    resources = read_csv(out / "resources.csv")
    assert [r["scheme"] for r in resources] == ["switch", "swap", "cu"]
    assert [int(r["n_qubits"]) for r in resources] == [3, 5, 2]
    for row in read_csv(out / "equivalence.csv"):
        assert float(row["max_abs_swap_minus_cu"]) <= 1e-10
    noise = read_csv(out / "noise.csv")
    perfect_cu = [r for r in noise if r["policy"] == "perfect" and r["scheme"] == "cu" and r["p2"] == "0.0"]
    for row in perfect_cu:
        assert float(row["mean_noisy"]) == pytest.approx(0.95 ** int(row["n"]), abs=1e-12)
    again = tmp_path / "cmp2"
    main(args[:2] + [str(again)] + args[3:])
    for name in ("equivalence.csv", "resources.csv", "noise.csv"):
        assert (again / name).read_bytes() == (out / name).read_bytes()


def test_missing_subcommand_args(tmp_path):
    assert main(["evaluate", "--checkpoint", str(tmp_path / "x.json"), "--test", "t", "--out", "o"]) == 1
