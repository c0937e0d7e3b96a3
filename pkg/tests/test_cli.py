"""End-to-end tests for the command-line interface.

Commands run in-process through ``cli.main(argv)`` so each test sees the
real exit code and output without subprocess overhead.
"""

import json

import pytest

from renas import cli, datastore, pipeline, tensornet
from renas.cellgraph import CellGraph
from renas.cli import (
    EXIT_MISSING,
    EXIT_MODEL,
    EXIT_OK,
    EXIT_SCHEMA,
    EXIT_USAGE,
    BadConfig,
    MissingData,
    load_config,
)


@pytest.fixture(scope="module")
def store_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "store.jsonl"
    cells = datastore.sample_cells(24, seed=5)
    datastore.save_jsonl(datastore.synthetic_store(cells), str(path))
    return str(path)


@pytest.fixture(scope="module")
def model_path(tmp_path_factory, store_path):
    path = tmp_path_factory.mktemp("cli") / "m.model"
    rc = cli.main(
        ["train", "--data", store_path, "--model", str(path),
         "--epochs", "2", "--batch", "8"]
    )
    assert rc == EXIT_OK
    return str(path)


class TestLoadConfig:
    def test_missing_file_is_missing_data(self):
        with pytest.raises(MissingData):
            load_config("/nonexistent/run.ini")

    def test_unknown_section_rejected(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[mystery]\nx = 1\n")
        with pytest.raises(BadConfig, match="mystery"):
            load_config(str(p))

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[training]\nepochz = 5\n")
        with pytest.raises(BadConfig, match="epochz"):
            load_config(str(p))

    def test_bad_value_rejected(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[training]\nepochs = soon\n")
        with pytest.raises(BadConfig, match="epochs"):
            load_config(str(p))

    def test_nonpositive_guard(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text("[training]\nbatch = 0\n")
        with pytest.raises(BadConfig, match="batch"):
            load_config(str(p))

    def test_typed_sections(self, tmp_path):
        p = tmp_path / "c.ini"
        p.write_text(
            "[loss]\nmargin = 0.25\nphi = logistic\n"
            "[training]\naugment = yes\nseed = 9\n"
        )
        cfg = load_config(str(p))
        assert cfg["loss"] == {"margin": 0.25, "phi": "logistic"}
        assert cfg["training"] == {"augment": True, "seed": 9}


class TestGenSynthetic:
    def test_exhaustive_small_space(self, tmp_path, capsys):
        out = tmp_path / "s.jsonl"
        assert cli.main(["gen-synthetic", "--out", str(out), "--max-nodes", "3"]) == EXIT_OK
        assert "wrote 7 records" in capsys.readouterr().out
        assert len(datastore.load_jsonl(str(out))) == 7

    def test_exhaustive_needs_small_space(self, tmp_path):
        out = tmp_path / "s.jsonl"
        assert cli.main(["gen-synthetic", "--out", str(out), "--max-nodes", "6"]) == EXIT_USAGE

    def test_sampled_store_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        for out in (a, b):
            rc = cli.main(
                ["gen-synthetic", "--out", str(out), "--count", "15", "--seed", "3"]
            )
            assert rc == EXIT_OK
        assert a.read_bytes() == b.read_bytes()
        assert len(a.read_text().splitlines()) == 15


class TestEncode:
    def test_tensor_shape_and_values(self, tmp_path, capsys):
        cell = CellGraph.from_text("3\n011\n001\n000\nINPUT,CONV3X3,OUTPUT\n")
        src = tmp_path / "cell.txt"
        src.write_text(cell.to_text())
        assert cli.main(["encode", "--cell", str(src)]) == EXIT_OK
        tensor = json.loads(capsys.readouterr().out)
        assert len(tensor) == 19
        assert all(len(ch) == 7 and all(len(r) == 7 for r in ch) for ch in tensor)
        from renas.costmodel import Skeleton

        expected = pipeline.encode_cell(cell, Skeleton())
        assert tensor == expected.tolist()

    def test_missing_cell_file(self, tmp_path):
        assert cli.main(["encode", "--cell", str(tmp_path / "no.txt")]) == EXIT_MISSING

    def test_malformed_cell_file(self, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("2\n01\n00\nINPUT,TELEPORT\n")
        assert cli.main(["encode", "--cell", str(bad)]) == EXIT_SCHEMA


class TestTrain:
    def test_zero_epochs_saves_initialized_model(self, tmp_path, store_path):
        out = tmp_path / "init.model"
        rc = cli.main(["train", "--data", store_path, "--model", str(out), "--epochs", "0"])
        assert rc == EXIT_OK
        model = tensornet.load(str(out))
        assert model.seed == 0

    def test_log_first_line_holds_resolved_config(self, tmp_path, store_path):
        out, log = tmp_path / "m.model", tmp_path / "t.log"
        rc = cli.main(
            ["train", "--data", store_path, "--model", str(out), "--log", str(log),
             "--epochs", "2", "--batch", "8", "--lambda", "0.5", "--phi", "logistic"]
        )
        assert rc == EXIT_OK
        lines = log.read_text().splitlines()
        head = json.loads(lines[0])
        assert head["command"] == "train"
        assert head["epochs"] == 2
        assert head["batch"] == 8
        assert head["lambda"] == 0.5
        assert head["phi"] == "logistic"
        assert head["skeleton"]["input_hw"] == 32
        assert [json.loads(ln)["epoch"] for ln in lines[1:]] == [1, 2]

    def test_flags_override_config_file(self, tmp_path, store_path):
        ini = tmp_path / "run.ini"
        ini.write_text("[training]\nepochs = 9\nseed = 4\n[loss]\nmargin = 0.3\n")
        out, log = tmp_path / "m.model", tmp_path / "t.log"
        rc = cli.main(
            ["train", "--data", store_path, "--model", str(out), "--log", str(log),
             "--config", str(ini), "--epochs", "1", "--batch", "8"]
        )
        assert rc == EXIT_OK
        head = json.loads(log.read_text().splitlines()[0])
        assert head["epochs"] == 1  # flag beat the file
        assert head["seed"] == 4  # file beat the default
        assert head["margin"] == 0.3

    def test_repeat_runs_write_identical_model_files(self, tmp_path, store_path):
        outs = []
        for name in ("a.model", "b.model"):
            out = tmp_path / name
            rc = cli.main(
                ["train", "--data", store_path, "--model", str(out),
                 "--epochs", "2", "--batch", "8", "--seed", "11"]
            )
            assert rc == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_missing_paths_rejected(self, store_path):
        assert cli.main(["train", "--data", store_path]) == EXIT_USAGE

    def test_missing_data_file(self, tmp_path):
        rc = cli.main(
            ["train", "--data", str(tmp_path / "no.jsonl"), "--model", str(tmp_path / "m")]
        )
        assert rc == EXIT_MISSING


class TestEval:
    def test_report_text_and_json(self, tmp_path, store_path, model_path, capsys):
        js = tmp_path / "report.json"
        rc = cli.main(["eval", "--model", model_path, "--data", store_path, "--json", str(js)])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "ktau" in out and "samples" in out
        report = json.loads(js.read_text())
        assert set(report) == {"ktau", "n", "concordant", "discordant", "tied"}
        assert report["n"] == 24

    def test_missing_model(self, tmp_path, store_path):
        rc = cli.main(["eval", "--model", str(tmp_path / "no.model"), "--data", store_path])
        assert rc == EXIT_MISSING

    def test_corrupt_model(self, tmp_path, store_path, model_path):
        stub = tmp_path / "trunc.model"
        stub.write_bytes(open(model_path, "rb").read()[:100])
        assert cli.main(["eval", "--model", str(stub), "--data", store_path]) == EXIT_MODEL

    def test_malformed_data(self, tmp_path, model_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{}\n")
        assert cli.main(["eval", "--model", model_path, "--data", str(bad)]) == EXIT_SCHEMA


class TestSearch:
    def test_ea_output_is_deterministic(self, tmp_path, model_path):
        outs = []
        for name in ("a.jsonl", "b.jsonl"):
            out = tmp_path / name
            rc = cli.main(
                ["search", "--model", model_path, "--generations", "3",
                 "--population", "8", "--seed", "2", "--top-k", "4",
                 "--max-nodes", "4", "--out", str(out)]
            )
            assert rc == EXIT_OK
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        rows = [json.loads(ln) for ln in outs[0].decode().splitlines()]
        assert [r["rank"] for r in rows] == [1, 2, 3, 4]
        scores = [r["score"] for r in rows]
        assert scores == sorted(scores, reverse=True)

    def test_exhaustive_ranks_a_store(self, tmp_path, store_path, model_path, capsys):
        rc = cli.main(
            ["search", "--model", model_path, "--mode", "exhaustive",
             "--data", store_path, "--top-k", "5"]
        )
        assert rc == EXIT_OK
        rows = [json.loads(ln) for ln in capsys.readouterr().out.splitlines()]
        assert len(rows) == 5

    def test_exhaustive_requires_store(self, model_path):
        assert cli.main(["search", "--model", model_path, "--mode", "exhaustive"]) == EXIT_USAGE


class TestAnalyze:
    def test_table_and_json_rows(self, tmp_path, store_path, capsys):
        js = tmp_path / "rows.json"
        rc = cli.main(["analyze", "--data", store_path, "--json", str(js)])
        assert rc == EXIT_OK
        text = capsys.readouterr().out
        assert text.splitlines()[0].startswith("conv3")
        rows = json.loads(js.read_text())
        assert len(rows) == 12
        assert {r["io_distance"] for r in rows} == set(range(1, 7))
