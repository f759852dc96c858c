"""Tests for the command-line surface and its exit-code contract."""

import json
from pathlib import Path

import pytest

from graphqa.cli import main
from graphqa.embed import EmbeddingCache
from graphqa.encoder import load_checkpoint
from graphqa.experts import load_cluster_model
from graphqa.store import load_dataset

DATA = Path(__file__).resolve().parent.parent / "data" / "sample"
POOL = str(DATA / "pool.jsonl")
DEV = str(DATA / "dev.jsonl")


class TestIngest:
    def test_round_trip(self, tmp_path, capsys):
        out = tmp_path / "normalized.jsonl"
        assert main(["ingest", "--input", DEV, "--output", str(out)]) == 0
        assert "ingested 5 examples" in capsys.readouterr().out
        assert len(load_dataset(out)) == 5

    def test_output_is_deterministic(self, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        main(["ingest", "--input", DEV, "--output", str(a)])
        main(["ingest", "--input", DEV, "--output", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_missing_input(self, tmp_path, capsys):
        code = main(["ingest", "--input", str(tmp_path / "no.jsonl"),
                     "--output", str(tmp_path / "out.jsonl")])
        assert code == 2
        assert "error" in capsys.readouterr().err


class TestEmbed:
    def test_fills_cache(self, tmp_path, capsys):
        out = tmp_path / "cache.json"
        assert main(["embed", "--input", DEV, "--output", str(out)]) == 0
        assert "cached 35 vectors" in capsys.readouterr().out
        cache = EmbeddingCache.load(out)
        assert len(cache) == 35

    def test_cache_bytes_reproducible(self, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        main(["embed", "--input", DEV, "--output", str(a)])
        main(["embed", "--input", DEV, "--output", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestRetrieve:
    def test_stdout_json(self, capsys):
        assert main(["retrieve", "--dataset", DEV, "--id", "dev-porcini"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["id"] == "dev-porcini"
        assert payload["kernel"].startswith("pcst_")
        assert payload["nodes"]
        assert "|" in payload["textualized"]
        assert "trace" not in payload

    def test_trace_flag_adds_stage_detail(self, capsys):
        assert main(["--trace", "retrieve", "--dataset", DEV,
                     "--id", "dev-porcini"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert "trace" in payload

    def test_output_file(self, tmp_path, capsys):
        out = tmp_path / "sub.json"
        assert main(["retrieve", "--dataset", DEV, "--id", "dev-morel",
                     "--output", str(out)]) == 0
        assert capsys.readouterr().out == ""
        assert json.loads(out.read_text())["id"] == "dev-morel"

    def test_unknown_id(self, capsys):
        assert main(["retrieve", "--dataset", DEV, "--id", "nope"]) == 2
        assert "not found" in capsys.readouterr().err


class TestClusterDemos:
    def test_writes_model(self, tmp_path, capsys):
        out = tmp_path / "clusters.json"
        assert main(["cluster-demos", "--pool", POOL, "--output", str(out)]) == 0
        assert "experts" in capsys.readouterr().out
        model = load_cluster_model(out)
        assert len(model.assignments) == 8

    def test_c_max_caps_expert_count(self, tmp_path):
        out = tmp_path / "clusters.json"
        assert main(["cluster-demos", "--pool", POOL, "--output", str(out),
                     "--c-max", "2"]) == 0
        assert load_cluster_model(out).c_star <= 2


class TestTrain:
    def test_writes_checkpoint(self, tmp_path, capsys):
        out = tmp_path / "encoder.json"
        assert main(["train", "--pool", POOL, "--output", str(out),
                     "--epochs", "5"]) == 0
        assert "loss" in capsys.readouterr().out
        params = load_checkpoint(out)
        assert params.dims.layers == 3

    def test_zero_epochs_saves_initial(self, tmp_path, capsys):
        out = tmp_path / "encoder.json"
        assert main(["train", "--pool", POOL, "--output", str(out),
                     "--epochs", "0"]) == 0
        assert "untrained" in capsys.readouterr().out
        load_checkpoint(out)


class TestGradcheck:
    def test_passes_at_default_tolerance(self, capsys):
        assert main(["gradcheck"]) == 0
        assert "PASS" in capsys.readouterr().out

    def test_impossible_tolerance_fails(self, capsys):
        assert main(["gradcheck", "--tol", "1e-300"]) == 2
        assert "FAIL" in capsys.readouterr().out


class TestAnswer:
    def test_prints_answer(self, capsys):
        assert main(["answer", "--dataset", DEV, "--id", "dev-porcini",
                     "--pool", POOL]) == 0
        assert capsys.readouterr().out.strip() == "pine trees"

    def test_answer_without_pool(self, capsys):
        assert main(["answer", "--dataset", DEV, "--id", "dev-porcini"]) == 0
        assert capsys.readouterr().out.strip() == "pine trees"

    def test_trace_emits_json(self, capsys):
        assert main(["--trace", "answer", "--dataset", DEV,
                     "--id", "dev-porcini", "--pool", POOL]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"answer", "trace", "trace_digest"}
        assert payload["answer"] == "pine trees"

    def test_deterministic_stdout(self, capsys):
        main(["answer", "--dataset", DEV, "--id", "dev-chanterelle",
              "--pool", POOL])
        first = capsys.readouterr().out
        main(["answer", "--dataset", DEV, "--id", "dev-chanterelle",
              "--pool", POOL])
        assert capsys.readouterr().out == first

    def test_stub_flag_overrides_configured_url(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"llm_url": "http://127.0.0.1:9/api"}))
        assert main(["--config", str(config), "answer", "--dataset", DEV,
                     "--id", "dev-porcini", "--pool", POOL, "--stub"]) == 0
        assert capsys.readouterr().out.strip() == "pine trees"


class TestEvaluate:
    def test_summary_and_artifacts(self, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        manifest_path = tmp_path / "manifest.json"
        code = main(["evaluate", "--dataset", DEV, "--pool", POOL,
                     "--report", str(report_path),
                     "--manifest", str(manifest_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "n=5 correct=5 accuracy=1.0000 hit_at_1=1.0000" in out
        report = json.loads(report_path.read_text())
        assert report["accuracy"] == 1.0
        assert len(report["per_example"]) == 5
        manifest = json.loads(manifest_path.read_text())
        assert manifest["providers"]["llm"] == "stub"
        assert len(manifest["traces"]) == 5

    def test_hit_metric_flag(self, capsys):
        assert main(["evaluate", "--dataset", DEV, "--pool", POOL,
                     "--metric", "hit_at_1"]) == 0
        assert "accuracy=1.0000" in capsys.readouterr().out

    def test_seed_override_accepted(self, capsys):
        assert main(["--seed", "7", "evaluate", "--dataset", DEV,
                     "--pool", POOL]) == 0
        assert "n=5" in capsys.readouterr().out


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["retrieve", "--dataset", DEV, "--bogus"])
        assert exc.value.code == 1

    def test_missing_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1

    def test_bad_metric_choice_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["evaluate", "--dataset", DEV, "--metric", "f1"])
        assert exc.value.code == 1

    def test_help_exits_zero(self):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0

    def test_data_error_is_two(self, tmp_path):
        assert main(["answer", "--dataset", str(tmp_path / "no.jsonl"),
                     "--id", "x"]) == 2

    def test_invalid_config_is_two(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text("{broken")
        assert main(["--config", str(config), "retrieve", "--dataset", DEV,
                     "--id", "dev-porcini"]) == 2
        assert "error" in capsys.readouterr().err

    def test_unreachable_provider_is_three(self, capsys):
        code = main(["answer", "--dataset", DEV, "--id", "dev-porcini",
                     "--pool", POOL, "--llm-url", "http://127.0.0.1:9/api",
                     "--timeout-secs", "0.5"])
        assert code == 3
        assert "error" in capsys.readouterr().err
