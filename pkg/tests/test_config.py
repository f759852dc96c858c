"""Tests for pipeline configuration loading and validation."""

import json

import pytest

from graphqa.config import PipelineConfig, load_config, save_config
from graphqa.errors import DataError


class TestDefaults:
    def test_constructs_with_defaults(self):
        config = PipelineConfig()
        assert config.k_nodes == 3
        assert config.k_edges == 3
        assert config.edge_cost == 0.5
        assert config.demos_m == 2
        assert config.layers == 3
        assert config.d_llm == 128
        assert config.projector_activation == "tanh"
        assert config.seed == 0
        assert config.llm_url is None

    def test_frozen(self):
        config = PipelineConfig()
        with pytest.raises(AttributeError):
            config.seed = 5


class TestValidation:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"k_nodes": 0},
            {"k_edges": -1},
            {"edge_cost": 0.0},
            {"edge_cost": -2.0},
            {"c_max": 0},
            {"demos_m": -1},
            {"layers": 0},
            {"d_in": 0},
            {"d_hidden": 0},
            {"d_llm": 0},
            {"projector_activation": "relu"},
            {"budget_chars": 0},
            {"timeout_secs": 0.0},
            {"max_tokens": 0},
            {"concurrency": 0},
            {"lambda_reg": -0.5},
        ],
    )
    def test_bad_values_rejected(self, overrides):
        with pytest.raises(DataError):
            PipelineConfig(**overrides)

    def test_replace_validates(self):
        config = PipelineConfig()
        with pytest.raises(DataError):
            config.replace(layers=0)

    def test_replace_overrides(self):
        config = PipelineConfig().replace(seed=7, k_nodes=5)
        assert config.seed == 7
        assert config.k_nodes == 5
        assert config.k_edges == 3


class TestLoadSave:
    def test_round_trip(self, tmp_path):
        config = PipelineConfig(seed=3, k_nodes=4, llm_url="http://x/api")
        path = tmp_path / "config.json"
        save_config(config, path)
        assert load_config(path) == config

    def test_partial_file_uses_defaults(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"seed": 9}))
        config = load_config(path)
        assert config.seed == 9
        assert config.layers == 3

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"seed": 1, "bogus_knob": 2}))
        with pytest.raises(DataError, match="bogus_knob"):
            load_config(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(DataError):
            load_config(path)

    def test_non_object_payload(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps([1, 2, 3]))
        with pytest.raises(DataError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_config(tmp_path / "absent.json")

    def test_bad_value_in_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"layers": 0}))
        with pytest.raises(DataError):
            load_config(path)

    def test_to_dict_json_serializable(self):
        payload = PipelineConfig().to_dict()
        assert json.loads(json.dumps(payload)) == payload
