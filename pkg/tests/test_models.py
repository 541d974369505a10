# -*- coding: utf-8 -*-
"""
Tests for the Pydantic configuration schemas and YAML round trip.
"""
import pytest
import yaml

from classroom_kd.errors import ConfigError
from classroom_kd.models import (
    AblationSuite,
    ClassroomConfig,
    DatasetConfig,
    ExperimentConfig,
    MlpSpec,
    OptimizerConfig,
    RankingConfig,
    dump_experiment_config,
    load_experiment_config,
    load_suite,
    parse_model,
)


class TestSpecs:
    """Tests for architecture specs."""

    def test_param_count(self):
        """Should count weights and biases of [2, 16, 10] as 218."""
        assert MlpSpec(layer_widths=[2, 16, 10]).param_count == 218

    def test_default_classroom_capacity_increases(self):
        """Should grow from student through peers to teacher."""
        spec = ClassroomConfig().spec()
        counts = [spec.student.param_count, *(p.param_count for p in spec.peers), spec.teacher.param_count]

        assert counts == sorted(counts)
        assert len(set(counts)) == len(counts)

    def test_mismatched_output_width(self):
        """Should reject a classroom whose models disagree on outputs."""
        with pytest.raises(ValueError):
            ClassroomConfig(peers=[[2, 8, 5]]).spec()

    def test_with_peer_count(self):
        """Should keep the first k peers and their seeds."""
        config = ClassroomConfig().with_peer_count(2)

        assert config.peers == [[2, 24, 10], [2, 32, 10]]
        assert config.seeds() == [100, 101, 102]


class TestOptimizerAndRanking:
    """Tests for optimizer and ranking settings."""

    def test_warmup_longer_than_run(self):
        """Should reject warm-up beyond the total epochs."""
        with pytest.raises(ValueError):
            OptimizerConfig(warmup_epochs=10, total_epochs=5)

    def test_default_scales(self):
        """Should default lambda to n + 1 for method A and 0.1 for method B."""
        assert RankingConfig().resolve_scale(4) == 5.0
        assert RankingConfig(method="method-b").resolve_scale(4) == 0.1
        assert RankingConfig(scale=2.5).resolve_scale(4) == 2.5

    @pytest.mark.parametrize(
        "model, data",
        [
            (OptimizerConfig, {"seed": -1}),
            (DatasetConfig, {"seed": -3}),
            (ClassroomConfig, {"peers": [], "mentor_seeds": [-1]}),
            (AblationSuite, {"suite": "temperature-mode", "seeds": [0, -2]}),
        ],
    )
    def test_negative_seeds_rejected(self, model, data):
        """Should reject negative seeds with a field-level ConfigError."""
        with pytest.raises(ConfigError) as excinfo:
            parse_model(model, data, "test.yaml")

        assert any("greater than or equal to 0" in line for line in excinfo.value.field_errors)


class TestExperimentConfig:
    """Tests for the experiment schema."""

    def test_defaults_validate(self):
        """Should accept the default toy experiment."""
        config = ExperimentConfig()

        assert config.schema_version == 1
        assert config.output_subdir == "toy"

    def test_unknown_key_rejected(self):
        """Should list an unknown key as a field error."""
        with pytest.raises(ConfigError) as excinfo:
            parse_model(ExperimentConfig, {"name": "x", "tempreature": 4}, "cfg.yaml")

        assert any("tempreature" in e for e in excinfo.value.field_errors)

    def test_shape_mismatch_with_dataset(self):
        """Should reject a classroom whose output width differs from the class count."""
        with pytest.raises(ConfigError):
            parse_model(
                ExperimentConfig,
                {"dataset": {"class_count": 3}},
                "cfg.yaml",
            )

    def test_csv_requires_path(self):
        """Should require a path for the CSV generator."""
        with pytest.raises(ValueError):
            DatasetConfig(generator="csv")

    def test_pose_widths(self):
        """Should derive input and output widths for pose data."""
        config = DatasetConfig(generator="pose", joints=4, bins=16)

        assert (config.input_dim, config.output_dim) == (3, 128)

    def test_round_trip(self, tmp_path, tiny_experiment):
        """Should parse back exactly what was dumped."""
        path = tmp_path / "exp.yaml"
        path.write_text(dump_experiment_config(tiny_experiment))

        assert load_experiment_config(path) == tiny_experiment

    def test_missing_file(self, tmp_path):
        """Should raise ConfigError for a missing file."""
        with pytest.raises(ConfigError, match="not found"):
            load_experiment_config(tmp_path / "nope.yaml")

    def test_invalid_yaml(self, tmp_path):
        """Should raise ConfigError for broken YAML."""
        path = tmp_path / "bad.yaml"
        path.write_text("name: [unclosed\n")

        with pytest.raises(ConfigError, match="not valid YAML"):
            load_experiment_config(path)

    def test_top_level_must_be_mapping(self, tmp_path):
        """Should reject a YAML list."""
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")

        with pytest.raises(ConfigError, match="mapping"):
            load_experiment_config(path)


class TestAblationSuite:
    """Tests for the suite schema."""

    def test_minimal_suite(self, tmp_path):
        """Should default to preset:toy and five seeds."""
        path = tmp_path / "suite.yaml"
        path.write_text(yaml.safe_dump({"suite": "ranking-method"}))

        suite = load_suite(path)

        assert suite.base == "preset:toy"
        assert suite.seeds == [0, 1, 2, 3, 4]
        assert suite.output_subdir == "ranking-method"

    def test_unknown_suite(self):
        """Should reject an unknown suite id."""
        with pytest.raises(ConfigError):
            parse_model(AblationSuite, {"suite": "nope"}, "suite.yaml")

    def test_empty_seeds(self):
        """Should require at least one seed."""
        with pytest.raises(ConfigError):
            parse_model(AblationSuite, {"suite": "classroom-size", "seeds": []}, "suite.yaml")

    def test_empty_variations(self):
        """Should reject an explicit empty variation list."""
        with pytest.raises(ConfigError):
            parse_model(AblationSuite, {"suite": "classroom-size", "variations": []}, "suite.yaml")

    def test_inline_base(self, tiny_experiment):
        """Should accept an inline base experiment."""
        suite = AblationSuite(suite="temperature-mode", base=tiny_experiment)

        assert isinstance(suite.base, ExperimentConfig)
