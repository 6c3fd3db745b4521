import json

import pytest
from structlog.testing import capture_logs

from config.config_manager import (
    SEED_ENV_VAR,
    ConfigManager,
    ConfigValidationError,
    config_hash,
    resolved_document,
)
from parsers.config_parser import ConfigParser, ConfigParsingError
from validators.experiment_validator import ExperimentValidator, dimension_of


@pytest.fixture
def manager():
    return ConfigManager()


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV_VAR, raising=False)


class TestConfigManager:
    def test_defaults(self, manager):
        config = manager.resolve()
        assert config.master_seed == 0
        assert config.msa.N == 2
        assert config.msa_params().p == 13.0
        assert config.model.disorder.high_energy == 20.0

    def test_user_config_merges_over_defaults(self, manager):
        config = manager.resolve({"msa": {"trials": 17}}, {"msa": {"k_max": 2}})
        assert config.msa.trials == 17
        assert config.msa.k_max == 2
        assert config.msa.m == 0.2
        assert manager.defaults["msa"]["trials"] == 200

    def test_seed_precedence(self, manager, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "7")
        assert manager.resolve().master_seed == 7
        assert manager.resolve({"master_seed": 5}).master_seed == 5
        assert manager.resolve({"master_seed": 5}, seed=9).master_seed == 9

    def test_bad_seed_env(self, manager, monkeypatch):
        monkeypatch.setenv(SEED_ENV_VAR, "seven")
        with pytest.raises(ConfigValidationError):
            manager.resolve()

    @pytest.mark.parametrize("user_config", [
        {"bogus": 1},
        {"model": {"disorder": {"distribution": "gaussian"}}},
        {"msa": {"m": 0.1, "m1": 0.2}},
        {"spectrum": {"n": 3}},
        {"msa": {"p": 10.0}},
        {"dynamics": {"interval_energy": [2.0, 1.0]}},
    ])
    def test_invalid_documents(self, manager, user_config):
        with pytest.raises(ConfigValidationError):
            manager.resolve(user_config)

    def test_section_cannot_become_a_value(self, manager):
        with pytest.raises(ConfigValidationError, match="msa is a section"):
            manager.resolve({"msa": 3})
        with pytest.raises(ConfigValidationError, match="model.disorder is a section"):
            manager.resolve(overrides={"model": {"disorder": "uniform"}})

    def test_replaced_scan_axis_is_logged(self, manager):
        with capture_logs() as logs:
            config = manager.resolve(overrides={"wegner": {"half_sides_grid_units": [4]}})
        assert config.wegner.half_sides_grid_units == [4]
        replaced = [e for e in logs if e["event"] == "scan axis replaced"]
        assert [e["key"] for e in replaced] == ["wegner.half_sides_grid_units"]
        assert replaced[0]["previous"] == [8, 16, 32]

    def test_missing_config_directory(self, tmp_path):
        with pytest.raises(ConfigValidationError):
            ConfigManager(str(tmp_path))

    def test_hash_is_stable(self, manager):
        a = manager.resolve({"msa": {"trials": 3}})
        b = manager.resolve({"msa": {"trials": 3}})
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(manager.resolve({"msa": {"trials": 3}}, seed=1))

    def test_hash_ignores_execution_settings(self, manager):
        base = manager.resolve()
        tuned = manager.resolve({"msa": {"threads": 8}, "output": {"directory": "elsewhere"},
                                 "logging": {"level": "DEBUG"}})
        assert config_hash(base) == config_hash(tuned)

    def test_resolved_document_is_explicit(self, manager):
        document = resolved_document(manager.resolve())
        assert document["master_seed"] == 0
        assert document["msa"]["p"] is None
        json.dumps(document)

    def test_plot_tables(self, manager):
        assert manager.get_plot_table("weakint")["split_by"] == "E"
        assert manager.get_plot_table("no_such_op") == {}


class TestConfigParser:
    @pytest.fixture
    def parser(self):
        return ConfigParser()

    def test_no_file(self, parser):
        assert parser.parse_file(None) == {}

    def test_json_and_yaml(self, parser, tmp_path):
        json_path = tmp_path / "run.json"
        json_path.write_text('{"msa": {"trials": 5}}')
        yaml_path = tmp_path / "run.yaml"
        yaml_path.write_text("msa:\n  trials: 5\n")
        assert parser.parse_file(str(json_path)) == parser.parse_file(str(yaml_path)) == {"msa": {"trials": 5}}

    def test_empty_yaml(self, parser, tmp_path):
        path = tmp_path / "empty.yml"
        path.write_text("")
        assert parser.parse_file(str(path)) == {}

    @pytest.mark.parametrize("filename, text", [
        ("broken.json", '{"msa": '),
        ("list.json", "[1, 2]"),
        ("broken.yaml", "msa: [1, 2"),
    ])
    def test_bad_files(self, parser, tmp_path, filename, text):
        path = tmp_path / filename
        path.write_text(text)
        with pytest.raises(ConfigParsingError):
            parser.parse_file(str(path))

    def test_missing_file(self, parser, tmp_path):
        with pytest.raises(ConfigParsingError):
            parser.parse_file(str(tmp_path / "absent.json"))

    def test_overrides(self, parser):
        overrides = parser.parse_overrides([
            "msa.trials=50",
            "wegner.half_sides_grid_units=[8, 16]",
            "model.disorder.distribution=bernoulli",
            "model.interaction.h=0.05",
        ])
        assert overrides == {
            "msa": {"trials": 50},
            "wegner": {"half_sides_grid_units": [8, 16]},
            "model": {"disorder": {"distribution": "bernoulli"}, "interaction": {"h": 0.05}},
        }

    @pytest.mark.parametrize("assignments", [["msa.trials"], ["msa..trials=1"], ["=3"], ["msa=1", "msa.trials=2"]])
    def test_bad_overrides(self, parser, assignments):
        with pytest.raises(ConfigParsingError):
            parser.parse_overrides(assignments)


class TestExperimentValidator:
    @pytest.fixture
    def validator(self):
        return ExperimentValidator()

    def test_defaults_valid_for_spectrum(self, manager, validator):
        result = validator.validate(manager.resolve(), "spectrum")
        assert result.is_valid
        assert result.validated_config is not None

    def test_incommensurate_spacing(self, manager, validator):
        config = manager.resolve({"model": {"domain": {"spacing_grid_units": 0.3}}})
        result = validator.validate(config, "spectrum", "basic")
        assert not result.is_valid
        assert any("spectrum" in e for e in result.errors)

    def test_dimension_cap_only_checked_beyond_basic(self, manager, validator):
        config = manager.resolve({"model": {"domain": {"max_dim": 100}}})
        assert validator.validate(config, "spectrum", "basic").is_valid
        assert not validator.validate(config, "spectrum", "full").is_valid

    def test_weakint_needs_zero(self, manager, validator):
        config = manager.resolve({"weakint": {"h_values": [0.1, 0.2]}})
        assert not validator.validate(config, "weakint-scan").is_valid
        assert validator.validate(config, "spectrum").is_valid

    def test_coarse_energy_grid(self, manager, validator):
        config = manager.resolve({"msa": {"grid_points": 5, "L0_grid_units": 4, "k_max": 0}})
        result = validator.validate(config, "msa-run")
        assert any("grid_points" in e for e in result.errors)

    def test_bernoulli_warns_then_fails_strict(self, manager, validator):
        config = manager.resolve({"model": {"disorder": {"distribution": "bernoulli"}}})
        full = validator.validate(config, "spectrum", "full")
        assert full.is_valid and any("Bernoulli" in w for w in full.warnings)
        assert not validator.validate(config, "spectrum", "strict").is_valid

    def test_unknown_level(self, manager, validator):
        assert not validator.validate(manager.resolve(), "spectrum", "paranoid").is_valid

    def test_dimension_of(self):
        assert dimension_of(2, 8) == 225
        assert dimension_of(1, 2, spacing=0.5) == 7
