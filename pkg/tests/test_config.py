import json
import math

import pytest

from src.config import ExperimentConfig, SettingAngles, load_config
from src.core import SettingPair
from src.enums import Side
from src.errors import ConfigError
from src.settings import default_chunk_size


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestExperimentConfig:
    def test_defaults(self, config_factory):
        config = config_factory()
        assert config.pair_probabilities == (0.25, 0.25, 0.25, 0.25)
        assert config.seed == 0
        assert config.conditioning_side is Side.ALICE
        assert config.chunk_size == default_chunk_size
        assert config.probability(SettingPair(2, 1)) == 0.25

    def test_zero_trials_rejected(self, config_factory):
        with pytest.raises(ValueError):
            config_factory(trials=0)

    def test_probabilities_must_sum_to_one(self, config_factory):
        with pytest.raises(ValueError):
            config_factory(pair_probabilities=(0.3, 0.3, 0.3, 0.3))
        with pytest.raises(ValueError):
            config_factory(pair_probabilities=(1.5, -0.5, 0.0, 0.0))

    def test_seed_range(self, config_factory):
        assert config_factory(seed=2**64 - 1).seed == 2**64 - 1
        with pytest.raises(ValueError):
            config_factory(seed=-1)
        with pytest.raises(ValueError):
            config_factory(seed=2**64)

    def test_settings_normalized(self):
        settings = SettingAngles(a1=-math.pi / 2, a2=7.0, b1=0.0, b2=math.pi)
        assert settings.a1 == pytest.approx(3 * math.pi / 2)
        assert settings.a2 == pytest.approx(7.0 - 2 * math.pi)
        assert settings.for_pair(SettingPair(2, 2)) == (settings.a2, math.pi)

    def test_immutable(self, config_factory):
        config = config_factory()
        with pytest.raises(TypeError):
            config.trials = 5

    def test_json_round_trip(self, config_factory):
        config = config_factory(seed=99, conditioning_side=Side.BOB)
        data = config.to_json()
        assert data["conditioning_side"] == "bob"
        assert ExperimentConfig.from_json(json.loads(json.dumps(data))) == config

    def test_from_json_raises_config_error(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json({"model": "feldmann", "trials": 10})

    def test_unknown_fields_rejected(self, config_factory):
        data = config_factory().to_json()
        data["detector_efficiency"] = 0.9
        with pytest.raises(ConfigError):
            ExperimentConfig.from_json(data)

    def test_replace_revalidates(self, config_factory):
        config = config_factory()
        assert config.replace(trials=5).trials == 5
        with pytest.raises(ConfigError):
            config.replace(trials=0)


class TestLoadConfig:
    def test_json(self, tmp_path):
        path = write(
            tmp_path / "run.json",
            json.dumps({"model": "feldmann", "settings": {"a1": 0, "a2": 1, "b1": 2, "b2": 3}, "trials": 7}),
        )
        config = load_config(path)
        assert config.trials == 7
        assert config.settings.b2 == 3.0

    def test_yaml(self, tmp_path):
        path = write(
            tmp_path / "run.yaml",
            "model: uniform-sign\n"
            "settings: {a1: 0.0, a2: 1.0, b1: 2.0, b2: 3.0}\n"
            "trials: 11\n"
            "conditioning_side: bob\n",
        )
        config = load_config(path)
        assert config.model == "uniform-sign"
        assert config.conditioning_side is Side.BOB

    def test_degrees(self, tmp_path):
        path = write(
            tmp_path / "run.json",
            json.dumps({"model": "feldmann", "settings": {"a1": 0, "a2": 90, "b1": 45, "b2": 135}, "trials": 1}),
        )
        settings = load_config(path, degrees=True).settings
        assert settings.as_tuple() == pytest.approx((0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4))

    @pytest.mark.parametrize("text", ["{not json", "[1, 2]", '{"model": "feldmann"}'])
    def test_bad_files(self, tmp_path, text):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path / "run.json", text))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")
