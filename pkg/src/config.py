from __future__ import annotations

import json
import math
from pathlib import Path

import yaml
from pydantic import BaseModel, ValidationError, root_validator, validator

from .core import SettingPair, wrap
from .enums import Side
from .errors import ConfigError
from .settings import default_chunk_size
from .type_aliases import Settings4

MAX_SEED = 2**64 - 1
PROBABILITY_TOLERANCE = 1e-12


class SettingAngles(BaseModel):
    """
    The four measurement settings, in radians, normalized into [0, 2π).
    """
    a1: float
    a2: float
    b1: float
    b2: float

    class Config:
        allow_mutation = False
        extra = "forbid"

    @validator("a1", "a2", "b1", "b2")
    def _normalize(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("settings must be finite radians")
        return wrap(value)

    @classmethod
    def from_tuple(cls, values: Settings4) -> SettingAngles:
        a1, a2, b1, b2 = values
        return cls(a1=a1, a2=a2, b1=b1, b2=b2)

    def as_tuple(self) -> Settings4:
        return self.a1, self.a2, self.b1, self.b2

    def alice(self, index: int) -> float:
        return self.a1 if index == 1 else self.a2

    def bob(self, index: int) -> float:
        return self.b1 if index == 1 else self.b2

    def for_pair(self, pair: SettingPair) -> tuple[float, float]:
        return self.alice(pair.alice_index), self.bob(pair.bob_index)


class ExperimentConfig(BaseModel):
    """
    Everything needed to reproduce one simulated Bell-test run.
    Inherits from BaseModel to make it pydantic compliant.
    """
    model: str
    settings: SettingAngles
    pair_probabilities: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)
    trials: int
    seed: int = 0
    conditioning_side: Side = Side.ALICE
    chunk_size: int = default_chunk_size

    class Config:
        allow_mutation = False
        extra = "forbid"

    @validator("trials")
    def _positive_trials(cls, value: int) -> int:
        if value < 1:
            raise ValueError("trials must be at least 1")
        return value

    @validator("chunk_size")
    def _positive_chunk(cls, value: int) -> int:
        if value < 1:
            raise ValueError("chunk_size must be at least 1")
        return value

    @validator("seed")
    def _seed_range(cls, value: int) -> int:
        if not 0 <= value <= MAX_SEED:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return value

    @validator("pair_probabilities")
    def _probabilities(cls, values: tuple[float, ...]) -> tuple[float, ...]:
        if any(not math.isfinite(p) or p < 0.0 for p in values):
            raise ValueError("pair probabilities must be non-negative reals")
        if abs(math.fsum(values) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"pair probabilities must sum to 1, got {math.fsum(values)!r}")
        return values

    @root_validator(skip_on_failure=True)
    def _model_name(cls, values: dict) -> dict:
        if not values.get("model"):
            raise ValueError("model name must not be empty")
        return values

    def probability(self, pair: SettingPair) -> float:
        return self.pair_probabilities[pair.column]

    def replace(self, **changes) -> ExperimentConfig:
        """
        Copy with some fields changed; the copy is validated again.

        :param changes: field overrides
        :return: the new config
        """
        data = self.to_json()
        data.update(changes)
        return self.from_json(data)

    def to_json(self) -> dict:
        """
        Convert to json

        :return: a json-compatible dict
        """
        return json.loads(self.json())

    @classmethod
    def from_json(cls, json_data: dict) -> ExperimentConfig:
        """
        Construct from json

        :param json_data: a dict shaped like ``to_json`` output
        :return: the validated config
        :raises ConfigError: if validation fails
        """
        try:
            return cls.parse_obj(json_data)
        except ValidationError as error:
            raise ConfigError(f"invalid experiment config: {error}") from error


def load_config(path: str | Path, degrees: bool = False) -> ExperimentConfig:
    """
    Read an experiment config from a JSON or YAML file.

    :param path: the config file
    :param degrees: the four settings in the file are in degrees
    :return: the validated config
    :raises ConfigError: unreadable, unparseable or invalid file
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as error:
        raise ConfigError(f"cannot read config {path}: {error}") from error

    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as error:
        raise ConfigError(f"cannot parse config {path}: {error}") from error

    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping at the top level")

    if degrees and isinstance(data.get("settings"), dict):
        try:
            data["settings"] = {
                key: math.radians(float(value)) for key, value in data["settings"].items()
            }
        except (TypeError, ValueError) as error:
            raise ConfigError(f"settings in {path} must be numbers: {error}") from error

    return ExperimentConfig.from_json(data)
