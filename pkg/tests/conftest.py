import math

import numpy as np
import pytest

from src.config import ExperimentConfig, SettingAngles
from src.models import CATALOG, FELDMANN, SINGLET_ORACLE, UNIFORM_SIGN

OPTIMAL = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)


@pytest.fixture
def feldmann():
    return CATALOG[FELDMANN]


@pytest.fixture
def uniform_sign():
    return CATALOG[UNIFORM_SIGN]


@pytest.fixture
def oracle():
    return CATALOG[SINGLET_ORACLE]


@pytest.fixture
def optimal_settings() -> SettingAngles:
    return SettingAngles.from_tuple(OPTIMAL)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def make_config(model: str = FELDMANN, settings=OPTIMAL, trials: int = 10_000, **fields) -> ExperimentConfig:
    return ExperimentConfig(
        model=model,
        settings=SettingAngles.from_tuple(settings).dict(),
        trials=trials,
        **fields,
    )


@pytest.fixture
def config_factory():
    return make_config
