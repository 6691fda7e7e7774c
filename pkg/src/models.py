"""
Concrete hidden-variable models and the catalog that names them.

- ``feldmann``: planar sign-of-cosine model whose λ density depends on one
  setting, p(λ|u) = ¼|cos(λ - u)|. Local, realistic, violates measurement
  independence, reproduces E(a, b) = -cos(a - b).
- ``uniform-sign``: the same outcome functions with a uniform,
  setting-independent λ. Respects measurement independence, so |S| <= 2.
- ``singlet-oracle``: the quantum singlet correlation only. Nothing to sample.
"""
from __future__ import annotations

import math
from collections.abc import Iterator, Mapping

import numpy as np

from .core import ConditioningContext, ModelSpec, angular_separation, sign_array, wrap
from .enums import ConditioningKind
from .errors import InvalidInputError, UnknownModelError, UnsupportedContextError
from .settings import TWO_PI
from .type_aliases import FloatArray, SignArray

FELDMANN = "feldmann"
UNIFORM_SIGN = "uniform-sign"
SINGLET_ORACLE = "singlet-oracle"

_HALF_PI = 0.5 * math.pi


def alice_sign(setting: float, lam: FloatArray) -> SignArray:
    return sign_array(np.cos(lam - setting))


def bob_sign(setting: float, lam: FloatArray) -> SignArray:
    return -sign_array(np.cos(lam - setting))


def quarter_points(center: float) -> tuple[float, ...]:
    """
    :return: the two zeros of cos(λ - center) on [0, 2π)
    """
    return tuple(sorted((wrap(center + _HALF_PI), wrap(center - _HALF_PI))))


def _feldmann_density(lam: FloatArray, context: ConditioningContext) -> FloatArray:
    if context.kind is ConditioningKind.UNCONDITIONED:
        raise UnsupportedContextError(
            f"model {FELDMANN!r} defines only setting-conditioned densities"
        )
    return 0.25 * np.abs(np.cos(lam - context.center))


def _feldmann_sampler(uniforms: FloatArray, centers: FloatArray) -> FloatArray:
    # Each half-period [c - π/2, c + π/2) and [c + π/2, c + 3π/2) carries mass ½
    # and has CDF ¼(1 + sin x) in the shifted coordinate, so one uniform
    # picks the half and inverts the arcsin inside it.
    upper = uniforms >= 0.5
    v = 2.0 * uniforms - upper
    offsets = np.arcsin(np.clip(2.0 * v - 1.0, -1.0, 1.0)) + math.pi * upper
    return np.mod(centers + offsets, TWO_PI)


def _feldmann_density_points(context: ConditioningContext) -> tuple[float, ...]:
    if context.kind is ConditioningKind.UNCONDITIONED:
        return ()
    return quarter_points(context.center)


def feldmann_model() -> ModelSpec:
    """
    Planar model with A = sgn cos(λ - a), B = -sgn cos(λ - b) and
    p(λ|u) = ¼|cos(λ - u)| for u the conditioning setting of either wing.

    :return: the model spec
    """
    return ModelSpec(
        name=FELDMANN,
        outcome_a=alice_sign,
        outcome_b=bob_sign,
        lambda_density=_feldmann_density,
        analytic_correlation=lambda a, b: -math.cos(float(a) - float(b)),
        contexts=frozenset(
            {ConditioningKind.ON_ALICE_SETTING, ConditioningKind.ON_BOB_SETTING}
        ),
        sampler=_feldmann_sampler,
        outcome_breaks=quarter_points,
        density_breaks=_feldmann_density_points,
        density_zeros=_feldmann_density_points,
        description="planar sign model, λ density conditioned on one setting",
    )


def _uniform_density(lam: FloatArray, context: ConditioningContext) -> FloatArray:
    if context.kind is not ConditioningKind.UNCONDITIONED:
        raise UnsupportedContextError(
            f"model {UNIFORM_SIGN!r} has a setting-independent density"
        )
    return np.full_like(np.asarray(lam, dtype=np.float64), 1.0 / TWO_PI)


def _uniform_sampler(uniforms: FloatArray, centers: FloatArray) -> FloatArray:
    return np.mod(TWO_PI * uniforms, TWO_PI)


def uniform_sign_correlation(a: float, b: float) -> float:
    """
    E(a, b) = -1 + 2θ/π for the smaller separation θ of a and b.
    """
    return -1.0 + 2.0 * angular_separation(a, b) / math.pi


def uniform_sign_model() -> ModelSpec:
    """
    Same outcome functions as ``feldmann_model`` with p(λ) = 1/(2π).

    :return: the model spec
    """
    return ModelSpec(
        name=UNIFORM_SIGN,
        outcome_a=alice_sign,
        outcome_b=bob_sign,
        lambda_density=_uniform_density,
        analytic_correlation=uniform_sign_correlation,
        contexts=frozenset({ConditioningKind.UNCONDITIONED}),
        sampler=_uniform_sampler,
        outcome_breaks=quarter_points,
        density_breaks=lambda context: (),
        density_zeros=lambda context: (),
        description="planar sign model, uniform setting-independent λ",
    )


def singlet_oracle() -> ModelSpec:
    """
    Quantum singlet correlation E(a, b) = -cos(a - b), nothing else.

    :return: the model spec
    """
    return ModelSpec(
        name=SINGLET_ORACLE,
        analytic_correlation=lambda a, b: -math.cos(float(a) - float(b)),
        description="quantum singlet correlation (oracle only)",
    )


class ModelCatalog(Mapping[str, ModelSpec]):
    """
    Name -> model registry used by the CLI and the parallel workers.
    """
    def __init__(self, models: list[ModelSpec] | None = None) -> None:
        self._entries: dict[str, ModelSpec] = {}
        for model in models or []:
            self.register(model)

    @classmethod
    def default(cls) -> ModelCatalog:
        return cls([feldmann_model(), uniform_sign_model(), singlet_oracle()])

    def register(self, model: ModelSpec) -> None:
        if model.name in self._entries:
            raise InvalidInputError(f"model {model.name!r} is already registered")
        self._entries[model.name] = model

    def get_model(self, name: str) -> ModelSpec:
        """
        :param name: catalog name
        :return: the model
        :raises UnknownModelError: naming every catalog entry
        """
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownModelError(name, list(self._entries)) from None

    def __getitem__(self, name: str) -> ModelSpec:
        return self.get_model(name)

    def __contains__(self, name: object) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


CATALOG = ModelCatalog.default()
