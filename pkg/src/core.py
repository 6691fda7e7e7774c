"""
Value types and the hidden-variable model interface shared by every module.

Angles are radians on the circle, outcomes are the classical values +1/-1,
and a ``ModelSpec`` bundles the two local outcome functions with the
(possibly setting-conditioned) density of the hidden variable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import ClassVar

import numpy as np

from .enums import ConditioningKind, Side
from .errors import InvalidInputError, OracleOnlyError, UnsupportedContextError
from .settings import TWO_PI
from .type_aliases import (
    BreakpointFn,
    ContextPointFn,
    CorrelationFn,
    DensityFn,
    FloatArray,
    InverseSampler,
    OutcomeFn,
    RealLike,
    SignArray,
)


def _check_finite(raw: RealLike, what: str) -> None:
    if not np.all(np.isfinite(raw)):
        raise InvalidInputError(f"{what} must be finite, got {raw!r}")


def wrap(raw: float) -> float:
    """
    Reduce a finite radian value into [0, 2π).

    :param raw: radians
    :return: the representative in [0, 2π)
    """
    value = math.fmod(raw, TWO_PI)
    if value < 0.0:
        value += TWO_PI
    # fmod + shift can round up to exactly 2π for tiny negative inputs
    if value >= TWO_PI:
        value = 0.0
    return value


def wrap_array(raw: FloatArray) -> FloatArray:
    """
    Vectorised ``wrap``.

    :param raw: radians
    :return: array with every entry in [0, 2π)
    """
    values = np.mod(np.asarray(raw, dtype=np.float64), TWO_PI)
    return np.where(values >= TWO_PI, 0.0, values)


@dataclass(frozen=True, order=True)
class Angle:
    """
    A measurement setting or hidden-variable value on the circle.

    The stored value is always in [0, 2π).
    """
    value: float

    def __post_init__(self) -> None:
        _check_finite(self.value, "angle")
        object.__setattr__(self, "value", wrap(float(self.value)))

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"Angle({self.value!r})"


def normalize(raw: float) -> Angle:
    """
    Build the canonical ``Angle`` for a raw radian value.

    :param raw: finite radians
    :return: the normalized angle
    :raises InvalidInputError: if ``raw`` is NaN or infinite
    """
    if isinstance(raw, Angle):
        return raw
    return Angle(raw)


def difference(x: Angle | float, y: Angle | float) -> Angle:
    """
    Signed angle from y to x, folded onto the circle.

    :return: the representative of (x - y) mod 2π
    """
    return normalize(float(x) - float(y))


def angular_separation(x: Angle | float, y: Angle | float) -> float:
    """
    Unsigned distance between two angles.

    :return: the smaller arc between x and y, in [0, π]
    """
    delta = float(difference(x, y))
    return min(delta, TWO_PI - delta)


class Outcome(IntEnum):
    """
    A measurement result.
    """
    PLUS = 1
    MINUS = -1

    @property
    def symbol(self) -> str:
        return "+1" if self is Outcome.PLUS else "-1"


def sign_conv(x: float) -> Outcome:
    """
    Sign with the tie rule sgn(0) = +1.

    :param x: finite real
    :return: ``Outcome.PLUS`` when x >= 0, else ``Outcome.MINUS``
    """
    _check_finite(x, "sign argument")
    return Outcome.PLUS if x >= 0 else Outcome.MINUS


def sign_array(x: RealLike) -> SignArray:
    """
    Vectorised ``sign_conv``.

    :param x: finite reals
    :return: int8 array of +1/-1
    """
    values = np.asarray(x, dtype=np.float64)
    _check_finite(values, "sign argument")
    return np.where(values >= 0.0, 1, -1).astype(np.int8)


@dataclass(frozen=True, order=True)
class SettingPair:
    """
    Index pair (i, k) of Alice's setting a_i and Bob's setting b_k.
    """
    alice_index: int
    bob_index: int

    ALL: ClassVar[tuple[SettingPair, ...]]

    def __post_init__(self) -> None:
        if self.alice_index not in (1, 2) or self.bob_index not in (1, 2):
            raise InvalidInputError(
                f"setting indices must be 1 or 2, got ({self.alice_index}, {self.bob_index})"
            )

    @classmethod
    def all(cls) -> tuple[SettingPair, ...]:
        """
        :return: the four pairs in the order A1B1, A1B2, A2B1, A2B2
        """
        return cls.ALL

    @classmethod
    def from_column(cls, column: int) -> SettingPair:
        return cls.ALL[column]

    @classmethod
    def from_label(cls, label: str) -> SettingPair:
        for pair in cls.ALL:
            if pair.label == label.upper():
                return pair
        raise InvalidInputError(f"unknown setting pair label {label!r}")

    @property
    def column(self) -> int:
        return 2 * (self.alice_index - 1) + (self.bob_index - 1)

    @property
    def label(self) -> str:
        return f"A{self.alice_index}B{self.bob_index}"

    @property
    def chsh_sign(self) -> int:
        # S = E11 - E12 + E21 + E22
        return -1 if (self.alice_index, self.bob_index) == (1, 2) else 1

    def __str__(self) -> str:
        return self.label


SettingPair.ALL = tuple(SettingPair(i, k) for i in (1, 2) for k in (1, 2))


@dataclass(frozen=True)
class ConditioningContext:
    """
    What the hidden-variable density is conditioned on.
    """
    kind: ConditioningKind
    setting: Angle | None = None

    def __post_init__(self) -> None:
        if self.kind is ConditioningKind.UNCONDITIONED:
            if self.setting is not None:
                raise InvalidInputError("an unconditioned context carries no setting")
        elif self.setting is None:
            raise InvalidInputError(f"{self.kind.name} needs a conditioning angle")
        elif not isinstance(self.setting, Angle):
            object.__setattr__(self, "setting", normalize(self.setting))

    @classmethod
    def unconditioned(cls) -> ConditioningContext:
        return cls(ConditioningKind.UNCONDITIONED)

    @classmethod
    def on_alice(cls, setting: Angle | float) -> ConditioningContext:
        return cls(ConditioningKind.ON_ALICE_SETTING, normalize(setting))

    @classmethod
    def on_bob(cls, setting: Angle | float) -> ConditioningContext:
        return cls(ConditioningKind.ON_BOB_SETTING, normalize(setting))

    @classmethod
    def on_side(cls, side: Side, setting: Angle | float) -> ConditioningContext:
        return cls.on_alice(setting) if side is Side.ALICE else cls.on_bob(setting)

    @property
    def center(self) -> float:
        """
        :return: the conditioning angle, 0 for the unconditioned context
        """
        return 0.0 if self.setting is None else self.setting.value

    def describe(self) -> str:
        match self.kind:
            case ConditioningKind.UNCONDITIONED:
                return "p(λ)"
            case ConditioningKind.ON_ALICE_SETTING:
                return f"p(λ|a={self.center:.6g})"
            case ConditioningKind.ON_BOB_SETTING:
                return f"p(λ|b={self.center:.6g})"


@dataclass(frozen=True)
class ModelSpec:
    """
    A deterministic local hidden-variable model.

    ``outcome_a`` and ``outcome_b`` map (setting, λ-array) to +1/-1 arrays and
    never see the other wing's setting. ``lambda_density`` maps (λ-array,
    context) to density values. A model without outcome functions is an
    oracle that only answers ``analytic_correlation``.
    """
    name: str
    outcome_a: OutcomeFn | None = None
    outcome_b: OutcomeFn | None = None
    lambda_density: DensityFn | None = None
    analytic_correlation: CorrelationFn | None = None
    contexts: frozenset[ConditioningKind] = frozenset()
    sampler: InverseSampler | None = None
    outcome_breaks: BreakpointFn | None = None
    density_breaks: ContextPointFn | None = None
    density_zeros: ContextPointFn | None = None
    description: str = field(default="", compare=False)

    @property
    def has_outcomes(self) -> bool:
        return self.outcome_a is not None and self.outcome_b is not None

    @property
    def is_sampleable(self) -> bool:
        return self.has_outcomes and self.lambda_density is not None

    @property
    def respects_mi(self) -> bool:
        return self.contexts == frozenset({ConditioningKind.UNCONDITIONED})

    def supports(self, context: ConditioningContext) -> bool:
        return self.lambda_density is not None and context.kind in self.contexts

    def require_outcomes(self) -> None:
        if not self.has_outcomes:
            raise OracleOnlyError(
                f"model {self.name!r} is oracle-only: it has no outcome functions"
            )

    def require_sampleable(self) -> None:
        if not self.is_sampleable:
            raise OracleOnlyError(
                f"model {self.name!r} is oracle-only and cannot be sampled"
            )

    def require_context(self, context: ConditioningContext) -> None:
        if self.lambda_density is None:
            raise OracleOnlyError(f"model {self.name!r} has no hidden-variable density")
        if not self.supports(context):
            supported = ", ".join(sorted(kind.name for kind in self.contexts))
            raise UnsupportedContextError(
                f"model {self.name!r} does not define {context.kind.name}; "
                f"supported: {supported}"
            )

    def outcomes(self, side: Side, setting: Angle | float, lam: RealLike) -> SignArray:
        """
        Evaluate one wing's outcome function.

        :param side: which wing
        :param setting: that wing's setting
        :param lam: hidden-variable value(s)
        :return: int8 array of +1/-1, shaped like ``lam``
        """
        self.require_outcomes()
        fn = self.outcome_a if side is Side.ALICE else self.outcome_b
        return fn(float(setting), np.asarray(lam, dtype=np.float64))

    def outcome(self, side: Side, setting: Angle | float, lam: Angle | float) -> Outcome:
        return Outcome(int(self.outcomes(side, setting, float(lam))))

    def density(self, lam: RealLike, context: ConditioningContext) -> FloatArray:
        """
        :param lam: hidden-variable value(s)
        :param context: conditioning context
        :return: density values, shaped like ``lam``
        :raises UnsupportedContextError: if the model does not define ``context``
        """
        self.require_context(context)
        return self.lambda_density(np.asarray(lam, dtype=np.float64), context)

    def breakpoints(self, setting: Angle | float) -> tuple[float, ...]:
        """
        :return: the λ values where an outcome at ``setting`` may jump
        """
        if self.outcome_breaks is None:
            return ()
        return self.outcome_breaks(float(setting))

    def density_breakpoints(self, context: ConditioningContext) -> tuple[float, ...]:
        if self.density_breaks is None:
            return ()
        return self.density_breaks(context)

    def zero_set(self, context: ConditioningContext) -> tuple[float, ...] | None:
        """
        :return: the declared zeros of p(λ|context), or None if the model declares none
        """
        self.require_context(context)
        if self.density_zeros is None:
            return None
        return tuple(sorted(self.density_zeros(context)))
