"""
Correlation and CHSH statistics estimated from trial streams, plus the
per-λ counterfactual analysis.

``chsh_statistic`` is the falsifiable path: every trial contributes one
product to the one correlation it measured. ``counterfactual_trial`` and
``pointwise_c`` evaluate all four outcomes at the same λ, which only a
simulator that owns λ can do. They are diagnostics, not measurements.
"""
from __future__ import annotations

import itertools
import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, validator
from scipy import stats

from .config import ExperimentConfig, SettingAngles
from .core import Angle, ConditioningContext, ModelSpec, Outcome, SettingPair, normalize
from .enums import ConditioningKind, Side, Stream
from .errors import InsufficientDataError, InvalidInputError, UnsupportedContextError
from .sampling import TrialRecord, TrialStream, rng_metadata, sample_lambdas, substream
from .settings import regularity_alpha
from .type_aliases import FloatArray, SignArray


class CorrelationEstimate(BaseModel):
    """
    Empirical mean of ±1 values with its standard error.

    ``pair`` is the setting-pair label (``A1B1`` ...) for correlations and
    the wing label (``A1``, ``B2`` ...) for marginals.
    """
    pair: str
    mean: float
    std_error: float
    count: int

    class Config:
        allow_mutation = False

    @validator("mean")
    def _mean_range(cls, value: float) -> float:
        if not -1.0 <= value <= 1.0:
            raise ValueError(f"mean of ±1 data must lie in [-1, 1], got {value}")
        return value

    @validator("std_error")
    def _non_negative(cls, value: float) -> float:
        if value < 0.0:
            raise ValueError("standard error must be non-negative")
        return value

    @property
    def setting_pair(self) -> SettingPair:
        return SettingPair.from_label(self.pair)

    def to_json(self) -> dict:
        return {"mean": self.mean, "std_error": self.std_error, "count": self.count}


class ChshReport(BaseModel):
    """
    The four correlation estimates and S = E11 - E12 + E21 + E22.
    """
    correlations: tuple[CorrelationEstimate, CorrelationEstimate, CorrelationEstimate, CorrelationEstimate]
    s_value: float
    s_std_error: float
    config: dict | None = None
    rng: dict | None = None

    class Config:
        allow_mutation = False

    @validator("s_value")
    def _s_range(cls, value: float) -> float:
        if abs(value) > 4.0:
            raise ValueError(f"|S| cannot exceed 4, got {value}")
        return value

    def correlation(self, pair: SettingPair) -> CorrelationEstimate:
        return self.correlations[pair.column]

    @property
    def violates_bound(self) -> bool:
        return abs(self.s_value) > 2.0

    def sigmas_above_bound(self) -> float:
        """
        :return: (|S| - 2) in units of the standard error of S
        """
        if self.s_std_error == 0.0:
            return math.inf if self.violates_bound else 0.0
        return (abs(self.s_value) - 2.0) / self.s_std_error

    def to_json(self) -> dict:
        """
        Convert to json

        :return: per-pair {mean, std_error, count}, S, its error, config echo, RNG metadata
        """
        return {
            "pairs": {estimate.pair: estimate.to_json() for estimate in self.correlations},
            "s_value": self.s_value,
            "s_std_error": self.s_std_error,
            "config": self.config,
            "rng": self.rng,
        }

    @classmethod
    def from_json(cls, json_data: dict) -> ChshReport:
        """
        Construct from json

        :param json_data: output of ``to_json``
        :return: the report
        """
        return cls(
            correlations=tuple(
                CorrelationEstimate(pair=pair.label, **json_data["pairs"][pair.label])
                for pair in SettingPair.all()
            ),
            s_value=json_data["s_value"],
            s_std_error=json_data["s_std_error"],
            config=json_data.get("config"),
            rng=json_data.get("rng"),
        )


@dataclass(frozen=True)
class CounterfactualTrial:
    """
    All four outcomes at one λ and the combination s built from them.
    """
    lam: Angle
    a1: Outcome
    a2: Outcome
    b1: Outcome
    b2: Outcome
    s_trial: int

    def __post_init__(self) -> None:
        if self.s_trial not in (-2, 2):
            raise InvalidInputError(f"s must be ±2 for ±1 outcomes, got {self.s_trial}")

    @property
    def factored(self) -> int:
        # A1 (B1 - B2) + A2 (B1 + B2)
        return self.a1 * (self.b1 - self.b2) + self.a2 * (self.b1 + self.b2)


class CounterfactualAverage(BaseModel):
    """
    ⟨s⟩ over λ drawn from one declared density.
    """
    ensemble: str
    mean: float
    std_error: float
    count: int

    class Config:
        allow_mutation = False


class RegularityEntry(BaseModel):
    first: str
    second: str
    statistic: float
    p_value: float
    threshold: float
    passed: bool
    counts: tuple[int, int]

    class Config:
        allow_mutation = False


class RegularityReport(BaseModel):
    """
    Two-sample KS sup-distances between the λ samples of every two setting pairs.
    """
    entries: list[RegularityEntry]

    class Config:
        allow_mutation = False

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def entry(self, first: SettingPair, second: SettingPair) -> RegularityEntry:
        labels = {first.label, second.label}
        for entry in self.entries:
            if {entry.first, entry.second} == labels:
                return entry
        raise KeyError(f"{first.label}/{second.label}")

    def to_json(self) -> dict:
        return {"passed": self.passed, "entries": [entry.dict() for entry in self.entries]}


def as_stream(records: TrialStream | Iterable[TrialRecord]) -> TrialStream:
    """
    :param records: a trial stream or any iterable of trial records
    :return: the same trials as a column-wise stream
    """
    if isinstance(records, TrialStream):
        return records
    records = list(records)
    has_outcomes = all(r.a_outcome is not None and r.b_outcome is not None for r in records)
    has_lambda = all(r.lam is not None for r in records)
    return TrialStream(
        np.array([r.pair.column for r in records], dtype=np.int64),
        np.array([int(r.product) for r in records], dtype=np.int8),
        np.array([int(r.a_outcome) for r in records], dtype=np.int8) if has_outcomes else None,
        np.array([int(r.b_outcome) for r in records], dtype=np.int8) if has_outcomes else None,
        np.array([float(r.lam) for r in records], dtype=np.float64) if has_lambda else None,
    )


def mean_and_error(values: SignArray | FloatArray) -> tuple[float, float, int]:
    """
    :param values: samples
    :return: mean, standard error from the (n - 1) sample deviation, count
    """
    count = int(values.size)
    data = np.asarray(values, dtype=np.float64)
    mean = float(np.mean(data))
    if count < 2:
        return mean, 0.0, count
    return mean, float(np.std(data, ddof=1)) / math.sqrt(count), count


def estimate_correlation(records: TrialStream | Iterable[TrialRecord], pair: SettingPair) -> CorrelationEstimate:
    """
    Empirical E(a_i, b_k): the average product over the trials on ``pair``.

    :param records: trials
    :param pair: the setting pair
    :return: the estimate
    :raises InsufficientDataError: no trial used ``pair``
    """
    products = as_stream(records).products_for(pair)
    if products.size == 0:
        raise InsufficientDataError(f"no records for setting pair {pair.label}")
    mean, error, count = mean_and_error(products)
    return CorrelationEstimate(pair=pair.label, mean=mean, std_error=error, count=count)


def combine_chsh(
    estimates: Iterable[CorrelationEstimate],
    config: ExperimentConfig | None = None,
) -> ChshReport:
    """
    :param estimates: the four correlation estimates, in pair order
    :param config: echoed into the report with the RNG contract
    :return: the report
    """
    estimates = tuple(estimates)
    s_value = math.fsum(e.setting_pair.chsh_sign * e.mean for e in estimates)
    s_error = math.sqrt(math.fsum(e.std_error**2 for e in estimates))
    return ChshReport(
        correlations=estimates,
        s_value=s_value,
        s_std_error=s_error,
        config=None if config is None else config.to_json(),
        rng=None if config is None else rng_metadata(),
    )


def chsh_statistic(
    records: TrialStream | Iterable[TrialRecord], config: ExperimentConfig | None = None
) -> ChshReport:
    """
    S estimated from recorded products.

    :param records: trials
    :param config: the run's config, echoed into the report
    :return: the CHSH report
    :raises InsufficientDataError: naming the first pair without trials
    """
    stream = as_stream(records)
    return combine_chsh((estimate_correlation(stream, pair) for pair in SettingPair.all()), config)


def _angles(config: ExperimentConfig | SettingAngles) -> SettingAngles:
    return config.settings if isinstance(config, ExperimentConfig) else config


def pointwise_c_array(model: ModelSpec, config: ExperimentConfig | SettingAngles, lam: FloatArray) -> SignArray:
    """
    Vectorised C(λ) = A1B1 - A1B2 + A2B1 + A2B2 with every outcome at the same λ.

    :param model: a model with outcome functions
    :param config: supplies the four settings
    :param lam: hidden-variable values
    :return: C at each λ, values ±2
    """
    settings = _angles(config)
    lam = np.asarray(lam, dtype=np.float64)
    a1 = model.outcomes(Side.ALICE, settings.a1, lam).astype(np.int64)
    a2 = model.outcomes(Side.ALICE, settings.a2, lam).astype(np.int64)
    b1 = model.outcomes(Side.BOB, settings.b1, lam).astype(np.int64)
    b2 = model.outcomes(Side.BOB, settings.b2, lam).astype(np.int64)
    return (a1 * b1 - a1 * b2 + a2 * b1 + a2 * b2).astype(np.int8)


def counterfactual_trial(
    model: ModelSpec, config: ExperimentConfig | SettingAngles, lam: Angle | float
) -> CounterfactualTrial:
    """
    Evaluate the measured and the three unmeasured outcomes at one λ.

    :param model: a model with outcome functions
    :param config: supplies the four settings
    :param lam: the hidden variable
    :return: the four outcomes and s
    :raises OracleOnlyError: the model has no outcome functions
    """
    settings = _angles(config)
    lam = normalize(lam)
    a1 = model.outcome(Side.ALICE, settings.a1, lam)
    a2 = model.outcome(Side.ALICE, settings.a2, lam)
    b1 = model.outcome(Side.BOB, settings.b1, lam)
    b2 = model.outcome(Side.BOB, settings.b2, lam)
    return CounterfactualTrial(lam, a1, a2, b1, b2, a1 * b1 - a1 * b2 + a2 * b1 + a2 * b2)


def pointwise_c(model: ModelSpec, config: ExperimentConfig | SettingAngles, lam: Angle | float) -> float:
    """
    C(λ), the integrand of S under a common λ density.

    :param model: a model with outcome functions
    :param config: supplies the four settings
    :param lam: the hidden variable
    :return: C(λ), equal to s of ``counterfactual_trial``
    """
    model.require_outcomes()
    return float(pointwise_c_array(model, config, np.array([float(normalize(lam))]))[0])


def counterfactual_average(
    model: ModelSpec,
    config: ExperimentConfig,
    draws: int,
    context: ConditioningContext | None = None,
    rng: np.random.Generator | None = None,
) -> CounterfactualAverage:
    """
    Average s over λ drawn from a single declared density.

    For setting-conditioned models there is no density shared by all four
    terms, so the caller must name the one to use; the result is labelled
    with it.

    :param model: a sampleable model
    :param config: supplies settings and, without ``rng``, the seed
    :param draws: number of λ draws
    :param context: the density to draw from; defaults to p(λ) for MI models
    :param rng: λ generator
    :return: ⟨s⟩ with its standard error and ensemble label
    """
    model.require_sampleable()
    if context is None:
        if ConditioningKind.UNCONDITIONED not in model.contexts:
            raise UnsupportedContextError(
                f"model {model.name!r} has no setting-independent density; "
                "choose the conditioning context to average over"
            )
        context = ConditioningContext.unconditioned()
    model.require_context(context)
    if draws < 1:
        raise InvalidInputError("draws must be at least 1")

    rng = rng or substream(config.seed, 0, Stream.LAMBDA)
    lam = sample_lambdas(model, context.kind, np.full(draws, context.center), rng)
    mean, error, count = mean_and_error(pointwise_c_array(model, config, lam))
    return CounterfactualAverage(ensemble=context.describe(), mean=mean, std_error=error, count=count)


def marginal_estimate(
    records: TrialStream | Iterable[TrialRecord], side: Side, index: int
) -> CorrelationEstimate:
    """
    Empirical ⟨A_i⟩ or ⟨B_k⟩ over the trials where that wing used setting ``index``.

    :param records: trials with per-wing outcomes
    :param side: the wing
    :param index: setting index, 1 or 2
    :return: the estimate, labelled ``A1``/``A2``/``B1``/``B2``
    :raises InsufficientDataError: outcomes not retained, or no such trials
    """
    if index not in (1, 2):
        raise InvalidInputError(f"setting index must be 1 or 2, got {index}")
    stream = as_stream(records)
    if not stream.outcomes_retained:
        raise InsufficientDataError("per-wing outcomes were not retained in these records")

    if side is Side.ALICE:
        chosen = stream.columns // 2 + 1 == index
        values = stream.a_outcomes[chosen]
        label = f"A{index}"
    else:
        chosen = stream.columns % 2 + 1 == index
        values = stream.b_outcomes[chosen]
        label = f"B{index}"

    if values.size == 0:
        raise InsufficientDataError(f"no records with setting {label}")
    mean, error, count = mean_and_error(values)
    return CorrelationEstimate(pair=label, mean=mean, std_error=error, count=count)


def ks_threshold(n: int, m: int, alpha: float = regularity_alpha) -> float:
    """
    Large-sample critical sup-distance of the two-sample KS test.

    :return: c(α) sqrt((n + m) / (n m)) with c(α) = sqrt(-ln(α/2) / 2)
    """
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) * math.sqrt((n + m) / (n * m))


def regularity_check(
    records: TrialStream | Iterable[TrialRecord],
    threshold: float | None = None,
    alpha: float = regularity_alpha,
) -> RegularityReport:
    """
    Do the λ values recur with the same distribution under every setting pair?

    :param records: trials with λ retained
    :param threshold: fixed pass/fail sup-distance; by default the KS critical value at ``alpha``
    :param alpha: significance level for the default threshold
    :return: one entry per unordered pair of setting pairs
    :raises InsufficientDataError: λ was not retained, or a pair has no trials
    """
    stream = as_stream(records)
    if not stream.lambda_retained:
        raise InsufficientDataError(
            "hidden-variable values were not retained; rerun with --debug-lambda"
        )

    samples = {}
    for pair in SettingPair.all():
        values = stream.lambdas_for(pair)
        if values.size == 0:
            raise InsufficientDataError(f"no records for setting pair {pair.label}")
        samples[pair] = values

    entries = []
    for first, second in itertools.combinations(SettingPair.all(), 2):
        x, y = samples[first], samples[second]
        result = stats.ks_2samp(x, y)
        limit = ks_threshold(x.size, y.size, alpha) if threshold is None else threshold
        entries.append(
            RegularityEntry(
                first=first.label,
                second=second.label,
                statistic=float(result.statistic),
                p_value=float(result.pvalue),
                threshold=limit,
                passed=float(result.statistic) < limit,
                counts=(int(x.size), int(y.size)),
            )
        )
    return RegularityReport(entries=entries)
