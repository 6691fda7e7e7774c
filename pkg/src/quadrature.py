"""
Deterministic integration over λ ∈ [0, 2π) and the probability diagnostics
built on it.

Every integrand here is piecewise smooth: outcome functions jump where
cos(λ - setting) changes sign, densities like ¼|cos(λ - u)| have kinks, and
|p1 - p2| has kinks where two densities cross. The domain is split at all
of those points and each smooth piece is integrated on its own, either
with composite Simpson or with QUADPACK's adaptive rule.
"""
from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable

import numpy as np
from pydantic import BaseModel, root_validator
from scipy import integrate, optimize

from .config import ExperimentConfig, SettingAngles
from .core import ConditioningContext, ModelSpec, SettingPair
from .enums import ConditioningKind, QuadratureMethod, Side
from .errors import OracleOnlyError, QuadratureBudgetError, UnsupportedContextError
from .estimators import pointwise_c_array
from .sampling import conditioning_kind
from .settings import (
    TWO_PI,
    default_max_evaluations,
    default_panels,
    default_tolerance,
    density_grid_points,
    mi_tolerance,
)
from .support import merge_points, pieces
from .type_aliases import CorrelationFn, FloatArray, Integrand, Settings4

logger = logging.getLogger(__name__)

# endpoint nudge, relative to piece length, so one-sided limits are sampled
ENDPOINT_NUDGE = 1e-9
ROOT_GRID = 4096


class QuadratureSettings(BaseModel):
    """
    How integrals are computed.
    """
    method: QuadratureMethod = QuadratureMethod.COMPOSITE_SIMPSON
    panels: int = default_panels
    tolerance: float = default_tolerance
    max_evaluations: int = default_max_evaluations

    class Config:
        allow_mutation = False

    @root_validator(skip_on_failure=True)
    def _check(cls, values: dict) -> dict:
        if values["panels"] < 64 or values["panels"] % 2:
            raise ValueError("panels must be even and at least 64")
        if not values["tolerance"] > 0.0:
            raise ValueError("tolerance must be positive")
        if values["max_evaluations"] < 1:
            raise ValueError("max_evaluations must be positive")
        return values


DEFAULT_QUADRATURE = QuadratureSettings()


def _simpson_piece(f: Integrand, start: float, end: float, panels: int) -> float:
    nodes = np.linspace(start, end, panels + 1)
    probes = nodes.copy()
    nudge = ENDPOINT_NUDGE * (end - start)
    probes[0] += nudge
    probes[-1] -= nudge
    return float(integrate.simpson(f(probes), x=nodes))


def _adaptive_piece(f: Integrand, start: float, end: float, tolerance: float) -> tuple[float, int]:
    result = integrate.quad(
        lambda t: float(f(np.array([t]))[0]),
        start,
        end,
        epsabs=tolerance,
        epsrel=0.0,
        limit=200,
        full_output=1,
    )
    value, _, info = result[:3]
    if len(result) > 3:
        raise QuadratureBudgetError(f"adaptive quadrature did not converge on [{start}, {end}]: {result[3]}")
    return float(value), int(info["neval"])


def integrate_circle(
    f: Integrand, breakpoints: Iterable[float], q: QuadratureSettings = DEFAULT_QUADRATURE
) -> float:
    """
    ∫₀^{2π} f(λ) dλ for f smooth between the given breakpoints.

    :param f: vectorised integrand
    :param breakpoints: every λ where f or a derivative may jump
    :param q: quadrature settings
    :return: the integral
    :raises QuadratureBudgetError: the evaluation budget ran out
    """
    spans = list(pieces((p % TWO_PI for p in breakpoints), 0.0, TWO_PI))
    total = []
    evaluations = 0
    for start, end in spans:
        match q.method:
            case QuadratureMethod.COMPOSITE_SIMPSON:
                evaluations += q.panels + 1
                if evaluations > q.max_evaluations:
                    raise QuadratureBudgetError(
                        f"composite Simpson needs more than {q.max_evaluations} evaluations"
                    )
                total.append(_simpson_piece(f, start, end, q.panels))
            case QuadratureMethod.ADAPTIVE:
                value, used = _adaptive_piece(f, start, end, q.tolerance / len(spans))
                evaluations += used
                if evaluations > q.max_evaluations:
                    raise QuadratureBudgetError(
                        f"adaptive quadrature needed more than {q.max_evaluations} evaluations"
                    )
                total.append(value)
    logger.debug("integrated over %d pieces with %d evaluations", len(spans), evaluations)
    return math.fsum(total)


def _crossings(g: Integrand, breakpoints: Iterable[float]) -> list[float]:
    # sign changes of g on a grid, refined by bracketing root search
    grid = np.linspace(0.0, TWO_PI, ROOT_GRID + 1)
    values = g(grid)
    roots = [float(x) for x in grid[values == 0.0]]
    for i in np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) < 0):
        roots.append(optimize.brentq(lambda t: float(g(np.array([t]))[0]), grid[i], grid[i + 1], xtol=1e-15))
    return [*breakpoints, *roots]


def quad_correlation(
    model: ModelSpec,
    a: float,
    b: float,
    context: ConditioningContext,
    q: QuadratureSettings = DEFAULT_QUADRATURE,
) -> float:
    """
    E(a, b) = ∫ A(a, λ) B(b, λ) p(λ|context) dλ.

    :param model: a model with outcome functions
    :param a: Alice's setting
    :param b: Bob's setting
    :param context: the density to integrate against
    :param q: quadrature settings
    :return: the correlation
    :raises UnsupportedContextError: the model does not define ``context``
    """
    model.require_outcomes()
    model.require_context(context)
    a, b = float(a), float(b)

    def integrand(lam: FloatArray) -> FloatArray:
        product = model.outcomes(Side.ALICE, a, lam) * model.outcomes(Side.BOB, b, lam)
        return product * model.density(lam, context)

    breaks = [*model.breakpoints(a), *model.breakpoints(b), *model.density_breakpoints(context)]
    return integrate_circle(integrand, breaks, q)


def quad_marginal(
    model: ModelSpec,
    side: Side,
    setting: float,
    context: ConditioningContext,
    q: QuadratureSettings = DEFAULT_QUADRATURE,
) -> float:
    """
    ⟨A⟩ or ⟨B⟩ at one setting: ∫ X(setting, λ) p(λ|context) dλ.

    :param model: a model with outcome functions
    :param side: which wing
    :param setting: that wing's setting
    :param context: the density to integrate against
    :param q: quadrature settings
    :return: the marginal expectation
    """
    model.require_outcomes()
    model.require_context(context)
    setting = float(setting)

    def integrand(lam: FloatArray) -> FloatArray:
        return model.outcomes(side, setting, lam) * model.density(lam, context)

    return integrate_circle(integrand, [*model.breakpoints(setting), *model.density_breakpoints(context)], q)


def check_normalization(
    model: ModelSpec, context: ConditioningContext, q: QuadratureSettings = DEFAULT_QUADRATURE
) -> float:
    """
    :return: ∫ p(λ|context) dλ, which must be 1
    """
    model.require_context(context)
    return integrate_circle(lambda lam: model.density(lam, context), model.density_breakpoints(context), q)


def _settings4(settings: SettingAngles | ExperimentConfig | Settings4) -> Settings4:
    if isinstance(settings, ExperimentConfig):
        return settings.settings.as_tuple()
    if isinstance(settings, SettingAngles):
        return settings.as_tuple()
    return tuple(float(s) for s in settings)


def analytic_chsh(correlation_fn: CorrelationFn, settings: SettingAngles | ExperimentConfig | Settings4) -> float:
    """
    S = E(a1, b1) - E(a1, b2) + E(a2, b1) + E(a2, b2) for a closed-form E.

    :param correlation_fn: E(a, b)
    :param settings: (a1, a2, b1, b2)
    :return: S
    """
    a1, a2, b1, b2 = _settings4(settings)
    return math.fsum(
        (correlation_fn(a1, b1), -correlation_fn(a1, b2), correlation_fn(a2, b1), correlation_fn(a2, b2))
    )


def pair_angles(settings: Settings4, pair: SettingPair) -> tuple[float, float]:
    a1, a2, b1, b2 = settings
    return (a1 if pair.alice_index == 1 else a2), (b1 if pair.bob_index == 1 else b2)


def pair_context(model: ModelSpec, settings: Settings4, pair: SettingPair, side: Side) -> ConditioningContext:
    a, b = pair_angles(settings, pair)
    match conditioning_kind(model, side):
        case ConditioningKind.ON_ALICE_SETTING:
            return ConditioningContext.on_alice(a)
        case ConditioningKind.ON_BOB_SETTING:
            return ConditioningContext.on_bob(b)
        case _:
            return ConditioningContext.unconditioned()


def quad_chsh(
    model: ModelSpec,
    settings: SettingAngles | ExperimentConfig | Settings4,
    side: Side = Side.ALICE,
    q: QuadratureSettings = DEFAULT_QUADRATURE,
) -> float:
    """
    S from four quadrature correlations, each pair's λ density conditioned per ``side``.

    :return: S
    """
    values = _settings4(settings)
    terms = []
    for pair in SettingPair.all():
        a, b = pair_angles(values, pair)
        context = pair_context(model, values, pair, side)
        terms.append(pair.chsh_sign * quad_correlation(model, a, b, context, q))
    return math.fsum(terms)


def model_chsh(
    model: ModelSpec,
    settings: SettingAngles | ExperimentConfig | Settings4,
    side: Side = Side.ALICE,
    q: QuadratureSettings = DEFAULT_QUADRATURE,
) -> float:
    """
    :return: S from the model's closed form when it has one, else by quadrature
    """
    if model.analytic_correlation is not None:
        return analytic_chsh(model.analytic_correlation, settings)
    return quad_chsh(model, settings, side, q)


class BoundChain(BaseModel):
    """
    Values of the standard derivation's chain S = ∫pC ≤ ∫p|C| ≤ 2∫p.
    """
    s_value: float
    abs_integral: float
    bound: float

    class Config:
        allow_mutation = False


def bound_chain(
    model: ModelSpec,
    settings: SettingAngles | ExperimentConfig | Settings4,
    q: QuadratureSettings = DEFAULT_QUADRATURE,
) -> BoundChain:
    """
    Integrate C(λ) and |C(λ)| against the model's setting-independent density.

    :raises UnsupportedContextError: the model has no setting-independent density
    """
    model.require_outcomes()
    context = ConditioningContext.unconditioned()
    if not model.supports(context):
        raise UnsupportedContextError(
            f"model {model.name!r} has no setting-independent density to factor out of S"
        )
    values = _settings4(settings)
    angles = SettingAngles.from_tuple(values)
    breaks = [bp for setting in values for bp in model.breakpoints(setting)]
    breaks += model.density_breakpoints(context)

    def c_times_p(lam: FloatArray) -> FloatArray:
        return pointwise_c_array(model, angles, lam) * model.density(lam, context)

    return BoundChain(
        s_value=integrate_circle(c_times_p, breaks, q),
        abs_integral=integrate_circle(lambda lam: np.abs(c_times_p(lam)), breaks, q),
        bound=2.0 * check_normalization(model, context, q),
    )


class ContextInfo(BaseModel):
    kind: str
    setting: float | None = None

    @classmethod
    def of(cls, context: ConditioningContext) -> ContextInfo:
        return cls(kind=context.kind.name, setting=None if context.setting is None else context.center)


class MiDiagnostic(BaseModel):
    """
    Total-variation distance between two conditional λ densities.
    """
    context_pair: tuple[ContextInfo, ContextInfo]
    tv_distance: float
    mi_respected: bool

    class Config:
        allow_mutation = False


def tv_distance(
    model: ModelSpec,
    first: ConditioningContext,
    second: ConditioningContext,
    q: QuadratureSettings = DEFAULT_QUADRATURE,
) -> float:
    """
    :return: ½ ∫ |p(λ|first) - p(λ|second)| dλ
    """
    model.require_context(first)
    model.require_context(second)
    if first == second:
        return 0.0

    def gap(lam: FloatArray) -> FloatArray:
        return model.density(lam, first) - model.density(lam, second)

    breaks = _crossings(gap, [*model.density_breakpoints(first), *model.density_breakpoints(second)])
    value = 0.5 * integrate_circle(lambda lam: np.abs(gap(lam)), breaks, q)
    return min(max(value, 0.0), 1.0)


def mi_diagnostic(
    model: ModelSpec,
    first: ConditioningContext,
    second: ConditioningContext,
    q: QuadratureSettings = DEFAULT_QUADRATURE,
) -> MiDiagnostic:
    """
    Compare two conditional λ densities; MI holds when they coincide.

    :param model: the model
    :param first: a context the model supports
    :param second: another context the model supports
    :param q: quadrature settings
    :return: the TV distance and whether it is below the MI tolerance
    """
    distance = tv_distance(model, first, second, q)
    return MiDiagnostic(
        context_pair=(ContextInfo.of(first), ContextInfo.of(second)),
        tv_distance=distance,
        mi_respected=distance < mi_tolerance,
    )


def run_contexts(model: ModelSpec, config: ExperimentConfig) -> list[ConditioningContext]:
    """
    :return: the distinct λ contexts a run of ``config`` draws from, in pair order
    """
    values = config.settings.as_tuple()
    contexts: list[ConditioningContext] = []
    for pair in SettingPair.all():
        context = pair_context(model, values, pair, config.conditioning_side)
        if context not in contexts:
            contexts.append(context)
    return contexts


def mi_survey(
    model: ModelSpec, config: ExperimentConfig, q: QuadratureSettings = DEFAULT_QUADRATURE
) -> list[MiDiagnostic]:
    """
    MI diagnostics between every two densities a run of ``config`` uses.

    :return: one diagnostic per pair of distinct contexts, or a single
        self-comparison when the run uses one density
    """
    contexts = run_contexts(model, config)
    if len(contexts) == 1:
        return [mi_diagnostic(model, contexts[0], contexts[0], q)]
    return [mi_diagnostic(model, c1, c2, q) for c1, c2 in itertools.combinations(contexts, 2)]


class PairZeroSet(BaseModel):
    pair: str
    contexts: list[ContextInfo]
    zero_set: list[float]
    isolated: bool
    source: str


class CfFreedomReport(BaseModel):
    """
    Counterfactual freedom, p(a_i, b_k|λ) ≠ 0 for every λ, assessed from the
    zero-sets of the conditional densities via Bayes' theorem.
    """
    model: str
    applicable: bool
    pairs: list[PairZeroSet] = []
    cf_respected: bool | None = None
    prescription: str = ""
    status: str

    class Config:
        allow_mutation = False


def _grid_zeros(model: ModelSpec, context: ConditioningContext) -> tuple[list[float], bool]:
    grid = np.linspace(0.0, TWO_PI, density_grid_points, endpoint=False)
    density = model.density(grid, context)
    scale = float(np.max(density)) if density.size else 0.0
    zero = density <= 1e-15 * max(scale, 1e-300)
    runs = zero & np.roll(zero, 1)
    return [float(x) for x in grid[zero]], not bool(np.any(runs))


def cf_freedom_report(
    model: ModelSpec,
    settings: SettingAngles | ExperimentConfig | Settings4,
    side: Side = Side.ALICE,
) -> CfFreedomReport:
    """
    List, for each setting pair, where p(λ|a_i, b_k) vanishes, and decide
    whether p(a_i, b_k|λ) ≠ 0 can hold everywhere by letting p(λ) vanish
    on those points.

    :param model: the model
    :param settings: (a1, a2, b1, b2)
    :param side: which wing's setting conditions λ, as in the run
    :return: the report; oracle-only models are marked not applicable
    """
    if model.lambda_density is None:
        return CfFreedomReport(model=model.name, applicable=False, status="not applicable")

    values = _settings4(settings)
    entries = []
    for pair in SettingPair.all():
        context = pair_context(model, values, pair, side)
        declared = model.zero_set(context)
        if declared is None:
            zeros, isolated = _grid_zeros(model, context)
            source = "grid scan"
        else:
            zeros, isolated, source = list(declared), True, "declared"
        entries.append(
            PairZeroSet(
                pair=pair.label,
                contexts=[ContextInfo.of(context)],
                zero_set=merge_points(zeros, 1e-12),
                isolated=isolated,
                source=source,
            )
        )

    respected = all(entry.isolated for entry in entries)
    return CfFreedomReport(
        model=model.name,
        applicable=True,
        pairs=entries,
        cf_respected=respected,
        prescription=(
            "p(a_i,b_k|λ) = p(λ|a_i,b_k) p(a_i,b_k) / p(λ) stays non-zero for every λ "
            "when the unconditional p(λ) vanishes on the listed zero-sets"
        ),
        status="CF respected" if respected else "CF violated",
    )


class PairFreedom(BaseModel):
    pair: str
    probability: float
    max_deviation: float
    min_posterior: float


class FreedomDiagnostic(BaseModel):
    """
    Bayes inversion p(a, b|λ) under the λ mixture induced by the run's
    setting-choice probabilities; freedom means p(a, b|λ) = p(a, b).
    """
    mixture: str
    pairs: list[PairFreedom]
    freedom_respected: bool

    class Config:
        allow_mutation = False


def freedom_diagnostic(
    model: ModelSpec, config: ExperimentConfig, grid_points: int = density_grid_points
) -> FreedomDiagnostic:
    """
    :param model: a model with a density
    :param config: settings, pair probabilities and conditioning side
    :param grid_points: λ grid resolution
    :return: per pair, the largest |p(a, b|λ) - p(a, b)| and smallest p(a, b|λ) on the grid
    :raises OracleOnlyError: the model has no density
    """
    if model.lambda_density is None:
        raise OracleOnlyError(f"model {model.name!r} has no hidden-variable density")

    grid = np.linspace(0.0, TWO_PI, grid_points, endpoint=False)
    values = config.settings.as_tuple()
    joint = {
        pair: config.probability(pair)
        * model.density(grid, pair_context(model, values, pair, config.conditioning_side))
        for pair in SettingPair.all()
    }
    mixture = np.sum(list(joint.values()), axis=0)
    positive = mixture > 0.0

    pairs = []
    for pair, weighted in joint.items():
        posterior = weighted[positive] / mixture[positive]
        pairs.append(
            PairFreedom(
                pair=pair.label,
                probability=config.probability(pair),
                max_deviation=float(np.max(np.abs(posterior - config.probability(pair)))),
                min_posterior=float(np.min(posterior)),
            )
        )
    return FreedomDiagnostic(
        mixture="Σ p(a_i,b_k) p(λ|a_i,b_k) from the configured choice probabilities",
        pairs=pairs,
        freedom_respected=all(entry.max_deviation < mi_tolerance for entry in pairs),
    )
