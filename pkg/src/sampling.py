"""
Seeded hidden-variable sampling and trial-stream generation.

Trials are generated in fixed-size chunks. Chunk ``k`` draws its setting
pairs and its λ values from two independent PCG64 substreams seeded with
``SeedSequence(entropy=seed, spawn_key=(k, stream))``, so the output only
depends on (config, seed) and never on how many workers produced it.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .config import ExperimentConfig
from .core import Angle, ConditioningContext, ModelSpec, Outcome, SettingPair
from .enums import ConditioningKind, Side, Stream
from .errors import ModelError, UnsupportedContextError
from .models import CATALOG, ModelCatalog
from .settings import TWO_PI, density_grid_points
from .support import chunk_spans
from .type_aliases import FloatArray, IndexArray, SignArray

logger = logging.getLogger(__name__)

BIT_GENERATOR = "PCG64"
SEEDING = "numpy.random.SeedSequence(entropy=seed, spawn_key=(chunk_index, stream))"
# envelope head-room over the gridded density maximum
REJECTION_MARGIN = 1.01


def rng_metadata() -> dict:
    """
    :return: the RNG contract, recorded in reports and manifests
    """
    return {
        "bit_generator": BIT_GENERATOR,
        "seeding": SEEDING,
        "streams": {stream.name.lower(): int(stream) for stream in Stream},
        "lambda_sampling": "inverse-transform (model sampler) or rejection fallback",
        "numpy": np.__version__,
    }


def substream(seed: int, chunk_index: int, stream: Stream) -> np.random.Generator:
    """
    :param seed: experiment seed
    :param chunk_index: chunk number
    :param stream: which random quantity the generator feeds
    :return: an independent generator for (seed, chunk, stream)
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(chunk_index, int(stream)))
    return np.random.Generator(np.random.PCG64(sequence))


def conditioning_kind(model: ModelSpec, side: Side) -> ConditioningKind:
    """
    Decide how λ is conditioned in a run of ``model``.

    :param model: the model
    :param side: the configured conditioning side
    :return: the requested side's kind if the model defines it, else unconditioned
    :raises UnsupportedContextError: if the model defines neither
    """
    wanted = (
        ConditioningKind.ON_ALICE_SETTING
        if side is Side.ALICE
        else ConditioningKind.ON_BOB_SETTING
    )
    if wanted in model.contexts:
        return wanted
    if ConditioningKind.UNCONDITIONED in model.contexts:
        return ConditioningKind.UNCONDITIONED
    raise UnsupportedContextError(
        f"model {model.name!r} cannot condition λ on {side.value}'s setting"
    )


def context_for(model: ModelSpec, config: ExperimentConfig, pair: SettingPair) -> ConditioningContext:
    """
    :return: the λ context a trial on ``pair`` is drawn from
    """
    kind = conditioning_kind(model, config.conditioning_side)
    a, b = config.settings.for_pair(pair)
    match kind:
        case ConditioningKind.ON_ALICE_SETTING:
            return ConditioningContext.on_alice(a)
        case ConditioningKind.ON_BOB_SETTING:
            return ConditioningContext.on_bob(b)
        case _:
            return ConditioningContext.unconditioned()


def _rejection(
    model: ModelSpec, context: ConditioningContext, rng: np.random.Generator, size: int
) -> FloatArray:
    grid = np.linspace(0.0, TWO_PI, density_grid_points, endpoint=False)
    envelope = REJECTION_MARGIN * float(np.max(model.density(grid, context)))
    if not envelope > 0.0:
        raise ModelError(f"model {model.name!r} has an identically zero density")

    out = np.empty(size, dtype=np.float64)
    filled = 0
    while filled < size:
        batch = max(2 * (size - filled), 64)
        proposals = rng.random(batch) * TWO_PI
        accepted = proposals[rng.random(batch) * envelope < model.density(proposals, context)]
        take = accepted[: size - filled]
        out[filled : filled + take.size] = take
        filled += take.size
    return out


def sample_lambdas(
    model: ModelSpec, kind: ConditioningKind, centers: FloatArray, rng: np.random.Generator
) -> FloatArray:
    """
    Draw one λ per entry of ``centers``.

    Models with an inverse-CDF sampler consume exactly one uniform per draw.
    Other densities fall back to rejection sampling with a uniform proposal,
    grouped by conditioning angle in ascending order.

    :param model: the model
    :param kind: conditioning kind shared by every draw
    :param centers: per-draw conditioning angle (ignored when unconditioned)
    :param rng: the λ generator
    :return: λ values in [0, 2π)
    """
    centers = np.asarray(centers, dtype=np.float64)
    if kind is ConditioningKind.UNCONDITIONED:
        model.require_context(ConditioningContext.unconditioned())
    else:
        model.require_context(ConditioningContext(kind, Angle(0.0)))

    if model.sampler is not None:
        lam = model.sampler(rng.random(centers.size), centers)
        return np.where(lam >= TWO_PI, 0.0, lam)

    if kind is ConditioningKind.UNCONDITIONED:
        return _rejection(model, ConditioningContext.unconditioned(), rng, centers.size)

    out = np.empty(centers.size, dtype=np.float64)
    for center in np.unique(centers):
        mask = centers == center
        context = ConditioningContext(kind, Angle(float(center)))
        out[mask] = _rejection(model, context, rng, int(mask.sum()))
    return out


def sample_lambda(model: ModelSpec, context: ConditioningContext, rng: np.random.Generator) -> Angle:
    """
    Draw a single λ from p(λ|context).

    :param model: the model
    :param context: conditioning context
    :param rng: generator; the draw is a deterministic function of its state
    :return: the hidden variable
    :raises UnsupportedContextError: if the model does not define ``context``
    """
    model.require_context(context)
    lam = sample_lambdas(model, context.kind, np.array([context.center]), rng)
    return Angle(float(lam[0]))


def select_pairs(probabilities: Sequence[float], uniforms: FloatArray) -> IndexArray:
    """
    Map uniforms to setting-pair columns (0..3) by inverse CDF.

    :param probabilities: the four pair probabilities
    :param uniforms: draws in [0, 1)
    :return: column index per draw
    """
    cumulative = np.cumsum(np.asarray(probabilities, dtype=np.float64))
    cumulative /= cumulative[-1]
    cumulative[-1] = 1.0
    return np.minimum(np.searchsorted(cumulative, uniforms, side="right"), 3)


@dataclass(frozen=True)
class TrialRecord:
    """
    One simulated event: a row of the experiment's data table.

    ``index`` is the 1-based event number. ``lam`` is the hidden variable,
    None when it was not retained.
    """
    index: int
    pair: SettingPair
    a_outcome: Outcome | None
    b_outcome: Outcome | None
    product: Outcome
    lam: Angle | None = None


def _frozen(array: np.ndarray | None) -> np.ndarray | None:
    if array is not None:
        array.flags.writeable = False
    return array


class TrialStream(Sequence[TrialRecord]):
    """
    Immutable, ordered sequence of trials stored column-wise.

    Columns: ``columns`` (setting-pair column 0..3), ``products``, and
    optionally ``a_outcomes``, ``b_outcomes`` and ``lambdas``.
    """
    def __init__(
        self,
        columns: IndexArray,
        products: SignArray,
        a_outcomes: SignArray | None = None,
        b_outcomes: SignArray | None = None,
        lambdas: FloatArray | None = None,
    ) -> None:
        self.columns = _frozen(np.asarray(columns, dtype=np.int64))
        self.products = _frozen(np.asarray(products, dtype=np.int8))
        self.a_outcomes = _frozen(None if a_outcomes is None else np.asarray(a_outcomes, dtype=np.int8))
        self.b_outcomes = _frozen(None if b_outcomes is None else np.asarray(b_outcomes, dtype=np.int8))
        self.lambdas = _frozen(None if lambdas is None else np.asarray(lambdas, dtype=np.float64))

        for name in ("products", "a_outcomes", "b_outcomes", "lambdas"):
            column = getattr(self, name)
            if column is not None and column.shape != self.columns.shape:
                raise ValueError(f"column {name} has shape {column.shape}, expected {self.columns.shape}")

    @classmethod
    def concat(cls, streams: Sequence[TrialStream]) -> TrialStream:
        def join(name: str) -> np.ndarray | None:
            parts = [getattr(stream, name) for stream in streams]
            if not parts or any(part is None for part in parts):
                return None
            return np.concatenate(parts)

        if not streams:
            return cls(np.empty(0, np.int64), np.empty(0, np.int8))
        return cls(
            join("columns"),
            join("products"),
            join("a_outcomes"),
            join("b_outcomes"),
            join("lambdas"),
        )

    @property
    def lambda_retained(self) -> bool:
        return self.lambdas is not None and not np.any(np.isnan(self.lambdas))

    @property
    def outcomes_retained(self) -> bool:
        return self.a_outcomes is not None and self.b_outcomes is not None

    def mask(self, pair: SettingPair) -> np.ndarray:
        return self.columns == pair.column

    def products_for(self, pair: SettingPair) -> SignArray:
        return self.products[self.mask(pair)]

    def lambdas_for(self, pair: SettingPair) -> FloatArray | None:
        if self.lambdas is None:
            return None
        return self.lambdas[self.mask(pair)]

    def counts(self) -> dict[SettingPair, int]:
        tally = np.bincount(self.columns, minlength=4)
        return {pair: int(tally[pair.column]) for pair in SettingPair.all()}

    def without_lambda(self) -> TrialStream:
        return TrialStream(self.columns, self.products, self.a_outcomes, self.b_outcomes, None)

    def __len__(self) -> int:
        return int(self.columns.size)

    def __getitem__(self, position):  # type: ignore[override]
        if isinstance(position, slice):
            return TrialStream(
                self.columns[position],
                self.products[position],
                None if self.a_outcomes is None else self.a_outcomes[position],
                None if self.b_outcomes is None else self.b_outcomes[position],
                None if self.lambdas is None else self.lambdas[position],
            )
        if position < 0:
            position += len(self)
        if not 0 <= position < len(self):
            raise IndexError(position)

        lam = None
        if self.lambdas is not None and not math.isnan(self.lambdas[position]):
            lam = Angle(float(self.lambdas[position]))
        return TrialRecord(
            index=position + 1,
            pair=SettingPair.from_column(int(self.columns[position])),
            a_outcome=None if self.a_outcomes is None else Outcome(int(self.a_outcomes[position])),
            b_outcome=None if self.b_outcomes is None else Outcome(int(self.b_outcomes[position])),
            product=Outcome(int(self.products[position])),
            lam=lam,
        )

    def __iter__(self) -> Iterator[TrialRecord]:
        for position in range(len(self)):
            yield self[position]


def generate_chunk(
    model: ModelSpec, config: ExperimentConfig, chunk_index: int, start: int, stop: int
) -> TrialStream:
    """
    Simulate trials ``start`` .. ``stop - 1``.

    Each trial draws a setting pair, then λ from the model's density
    conditioned per ``config.conditioning_side``, then both local outcomes.

    :param model: a sampleable model
    :param config: the experiment config
    :param chunk_index: selects the RNG substreams
    :param start: first trial
    :param stop: one past the last trial
    :return: the chunk's trials
    """
    size = stop - start
    pair_rng = substream(config.seed, chunk_index, Stream.SETTING_PAIRS)
    lambda_rng = substream(config.seed, chunk_index, Stream.LAMBDA)

    columns = select_pairs(config.pair_probabilities, pair_rng.random(size))
    alice_index = columns // 2 + 1
    bob_index = columns % 2 + 1

    alice_settings = np.array([config.settings.a1, config.settings.a2])[alice_index - 1]
    bob_settings = np.array([config.settings.b1, config.settings.b2])[bob_index - 1]

    kind = conditioning_kind(model, config.conditioning_side)
    match kind:
        case ConditioningKind.ON_ALICE_SETTING:
            centers = alice_settings
        case ConditioningKind.ON_BOB_SETTING:
            centers = bob_settings
        case _:
            centers = np.zeros(size)
    lam = sample_lambdas(model, kind, centers, lambda_rng)

    # each wing only ever sees its own setting
    a_out = np.empty(size, dtype=np.int8)
    b_out = np.empty(size, dtype=np.int8)
    for index in (1, 2):
        chosen = alice_index == index
        a_out[chosen] = model.outcomes(Side.ALICE, config.settings.alice(index), lam[chosen])
        chosen = bob_index == index
        b_out[chosen] = model.outcomes(Side.BOB, config.settings.bob(index), lam[chosen])

    return TrialStream(columns, a_out * b_out, a_out, b_out, lam)


def _chunk_worker(config_json: dict, span: tuple[int, int, int]) -> TrialStream:
    config = ExperimentConfig.from_json(config_json)
    return generate_chunk(CATALOG.get_model(config.model), config, *span)


def run_experiment(
    config: ExperimentConfig,
    workers: int = 1,
    retain_lambda: bool = True,
    model: ModelSpec | None = None,
    catalog: ModelCatalog = CATALOG,
) -> TrialStream:
    """
    Run the idealized Bell experiment described by ``config``.

    :param config: validated experiment config
    :param workers: worker processes; the output does not depend on it
    :param retain_lambda: keep the hidden variable of every trial
    :param model: use this model instead of looking ``config.model`` up
    :param catalog: where to look the model up
    :return: exactly ``config.trials`` trials, ordered by event number
    :raises OracleOnlyError: the model cannot be sampled
    :raises UnknownModelError: the model name is not in the catalog
    """
    model = model or catalog.get_model(config.model)
    model.require_sampleable()
    for pair in SettingPair.all():
        model.require_context(context_for(model, config, pair))

    spans = list(chunk_spans(config.trials, config.chunk_size))
    parallel = workers > 1 and len(spans) > 1
    if parallel and not (config.model in CATALOG and CATALOG[config.model] is model):
        logger.warning("model %r is not in the default catalog; generating in-process", model.name)
        parallel = False

    logger.info(
        "running %d trials of %r in %d chunks (%d workers)",
        config.trials,
        model.name,
        len(spans),
        workers if parallel else 1,
    )

    if parallel:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            chunks = list(executor.map(partial(_chunk_worker, config.to_json()), spans))
    else:
        chunks = [generate_chunk(model, config, *span) for span in spans]

    stream = TrialStream.concat(chunks)
    return stream if retain_lambda else stream.without_lambda()
