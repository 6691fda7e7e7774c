"""
End-to-end checks of the simulator's headline numbers, one class per criterion.
"""
import itertools
import math

import numpy as np
import pytest

from src.config import SettingAngles
from src.core import ConditioningContext, SettingPair
from src.enums import Side
from src.estimators import (
    chsh_statistic,
    counterfactual_trial,
    estimate_correlation,
    marginal_estimate,
    pointwise_c_array,
    regularity_check,
)
from src.events import write_event_csv
from src.models import CATALOG
from src.quadrature import analytic_chsh, mi_diagnostic, quad_correlation, quad_marginal
from src.sampling import run_experiment

from .conftest import OPTIMAL

N = 1_000_000


class TestFeldmannCorrelation:
    def test_monte_carlo_and_quadrature(self, feldmann, config_factory, rng):
        for index, (a, b) in enumerate(rng.uniform(0.0, 2 * math.pi, size=(8, 2))):
            expected = -math.cos(a - b)
            assert quad_correlation(feldmann, a, b, ConditioningContext.on_alice(a)) == pytest.approx(expected, abs=1e-8)

            config = config_factory(settings=(a, 0.0, b, 0.0), pair_probabilities=(1.0, 0.0, 0.0, 0.0), trials=N, seed=index)
            estimate = estimate_correlation(run_experiment(config, retain_lambda=False), SettingPair(1, 1))
            assert abs(estimate.mean - expected) <= 5 * estimate.std_error


class TestChshViolation:
    def test_feldmann_exceeds_bound(self, feldmann, config_factory):
        report = chsh_statistic(run_experiment(config_factory(trials=4 * N, seed=1), retain_lambda=False))
        assert abs(report.s_value) == pytest.approx(2 * math.sqrt(2), abs=0.02)
        assert report.sigmas_above_bound() > 10
        assert analytic_chsh(feldmann.analytic_correlation, OPTIMAL) == pytest.approx(-2 * math.sqrt(2), abs=1e-12)


class TestMiBaselineBound:
    def test_random_settings(self, config_factory, rng):
        for index, settings in enumerate(rng.uniform(0.0, 2 * math.pi, size=(100, 4))):
            config = config_factory("uniform-sign", settings=tuple(settings), trials=40_000, seed=index)
            report = chsh_statistic(run_experiment(config, retain_lambda=False))
            assert abs(report.s_value) <= 2 + 5 * report.s_std_error

    def test_optimal_settings(self, config_factory):
        report = chsh_statistic(run_experiment(config_factory("uniform-sign", trials=4 * N, seed=2), retain_lambda=False))
        assert report.s_value == pytest.approx(-2.0, abs=0.02)


class TestCounterfactualIdentity:
    @pytest.mark.parametrize("model_name", ["feldmann", "uniform-sign"])
    def test_pointwise(self, model_name, rng):
        model = CATALOG[model_name]
        draws = rng.uniform(0.0, 2 * math.pi, size=(100_000, 5))
        lam = draws[:, 0]
        # outcome functions broadcast over per-row settings
        a1, a2 = (model.outcome_a(draws[:, column], lam).astype(np.int64) for column in (1, 2))
        b1, b2 = (model.outcome_b(draws[:, column], lam).astype(np.int64) for column in (3, 4))
        four_term = a1 * b1 - a1 * b2 + a2 * b1 + a2 * b2
        factored = a1 * (b1 - b2) + a2 * (b1 + b2)
        np.testing.assert_array_equal(four_term, factored)
        assert set(np.unique(four_term).tolist()) <= {-2, 2}

        # the per-trial API agrees on a subsample
        for row in draws[:200]:
            angles = SettingAngles.from_tuple(row[1:])
            trial = counterfactual_trial(model, angles, row[0])
            assert trial.s_trial == int(pointwise_c_array(model, angles, row[:1])[0])
            assert trial.s_trial in (-2, 2)


class TestConditioningSymmetry:
    def test_quadrature(self, feldmann, rng):
        for a, b in rng.uniform(0.0, 2 * math.pi, size=(16, 2)):
            alice = quad_correlation(feldmann, a, b, ConditioningContext.on_alice(a))
            bob = quad_correlation(feldmann, a, b, ConditioningContext.on_bob(b))
            assert alice == pytest.approx(bob, abs=1e-8)

    def test_end_to_end(self, config_factory):
        alice = chsh_statistic(run_experiment(config_factory(trials=N, seed=3, conditioning_side=Side.ALICE), retain_lambda=False))
        bob = chsh_statistic(run_experiment(config_factory(trials=N, seed=4, conditioning_side=Side.BOB), retain_lambda=False))
        combined = math.hypot(alice.s_std_error, bob.s_std_error)
        assert abs(alice.s_value - bob.s_value) <= 5 * combined


class TestVanishingMarginals:
    def test_quadrature(self, feldmann):
        a1, a2, b1, b2 = OPTIMAL
        for a, b in ((a1, b1), (a2, b2), (a1, b2)):
            for context in (ConditioningContext.on_alice(a), ConditioningContext.on_bob(b)):
                assert quad_marginal(feldmann, Side.ALICE, a, context) == pytest.approx(0.0, abs=1e-8)
                assert quad_marginal(feldmann, Side.BOB, b, context) == pytest.approx(0.0, abs=1e-8)

    def test_empirical(self, config_factory):
        stream = run_experiment(config_factory(trials=N, seed=6), retain_lambda=False)
        for side, index in itertools.product(Side, (1, 2)):
            assert abs(marginal_estimate(stream, side, index).mean) <= 5 / math.sqrt(N)


class TestMiDiagnostic:
    def test_feldmann_against_riemann_sum(self, feldmann):
        lam = np.linspace(0.0, 2 * math.pi, 4_000_000, endpoint=False)
        oracle = 0.5 * np.sum(np.abs(0.25 * np.abs(np.cos(lam)) - 0.25 * np.abs(np.cos(lam - math.pi / 4)))) * (
            2 * math.pi / lam.size
        )
        diagnostic = mi_diagnostic(feldmann, ConditioningContext.on_alice(0.0), ConditioningContext.on_alice(math.pi / 4))
        assert diagnostic.tv_distance == pytest.approx(oracle, abs=1e-6)
        assert diagnostic.tv_distance > 0.05

    def test_uniform(self, uniform_sign):
        context = ConditioningContext.unconditioned()
        assert mi_diagnostic(uniform_sign, context, context).tv_distance == pytest.approx(0.0, abs=1e-9)


class TestReproducibilityHypothesis:
    def test_uniform(self, config_factory):
        report = regularity_check(run_experiment(config_factory("uniform-sign", trials=400_000, seed=7)))
        assert all(entry.statistic < 0.01 for entry in report.entries)

    def test_feldmann_cross_conditioning(self, config_factory):
        settings = (0.0, math.pi / 4, math.pi / 8, 5 * math.pi / 8)
        report = regularity_check(run_experiment(config_factory(settings=settings, trials=400_000, seed=8)))
        # sup |F₀ - F_{π/4}| for the CDFs of ¼|cos λ| and ¼|cos(λ - π/4)| on [0, 2π)
        grid = np.linspace(0.0, 2 * math.pi, 200_001)
        step = grid[1] - grid[0]
        first = np.cumsum(0.25 * np.abs(np.cos(grid))) * step
        second = np.cumsum(0.25 * np.abs(np.cos(grid - math.pi / 4))) * step
        truth = float(np.max(np.abs(first - second)))
        for a2_pair in (SettingPair(2, 1), SettingPair(2, 2)):
            for a1_pair in (SettingPair(1, 1), SettingPair(1, 2)):
                assert report.entry(a1_pair, a2_pair).statistic >= truth / 2


class TestDeterminism:
    @pytest.mark.parametrize("workers", [2, 8])
    def test_worker_count_does_not_matter(self, config_factory, tmp_path, workers):
        config = config_factory(trials=50_000, chunk_size=4096, seed=9)
        serial = write_event_csv(run_experiment(config, workers=1), tmp_path / "serial.csv", include_lambda=True)
        parallel = write_event_csv(run_experiment(config, workers=workers), tmp_path / "parallel.csv", include_lambda=True)
        assert serial.read_bytes() == parallel.read_bytes()
