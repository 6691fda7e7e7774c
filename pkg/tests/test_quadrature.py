import itertools
import math

import numpy as np
import pytest

from src.core import ConditioningContext
from src.enums import QuadratureMethod, Side
from src.errors import OracleOnlyError, QuadratureBudgetError, UnsupportedContextError
from src.quadrature import (
    QuadratureSettings,
    analytic_chsh,
    bound_chain,
    cf_freedom_report,
    freedom_diagnostic,
    integrate_circle,
    mi_diagnostic,
    mi_survey,
    model_chsh,
    quad_chsh,
    quad_correlation,
    quad_marginal,
    tv_distance,
)

from .conftest import OPTIMAL

ADAPTIVE = QuadratureSettings(method=QuadratureMethod.ADAPTIVE)
# ½∫|¼|cos λ| - ¼|cos(λ - π/4)|| dλ in closed form
FELDMANN_TV_0_45 = math.sin(math.pi / 8) + math.sin(3 * math.pi / 8) - 1


def random_pairs(rng, count=16):
    return rng.uniform(0.0, 2 * math.pi, size=(count, 2))


class TestSettings:
    @pytest.mark.parametrize("fields", [{"panels": 62}, {"panels": 65}, {"tolerance": 0.0}, {"max_evaluations": 0}])
    def test_rejects(self, fields):
        with pytest.raises(ValueError):
            QuadratureSettings(**fields)

    def test_budget(self, feldmann):
        with pytest.raises(QuadratureBudgetError):
            quad_correlation(
                feldmann, 0.0, 1.0, ConditioningContext.on_alice(0.0), QuadratureSettings(max_evaluations=300)
            )


class TestIntegrateCircle:
    def test_step_function(self):
        value = integrate_circle(lambda lam: np.where(np.cos(lam) >= 0, 1.0, -1.0), [math.pi / 2, 3 * math.pi / 2])
        assert value == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("q", [QuadratureSettings(), ADAPTIVE])
    def test_kinked_function(self, q):
        assert integrate_circle(lambda lam: np.abs(np.cos(lam)), [math.pi / 2, 3 * math.pi / 2], q) == pytest.approx(
            4.0, abs=1e-9
        )


class TestCorrelation:
    @pytest.mark.parametrize("q", [QuadratureSettings(), ADAPTIVE])
    def test_feldmann_examples(self, feldmann, q):
        expected = -math.sqrt(2) / 2
        alice = quad_correlation(feldmann, 0.0, math.pi / 4, ConditioningContext.on_alice(0.0), q)
        bob = quad_correlation(feldmann, 0.0, math.pi / 4, ConditioningContext.on_bob(math.pi / 4), q)
        assert alice == pytest.approx(expected, abs=1e-8)
        assert bob == pytest.approx(expected, abs=1e-8)

    def test_uniform_example(self, uniform_sign):
        value = quad_correlation(uniform_sign, 0.0, math.pi / 4, ConditioningContext.unconditioned())
        assert value == pytest.approx(-0.5, abs=1e-8)

    def test_matches_closed_form(self, feldmann, uniform_sign, rng):
        for a, b in random_pairs(rng):
            assert quad_correlation(feldmann, a, b, ConditioningContext.on_alice(a)) == pytest.approx(
                feldmann.analytic_correlation(a, b), abs=1e-8
            )
            assert quad_correlation(uniform_sign, a, b, ConditioningContext.unconditioned()) == pytest.approx(
                uniform_sign.analytic_correlation(a, b), abs=1e-8
            )

    def test_conditioning_symmetry(self, feldmann, rng):
        for a, b in random_pairs(rng):
            alice = quad_correlation(feldmann, a, b, ConditioningContext.on_alice(a))
            bob = quad_correlation(feldmann, a, b, ConditioningContext.on_bob(b))
            assert alice == pytest.approx(bob, abs=1e-8)

    def test_unsupported_context(self, feldmann, oracle):
        with pytest.raises(UnsupportedContextError):
            quad_correlation(feldmann, 0.0, 1.0, ConditioningContext.unconditioned())
        with pytest.raises(OracleOnlyError):
            quad_correlation(oracle, 0.0, 1.0, ConditioningContext.unconditioned())


class TestMarginals:
    def test_feldmann_marginals_vanish(self, feldmann, rng):
        for a, b in random_pairs(rng):
            for context in (ConditioningContext.on_alice(a), ConditioningContext.on_bob(b)):
                assert quad_marginal(feldmann, Side.ALICE, a, context) == pytest.approx(0.0, abs=1e-8)
                assert quad_marginal(feldmann, Side.BOB, b, context) == pytest.approx(0.0, abs=1e-8)

    def test_uniform_marginal(self, uniform_sign):
        value = quad_marginal(uniform_sign, Side.BOB, 1.3, ConditioningContext.unconditioned())
        assert value == pytest.approx(0.0, abs=1e-8)


class TestChsh:
    def test_singlet_optimal(self, oracle):
        assert analytic_chsh(oracle.analytic_correlation, OPTIMAL) == pytest.approx(-2 * math.sqrt(2), abs=1e-12)

    def test_uniform_closed_form(self, uniform_sign):
        assert analytic_chsh(uniform_sign.analytic_correlation, OPTIMAL) == pytest.approx(-2.0, abs=1e-12)

    def test_constant_zero(self):
        assert analytic_chsh(lambda a, b: 0.0, OPTIMAL) == 0.0

    @pytest.mark.parametrize("side", list(Side))
    def test_quadrature_chsh(self, feldmann, uniform_sign, side):
        assert quad_chsh(feldmann, OPTIMAL, side) == pytest.approx(-2 * math.sqrt(2), abs=1e-8)
        assert quad_chsh(uniform_sign, OPTIMAL, side) == pytest.approx(-2.0, abs=1e-8)

    def test_model_chsh_uses_closed_form(self, oracle):
        assert model_chsh(oracle, OPTIMAL) == pytest.approx(-2 * math.sqrt(2), abs=1e-12)


class TestBoundChain:
    def test_uniform(self, uniform_sign):
        chain = bound_chain(uniform_sign, OPTIMAL)
        assert chain.s_value == pytest.approx(-2.0, abs=1e-8)
        assert abs(chain.s_value) <= chain.abs_integral + 1e-9
        assert chain.abs_integral <= chain.bound + 1e-9
        assert chain.bound == pytest.approx(2.0, abs=1e-9)

    def test_conditioned_model_has_no_common_density(self, feldmann):
        with pytest.raises(UnsupportedContextError):
            bound_chain(feldmann, OPTIMAL)


class TestMiDiagnostic:
    def test_uniform_respects_mi(self, uniform_sign):
        context = ConditioningContext.unconditioned()
        diagnostic = mi_diagnostic(uniform_sign, context, context)
        assert diagnostic.tv_distance == pytest.approx(0.0, abs=1e-9)
        assert diagnostic.mi_respected

    def test_feldmann_same_context(self, feldmann):
        context = ConditioningContext.on_alice(0.0)
        assert mi_diagnostic(feldmann, context, context).tv_distance == 0.0

    def test_feldmann_violates_mi(self, feldmann):
        diagnostic = mi_diagnostic(feldmann, ConditioningContext.on_alice(0.0), ConditioningContext.on_alice(math.pi / 4))
        assert diagnostic.tv_distance == pytest.approx(FELDMANN_TV_0_45, abs=1e-6)
        assert diagnostic.tv_distance > 0.05
        assert not diagnostic.mi_respected

    def test_matches_riemann_sum(self, feldmann):
        lam = np.linspace(0.0, 2 * math.pi, 2_000_000, endpoint=False)
        riemann = 0.5 * np.mean(np.abs(0.25 * np.abs(np.cos(lam)) - 0.25 * np.abs(np.cos(lam - 1.0)))) * 2 * math.pi
        value = tv_distance(feldmann, ConditioningContext.on_alice(0.0), ConditioningContext.on_bob(1.0))
        assert value == pytest.approx(riemann, abs=1e-6)

    def test_metric_properties(self, feldmann, rng):
        contexts = [ConditioningContext.on_alice(u) for u in rng.uniform(0.0, 2 * math.pi, 3)]
        d = {(i, j): tv_distance(feldmann, contexts[i], contexts[j]) for i, j in itertools.product(range(3), repeat=2)}
        for i, j in itertools.product(range(3), repeat=2):
            assert d[i, j] == pytest.approx(d[j, i], abs=1e-9)
            assert 0.0 <= d[i, j] <= 1.0
        for i, j, k in itertools.permutations(range(3)):
            assert d[i, k] <= d[i, j] + d[j, k] + 1e-9

    def test_survey(self, feldmann, uniform_sign, config_factory):
        feldmann_survey = mi_survey(feldmann, config_factory())
        assert len(feldmann_survey) == 1
        assert not feldmann_survey[0].mi_respected
        assert all(entry.mi_respected for entry in mi_survey(uniform_sign, config_factory("uniform-sign")))


class TestCfFreedom:
    def test_feldmann(self, feldmann):
        assert feldmann.zero_set(ConditioningContext.on_alice(0.0)) == pytest.approx((math.pi / 2, 3 * math.pi / 2))
        report = cf_freedom_report(feldmann, (0.0, 1.0, 2.0, 3.0))
        assert report.applicable
        assert len(report.pairs) == 4
        first = report.pairs[0]
        assert first.pair == "A1B1"
        assert first.zero_set == pytest.approx([math.pi / 2, 3 * math.pi / 2], abs=1e-12)
        assert [info.kind for info in first.contexts] == ["ON_ALICE_SETTING"]
        assert first.isolated
        assert report.status == "CF respected"

    @pytest.mark.parametrize(
        "side, expected",
        [
            # a1 = 0 for A1B1, a2 = 1 for A2B2
            (Side.ALICE, [[math.pi / 2, 3 * math.pi / 2], [1 + math.pi / 2, 1 + 3 * math.pi / 2]]),
            # b1 = 1 for A1B1, b2 = 2 for A2B2
            (Side.BOB, [[1 + math.pi / 2, 1 + 3 * math.pi / 2], [2 + math.pi / 2, 2 + 3 * math.pi / 2 - 2 * math.pi]]),
        ],
    )
    def test_feldmann_follows_conditioning_side(self, feldmann, side, expected):
        report = cf_freedom_report(feldmann, (0.0, 1.0, 1.0, 2.0), side)
        by_pair = {entry.pair: entry for entry in report.pairs}
        assert by_pair["A1B1"].zero_set == pytest.approx(sorted(expected[0]), abs=1e-12)
        assert by_pair["A2B2"].zero_set == pytest.approx(sorted(expected[1]), abs=1e-12)
        assert all(len(entry.contexts) == 1 for entry in report.pairs)

    def test_uniform(self, uniform_sign):
        report = cf_freedom_report(uniform_sign, OPTIMAL)
        assert all(entry.zero_set == [] for entry in report.pairs)
        assert report.cf_respected

    def test_oracle(self, oracle):
        report = cf_freedom_report(oracle, OPTIMAL)
        assert not report.applicable
        assert report.status == "not applicable"


class TestFreedom:
    def test_uniform_respects_freedom(self, uniform_sign, config_factory):
        diagnostic = freedom_diagnostic(uniform_sign, config_factory("uniform-sign"))
        assert diagnostic.freedom_respected
        assert all(entry.max_deviation < 1e-12 for entry in diagnostic.pairs)

    def test_feldmann_violates_freedom(self, feldmann, config_factory):
        diagnostic = freedom_diagnostic(feldmann, config_factory())
        assert not diagnostic.freedom_respected
        # p(λ|a) vanishes at a ± π/2, so some pair has posterior 0 there
        assert min(entry.min_posterior for entry in diagnostic.pairs) == pytest.approx(0.0, abs=1e-6)

    def test_oracle(self, oracle, config_factory):
        with pytest.raises(OracleOnlyError):
            freedom_diagnostic(oracle, config_factory("singlet-oracle"))
