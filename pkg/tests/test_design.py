import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from repsim.core import TRUTHFUL, ContractViolation, MixSpec, Side, low_mixing
from repsim.design import (
    DesignConfig,
    ScoreKind,
    bernoulli_kl,
    effective_mixing,
    expected_score_gap,
    penalty_mixing,
    score,
    scored_reputation_update,
)

import oracles

probs = st.floats(0.001, 0.999)


class TestEffectiveMixing:
    def test_default_prior_values(self):
        m = effective_mixing(low_mixing(0.4, 0.6, 0.8), 0.5)
        assert m.prob == pytest.approx(0.9583333333333333, abs=1e-12)
        m = effective_mixing(low_mixing(0.6, 0.6, 0.8), 0.5)
        assert m.prob == pytest.approx(0.041666666666666664, abs=1e-12)

    @given(st.floats(0.01, 0.99).filter(lambda x: abs(x - 0.5) > 1e-9), st.floats(0, 1))
    def test_exact_forms(self, lam, q):
        base = low_mixing(lam, 0.6, 0.8)
        got = effective_mixing(base, q)
        if base.side is Side.MIX_AFTER_S1:
            assert got.prob == (1 - q) * base.prob + q
        else:
            assert got.prob == (1 - q) * base.prob

    def test_endpoints(self):
        base = low_mixing(0.3, 0.6, 0.8)
        assert effective_mixing(base, 0.0) == base
        assert effective_mixing(base, 1.0).prob == 1.0
        assert effective_mixing(TRUTHFUL, 0.7) is TRUTHFUL

    def test_q_range(self):
        with pytest.raises(ContractViolation):
            effective_mixing(TRUTHFUL, 1.5)


class TestScores:
    def test_values(self):
        assert score(ScoreKind.LOG, 0.8, 1) == pytest.approx(math.log(0.8))
        assert score(ScoreKind.LOG, 0.8, 0) == pytest.approx(math.log(0.2))
        assert score(ScoreKind.BRIER, 0.8, 1) == pytest.approx(-0.04)

    def test_log_score_of_certain_miss(self):
        with pytest.raises(ValueError):
            score(ScoreKind.LOG, 1.0, 0)

    def test_none_rule(self):
        with pytest.raises(ValueError):
            score(ScoreKind.NONE, 0.5, 1)

    @given(probs, probs)
    def test_strict_propriety(self, p, r):
        for kind in (ScoreKind.LOG, ScoreKind.BRIER):
            gap = expected_score_gap(p, r, kind)
            direct = (p * score(kind, p, 1) + (1 - p) * score(kind, p, 0)) - (
                p * score(kind, r, 1) + (1 - p) * score(kind, r, 0))
            assert gap == pytest.approx(direct, abs=1e-12)
            assert gap >= -1e-15
            if abs(p - r) > 1e-6:
                assert gap > 0

    def test_kl(self):
        assert bernoulli_kl(0.3, 0.3) == 0.0
        assert bernoulli_kl(0.8, 0.2) == pytest.approx(oracles.bernoulli_kl(0.8, 0.2))
        assert bernoulli_kl(1.0, 0.5) == pytest.approx(math.log(2))


class TestPenaltyMixing:
    def test_zero_penalty_is_baseline(self):
        for lam in (0.1, 0.4, 0.6, 0.9):
            assert penalty_mixing(lam, 0.6, 0.8, 0.0) == low_mixing(lam, 0.6, 0.8)

    @pytest.mark.parametrize("lam", [0.1, 0.3, 0.45, 0.55, 0.7, 0.9])
    @pytest.mark.parametrize("rho", [0.2, 0.5, 0.8])
    def test_tilted_indifference(self, lam, rho):
        kappa = 0.01
        mix = penalty_mixing(lam, 0.6, 0.8, kappa, rho)
        side = int(mix.side)
        post = {y: oracles.single_expert_posterior(rho, y, lam, 0.6, 0.8, side, mix.prob)
                for y in (0, 1)}
        # the distorted report is 0 on the alpha side and 1 on the beta side
        lie, truth = (0, 1) if side < 0 else (1, 0)
        if mix.prob in (0.0, 1.0):
            assert post[lie] - post[truth] <= kappa + 1e-9
        else:
            assert post[lie] - post[truth] == pytest.approx(kappa, abs=1e-8)

    @pytest.mark.parametrize("lam", [0.1, 0.3, 0.7, 0.9])
    def test_moves_toward_truth_and_monotone(self, lam):
        base = low_mixing(lam, 0.6, 0.8)
        probs_k = [penalty_mixing(lam, 0.6, 0.8, k).prob for k in (0.0, 0.005, 0.02, 0.05)]
        if base.side is Side.MIX_AFTER_S1:
            assert np.all(np.diff(probs_k) >= 0) and probs_k[1] > base.prob
        else:
            assert np.all(np.diff(probs_k) <= 0) and probs_k[1] < base.prob

    def test_large_penalty_truthful(self):
        assert penalty_mixing(0.3, 0.6, 0.8, 1.0).prob == 1.0
        assert penalty_mixing(0.7, 0.6, 0.8, 1.0).prob == 0.0

    def test_truthful_at_half(self):
        assert penalty_mixing(0.5, 0.6, 0.8, 0.1) is TRUTHFUL

    def test_negative_penalty(self):
        with pytest.raises(ContractViolation):
            penalty_mixing(0.3, 0.6, 0.8, -0.1)


class TestScoredReputation:
    @given(probs, st.integers(0, 1), st.integers(0, 1))
    def test_log_unit_weight_is_bayes_given_state(self, rho, y, theta):
        got = scored_reputation_update(rho, y, theta, 0.6, 0.8, ScoreKind.LOG)
        lh = 0.8 if y == theta else 0.2
        ll = 0.6 if y == theta else 0.4
        assert got == pytest.approx(rho * lh / (rho * lh + (1 - rho) * ll), abs=1e-14)

    @given(probs, st.integers(0, 1), st.integers(0, 1), st.floats(0, 3))
    def test_direction(self, rho, y, theta, w):
        for kind in (ScoreKind.LOG, ScoreKind.BRIER):
            got = scored_reputation_update(rho, y, theta, 0.6, 0.8, kind, w)
            if y == theta:
                assert got >= rho - 1e-15
            else:
                assert got <= rho + 1e-15

    def test_zero_weight_keeps_reputation(self):
        assert scored_reputation_update(0.3, 1, 0, 0.6, 0.8, ScoreKind.BRIER, 0.0) == pytest.approx(0.3)

    def test_vectorised(self):
        out = scored_reputation_update(np.array([0.2, 0.5]), np.array([1, 0]), 1, 0.6, 0.8,
                                       ScoreKind.LOG)
        assert out.shape == (2,)


class TestDesignConfig:
    def test_defaults(self):
        d = DesignConfig()
        assert d.eval_density == 0 and d.score is ScoreKind.LOG

    @pytest.mark.parametrize("kw", [
        dict(eval_density=-0.1), dict(eval_density=1.1), dict(penalty=-1),
        dict(score=ScoreKind.NONE, eval_density=0.2),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ContractViolation):
            DesignConfig(**kw)

    def test_mixspec_roundtrip(self):
        m = MixSpec(Side.MIX_AFTER_S0, 0.25)
        assert m.beta == 0.25 and m.alpha == 1.0
