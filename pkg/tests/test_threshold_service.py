"""
Unit tests for threshold policies and adaptive estimates
Test cases: THR-001 to THR-013
"""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError

from urnlab.core.errors import InvalidInputError
from urnlab.models import AdaptiveEstimates, Color, ConvergenceMode, PolicyKind, ReinforcementSpec, ThresholdPolicy
from urnlab.services import threshold_service
from urnlab.services.threshold_service import raw_emission


@pytest.mark.unit
class TestPolicies:
    """Test suite for threshold generator construction"""

    def test_default_convergence_modes(self):
        """THR-001: noisy policies converge only in probability"""
        assert ThresholdPolicy.fixed(0.7, 0.3).convergence_mode == ConvergenceMode.ALMOST_SURE
        assert ThresholdPolicy.noisy(0.7, 0.3).convergence_mode == ConvergenceMode.IN_PROBABILITY_ONLY

    def test_unordered_limits_rejected(self):
        """THR-002: rho2_limit > rho1_limit is invalid"""
        with pytest.raises(ValidationError):
            ThresholdPolicy.fixed(0.3, 0.7)

    def test_adaptive_limits_are_the_maps_at_true_means(self):
        """THR-003: offset 0.7 - 0.4 * 2/3 puts rho1 at 0.7 for m1 = 2, m2 = 1"""
        policy = ThresholdPolicy.adaptive(2.0, 1.0, map_offset=0.7 - 0.4 * 2.0 / 3.0)
        assert policy.rho1_limit == pytest.approx(0.7)
        assert policy.rho2_limit == pytest.approx(0.5)
        assert policy.claims_bounded_range


@pytest.mark.unit
class TestEmission:
    """Test suite for emitted threshold pairs"""

    def test_fixed_emits_limits(self):
        """THR-004: fixed policy ignores n and the auxiliary uniform"""
        em = threshold_service.emit(ThresholdPolicy.fixed(0.7, 0.3), AdaptiveEstimates(), 10, 0.01)
        assert (em.rho1_hat, em.rho2_hat, em.clamped) == (0.7, 0.3, False)

    def test_adaptive_uses_limits_until_both_colours_observed(self):
        """THR-005: before both counts are >= 1 the declared limits are emitted"""
        policy = ThresholdPolicy.adaptive(2.0, 1.0)
        est = AdaptiveEstimates(m1_hat=5.0, count1=1)
        em = threshold_service.emit(policy, est, 3, 0.5)
        assert (em.rho1_hat, em.rho2_hat) == (policy.rho1_limit, policy.rho2_limit)

    def test_adaptive_maps_estimates(self):
        """THR-006: once ready, thresholds are the maps at the running means"""
        policy = ThresholdPolicy.adaptive(2.0, 1.0)
        est = AdaptiveEstimates(m1_hat=1.0, m2_hat=1.0, count1=3, count2=2)
        em = threshold_service.emit(policy, est, 5, 0.5)
        assert (em.rho1_hat, em.rho2_hat) == pytest.approx(policy.mean_map(1.0, 1.0))

    def test_noisy_perturbation_is_rare_and_shrinking(self):
        """THR-007: perturb only when aux < n^-1/2, by at most scale n^-1/4"""
        policy = ThresholdPolicy.noisy(0.7, 0.3, noise_scale=0.2)
        n = 10000
        quiet = raw_emission(policy, None, None, n, 0.5)
        assert quiet[:2] == (0.7, 0.3)
        loud = raw_emission(policy, None, None, n, 0.0)
        assert loud[0] == pytest.approx(0.7 - 0.2 * n ** -0.25)
        assert loud[1] == pytest.approx(0.3 - 0.2 * n ** -0.25)

    def test_adversarial_excursion(self):
        """THR-008: excursion iff aux < exp(-c n), emitting values outside [rho_min, rho_max]"""
        policy = ThresholdPolicy.adversarial(0.7, 0.3, c_rho=1.0)
        rho1, rho2, _ = raw_emission(policy, None, None, 0, 0.5)
        assert (rho1, rho2) == (policy.rho_max + (1 - policy.rho_max) / 2, policy.rho_min / 2)
        # exp(-1) < 0.5, so no excursion at n = 1
        assert raw_emission(policy, None, None, 1, 0.5)[:2] == (0.7, 0.3)

    def test_unordered_raw_pair_is_clamped(self):
        """THR-009: rho2 > rho1 is replaced by rho2 = rho1 and flagged"""
        policy = ThresholdPolicy.model_construct(
            kind=PolicyKind.FIXED, rho1_limit=0.4, rho2_limit=0.6, rho_min=0.05, rho_max=0.95
        )
        em = threshold_service.emit(policy, AdaptiveEstimates(), 1, 0.5)
        assert (em.rho1_hat, em.rho2_hat, em.clamped) == (0.4, 0.4, True)

    @given(st.integers(min_value=0, max_value=10 ** 6), st.floats(min_value=0.0, max_value=1.0))
    def test_emitted_pairs_are_ordered(self, n, aux):
        """THR-010: every built-in family emits rho2 <= rho1 inside [0, 1]"""
        for policy in (
            ThresholdPolicy.noisy(0.7, 0.3, noise_scale=1.0),
            ThresholdPolicy.adversarial(0.7, 0.3),
            ThresholdPolicy.adaptive(2.0, 1.0),
        ):
            rho1, rho2, clamped = raw_emission(policy, 1.5, 1.0, n, aux)
            assert 0.0 <= rho2 <= rho1 <= 1.0
            assert not clamped

    def test_noisy_policy_near_limits_at_large_n(self):
        """THR-013: at n = 10^6, emissions stay within 1e-3 * scale of the limits except with frequency 1e-3 (4 SE)"""
        scale = 0.05
        policy = ThresholdPolicy.noisy(0.7, 0.3, noise_scale=scale)
        aux = np.random.default_rng(2024).random(10_000)
        far = [
            max(abs(em.rho1_hat - 0.7), abs(em.rho2_hat - 0.3)) > 1e-3 * scale
            for em in (threshold_service.emit(policy, AdaptiveEstimates(), 10 ** 6, float(u)) for u in aux)
        ]
        frequency = sum(far) / len(far)
        assert frequency <= 1e-3 + 4.0 * math.sqrt(1e-3 * (1.0 - 1e-3) / len(far))


@pytest.mark.unit
class TestEstimates:
    """Test suite for running reinforcement means"""

    def test_running_mean_per_colour(self):
        """THR-011: estimates are the sample means of the observed reinforcements"""
        est = AdaptiveEstimates()
        for value in (1.0, 2.0, 3.0):
            est = threshold_service.update_estimates(est, Color.RED, value)
        est = threshold_service.update_estimates(est, Color.WHITE, 0.5)
        est = threshold_service.update_estimates(est, Color.WHITE, None)
        assert (est.m1_hat, est.count1, est.m2_hat, est.count2) == (2.0, 3, 0.5, 1)
        assert est.ready

    def test_out_of_support_observation_rejected(self):
        """THR-012: observations outside [a, b] are invalid"""
        with pytest.raises(InvalidInputError):
            threshold_service.update_estimates(
                AdaptiveEstimates(), Color.RED, 5.0, support=ReinforcementSpec.uniform(1.0, 3.0)
            )
