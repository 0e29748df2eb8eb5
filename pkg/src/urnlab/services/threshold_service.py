import logging
import math
from typing import Optional, Tuple

from urnlab.core.errors import InvalidInputError
from urnlab.models.threshold import AdaptiveEstimates, PolicyKind, ThresholdEmission, ThresholdPolicy
from urnlab.models.urn import Color, ReinforcementSpec
from urnlab.utils.telemetrics import THRESHOLD_CLAMPS, app_name

logger = logging.getLogger(__name__)


def running_mean(mean: Optional[float], count: int, value: float) -> Tuple[float, int]:
    if count == 0 or mean is None:
        return value, 1
    count += 1
    return mean + (value - mean) / count, count


def raw_emission(
    policy: ThresholdPolicy,
    m1_hat: Optional[float],
    m2_hat: Optional[float],
    n: int,
    aux_u: float,
) -> Tuple[float, float, bool]:
    """(rho1_hat, rho2_hat, clamped) for state n, driven by one auxiliary uniform"""
    rho1, rho2 = policy.rho1_limit, policy.rho2_limit

    if policy.kind == PolicyKind.ADAPTIVE_MEAN_MAP:
        if m1_hat is not None and m2_hat is not None:
            rho1, rho2 = policy.mean_map(m1_hat, m2_hat)

    elif policy.kind == PolicyKind.NOISY_CONVERGENT:
        n_eff = max(n, 1)
        p = n_eff ** -0.5
        if aux_u < p:
            # aux_u / p is again uniform on (0, 1) given aux_u < p
            shift = policy.noise_scale * n_eff ** -0.25 * (2.0 * aux_u / p - 1.0)
            rho1 = min(max(rho1 + shift, 0.0), 1.0)
            rho2 = min(max(rho2 + shift, 0.0), 1.0)

    elif policy.kind == PolicyKind.ADVERSARIAL_EXCURSION:
        if aux_u < math.exp(-policy.c_rho * n):
            rho1 = policy.rho_max + (1.0 - policy.rho_max) / 2.0
            rho2 = policy.rho_min / 2.0

    if rho2 > rho1:
        return rho1, rho1, True
    return rho1, rho2, False


class ThresholdService:
    """Threshold generators and the running estimates that feed them"""

    @staticmethod
    def update_estimates(
        est: AdaptiveEstimates,
        drawn_color: Color,
        observed_reinforcement: Optional[float],
        support: Optional[ReinforcementSpec] = None,
    ) -> AdaptiveEstimates:
        """Running sample mean per color; unchanged when nothing was observed"""
        if observed_reinforcement is None:
            return est
        if not math.isfinite(observed_reinforcement) or observed_reinforcement <= 0:
            raise InvalidInputError(f"invalid reinforcement {observed_reinforcement}")
        if support is not None and not support.contains(observed_reinforcement):
            raise InvalidInputError(
                f"reinforcement {observed_reinforcement} outside [{support.support_low}, {support.support_high}]"
            )

        if drawn_color == Color.RED:
            m1_hat, count1 = running_mean(est.m1_hat, est.count1, observed_reinforcement)
            return est.model_copy(update={"m1_hat": m1_hat, "count1": count1})
        m2_hat, count2 = running_mean(est.m2_hat, est.count2, observed_reinforcement)
        return est.model_copy(update={"m2_hat": m2_hat, "count2": count2})

    @staticmethod
    def emit(policy: ThresholdPolicy, est: AdaptiveEstimates, n: int, aux_u: float) -> ThresholdEmission:
        if n < 0:
            raise InvalidInputError("n must be >= 0")
        if not 0.0 <= aux_u <= 1.0:
            raise InvalidInputError(f"aux_u must lie in [0, 1], got {aux_u}")

        m1_hat = est.m1_hat if est.count1 else None
        m2_hat = est.m2_hat if est.count2 else None
        rho1, rho2, clamped = raw_emission(policy, m1_hat, m2_hat, n, aux_u)
        if clamped:
            THRESHOLD_CLAMPS.labels(policy=policy.kind.value, app_name=app_name()).inc()
            logger.warning(f"Clamped threshold pair at n={n} for policy {policy.kind.value}")
        return ThresholdEmission(rho1_hat=rho1, rho2_hat=rho2, clamped=clamped)


# Create singleton instance
threshold_service = ThresholdService()
