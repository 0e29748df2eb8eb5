import logging
import math
from typing import Tuple

from urnlab.core.errors import InvalidInputError
from urnlab.models.urn import CltVariances, ReinforcementSpec, SDeltaWindow, UrnState

logger = logging.getLogger(__name__)


def advance(y1: float, y2: float, w1: int, w2: int, u: float, d1: float, d2: float) -> Tuple[float, float, bool]:
    """One draw-and-replace on raw masses. Returns (y1', y2', red_drawn)."""
    if u <= y1 / (y1 + y2):
        return y1 + d1 * w1, y2, True
    return y1, y2 + d2 * w2, False


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise InvalidInputError(f"{name} must be finite, got {value}")


def _require_bit(name: str, value: int) -> None:
    if value not in (0, 1):
        raise InvalidInputError(f"{name} must be 0 or 1, got {value}")


class UrnService:
    """Exact single-step dynamics of the two-color urn and closed-form companions"""

    @staticmethod
    def step(state: UrnState, w1: int, w2: int, u: float, d1: float, d2: float) -> UrnState:
        """
        Apply one draw: red iff u <= z, then add the drawn color's reinforcement
        multiplied by its indicator.
        """
        _require_finite(u=u, d1=d1, d2=d2)
        _require_bit("w1", w1)
        _require_bit("w2", w2)
        if w1 + w2 < 1:
            raise InvalidInputError("w1 = w2 = 0 would freeze the urn")
        if not 0.0 <= u <= 1.0:
            raise InvalidInputError(f"u must lie in [0, 1], got {u}")
        if d1 <= 0 or d2 <= 0:
            raise InvalidInputError("reinforcements must be positive")

        y1, y2, red = advance(state.y1, state.y2, w1, w2, u, d1, d2)
        n1 = state.n1 + (1 if red else 0)
        return UrnState.from_counts(n=state.n + 1, y1=y1, y2=y2, n1=n1, last_w1=w1, last_w2=w2)

    @staticmethod
    def indicators(z: float, rho1_hat: float, rho2_hat: float) -> Tuple[int, int]:
        """W1 = 1{z <= rho1_hat}, W2 = 1{z >= rho2_hat}; ties activate the indicator"""
        if rho2_hat > rho1_hat:
            raise InvalidInputError(f"rho2_hat={rho2_hat} exceeds rho1_hat={rho1_hat}")
        return int(z <= rho1_hat), int(z >= rho2_hat)

    @staticmethod
    def conditional_drift(
        state: UrnState, w1: int, w2: int, r1: ReinforcementSpec, r2: ReinforcementSpec
    ) -> float:
        """E[Z_{n+1} - Z_n | F_n] = Z (1 - Z) B_n"""
        y = state.y
        term1 = r1.expect(lambda d: d / (y + d)) if w1 else 0.0
        term2 = r2.expect(lambda d: d / (y + d)) if w2 else 0.0
        return state.z * (1.0 - state.z) * (term1 - term2)

    @staticmethod
    def clt_variances(z_inf: float, m: float, sigma1_sq: float, sigma2_sq: float) -> CltVariances:
        if m <= 0:
            raise InvalidInputError(f"mean reinforcement must be positive, got {m}")
        if sigma1_sq < 0 or sigma2_sq < 0:
            raise InvalidInputError("variances must be non-negative")
        if not 0.0 <= z_inf <= 1.0:
            raise InvalidInputError(f"z_inf must lie in [0, 1], got {z_inf}")
        sigma_bar = (1.0 - z_inf) * sigma1_sq + z_inf * sigma2_sq
        spread = z_inf * (1.0 - z_inf)
        m_sq = m * m
        return CltVariances(
            sigma_bar=sigma_bar,
            sigma_big=(1.0 + 2.0 * sigma_bar / m_sq) * spread,
            sigma_z=(1.0 + sigma_bar / m_sq) * spread,
        )

    @staticmethod
    def s_delta_window(c1: float, b: float, delta: float) -> SDeltaWindow:
        """Open interval (0, exp(c1 delta / (2b)) - 1); the midpoint is chosen"""
        if c1 <= 0 or b <= 0:
            raise InvalidInputError("c1 and b must be positive")
        if delta <= 0:
            raise InvalidInputError(f"empty s_delta window for delta={delta}")
        high = math.expm1(c1 * delta / (2.0 * b))
        return SDeltaWindow(low=0.0, high=high, chosen=high / 2.0)

    @staticmethod
    def step_bound_threshold(b: float, epsilon: float) -> float:
        if not 0.0 < epsilon < 1.0:
            raise InvalidInputError(f"epsilon must lie in (0, 1), got {epsilon}")
        return b * (1.0 - epsilon) / epsilon

    def step_bound_guard(self, y: float, b: float, epsilon: float) -> int:
        """1 iff y > b (1 - eps) / eps, in which case |Z_{n+1} - Z_n| < eps"""
        return int(y > self.step_bound_threshold(b, epsilon))

    @staticmethod
    def chernoff_lower_tail(c0: float, expected_sum: float) -> float:
        """Bound on P(S <= c0 E[S]) for sums of independent [0, 1] variables"""
        if not 0.0 <= c0 < 1.0:
            raise InvalidInputError(f"c0 must lie in [0, 1), got {c0}")
        if expected_sum <= 0:
            raise InvalidInputError("expected_sum must be positive")
        return math.exp(-((1.0 - c0) ** 2) * expected_sum / 2.0)

    @staticmethod
    def sup_deviation_bound(y0: float, b: float, h: float) -> float:
        """Bound on P(sup_n |Z_n - Z_0| >= h) for an equal-means RRU started with y0 >= 2b"""
        if h <= 0:
            raise InvalidInputError("h must be positive")
        if y0 < 2.0 * b:
            raise InvalidInputError(f"bound needs y0 >= 2b, got y0={y0}, b={b}")
        return b / y0 * (4.0 / (h * h) + 2.0 / h)

    @staticmethod
    def y_increment_lower_bound(i: int, a: float, b: float, y1_0: float, y2_0: float) -> float:
        """Lower bound on E[Y_i - Y_{i-1} | F_{i-1}]"""
        if i < 1:
            raise InvalidInputError("i must be >= 1")
        return a * min(y1_0, y2_0) / (y1_0 + y2_0 + (i - 1) * b)


# Create singleton instance
urn_service = UrnService()
