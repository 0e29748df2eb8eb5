from enum import Enum
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class PolicyKind(str, Enum):
    """Threshold generator families"""
    FIXED = "fixed"
    ADAPTIVE_MEAN_MAP = "adaptive-mean-map"
    NOISY_CONVERGENT = "noisy-convergent"
    ADVERSARIAL_EXCURSION = "adversarial-excursion"


class ConvergenceMode(str, Enum):
    """How the emitted thresholds approach their declared limits"""
    ALMOST_SURE = "almost-sure"
    IN_PROBABILITY_ONLY = "in-probability-only"
    NONE = "none"


_DEFAULT_MODES = {
    PolicyKind.FIXED: ConvergenceMode.ALMOST_SURE,
    PolicyKind.ADAPTIVE_MEAN_MAP: ConvergenceMode.ALMOST_SURE,
    PolicyKind.NOISY_CONVERGENT: ConvergenceMode.IN_PROBABILITY_ONLY,
    # excursion probabilities are summable, so only finitely many occur
    PolicyKind.ADVERSARIAL_EXCURSION: ConvergenceMode.ALMOST_SURE,
}


def _clamp(value: float, low: float, high: float) -> float:
    return min(max(value, low), high)


class ThresholdPolicy(BaseModel):
    """Generator of the random threshold pair (rho1_hat_n, rho2_hat_n) with declared limits"""
    kind: PolicyKind = Field(description="Generator family")
    rho1_limit: float = Field(ge=0.0, le=1.0, description="Declared limit of rho1_hat")
    rho2_limit: float = Field(ge=0.0, le=1.0, description="Declared limit of rho2_hat")
    rho_min: float = Field(default=0.05, ge=0.0, le=1.0, description="Lower edge of the bounded range")
    rho_max: float = Field(default=0.95, ge=0.0, le=1.0, description="Upper edge of the bounded range")
    c_rho: float = Field(default=1.0, gt=0, description="Exponential rate of the bounded-range assumption")
    convergence_mode: Optional[ConvergenceMode] = Field(default=None, description="Defaults per kind")

    # adaptive-mean-map parameters
    map_offset: float = Field(default=0.3, description="g1 = offset + slope * m1 / (m1 + m2)")
    map_slope: float = Field(default=0.4, description="Sensitivity of g1 to the estimated mean share")
    map_gap: float = Field(default=0.2, ge=0.0, description="g2 = g1 - gap")

    # noisy-convergent parameters
    noise_scale: float = Field(default=1.0, ge=0.0, description="Perturbation magnitude at n = 1")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="before")
    @classmethod
    def default_convergence_mode(cls, data):
        if isinstance(data, dict) and data.get("convergence_mode") is None and "kind" in data:
            data = {**data, "convergence_mode": _DEFAULT_MODES[PolicyKind(data["kind"])]}
        return data

    @model_validator(mode="after")
    def check_order(self) -> "ThresholdPolicy":
        if self.rho2_limit > self.rho1_limit:
            raise ValueError("rho2_limit must be <= rho1_limit")
        if self.rho_min > self.rho_max:
            raise ValueError("rho_min must be <= rho_max")
        return self

    @property
    def claims_bounded_range(self) -> bool:
        return 0 < self.rho_min <= self.rho2_limit <= self.rho1_limit <= self.rho_max < 1

    def mean_map(self, m1_hat: float, m2_hat: float) -> Tuple[float, float]:
        """Default continuous maps from estimated means to thresholds"""
        g1 = _clamp(self.map_offset + self.map_slope * m1_hat / (m1_hat + m2_hat), self.rho_min, self.rho_max)
        g2 = _clamp(g1 - self.map_gap, self.rho_min, self.rho_max)
        return g1, g2

    @classmethod
    def fixed(cls, rho1: float, rho2: float, **kwargs) -> "ThresholdPolicy":
        return cls(kind=PolicyKind.FIXED, rho1_limit=rho1, rho2_limit=rho2, **kwargs)

    @classmethod
    def adaptive(cls, m1: float, m2: float, **kwargs) -> "ThresholdPolicy":
        """Adaptive policy whose declared limits are the maps evaluated at the true means"""
        template = cls(kind=PolicyKind.ADAPTIVE_MEAN_MAP, rho1_limit=1.0, rho2_limit=0.0, **kwargs)
        rho1, rho2 = template.mean_map(m1, m2)
        return template.model_copy(update={"rho1_limit": rho1, "rho2_limit": rho2})

    @classmethod
    def noisy(cls, rho1: float, rho2: float, noise_scale: float = 0.05, **kwargs) -> "ThresholdPolicy":
        return cls(
            kind=PolicyKind.NOISY_CONVERGENT, rho1_limit=rho1, rho2_limit=rho2, noise_scale=noise_scale, **kwargs
        )

    @classmethod
    def adversarial(cls, rho1: float, rho2: float, c_rho: float = 0.01, **kwargs) -> "ThresholdPolicy":
        return cls(kind=PolicyKind.ADVERSARIAL_EXCURSION, rho1_limit=rho1, rho2_limit=rho2, c_rho=c_rho, **kwargs)


class AdaptiveEstimates(BaseModel):
    """Running means of the reinforcements actually applied, per color"""
    m1_hat: Optional[float] = Field(default=None, description="Red mean estimate, None before the first observation")
    m2_hat: Optional[float] = Field(default=None, description="White mean estimate, None before the first observation")
    count1: int = Field(default=0, ge=0, description="Red reinforcements observed")
    count2: int = Field(default=0, ge=0, description="White reinforcements observed")

    model_config = ConfigDict(frozen=True)

    @property
    def ready(self) -> bool:
        return self.count1 >= 1 and self.count2 >= 1


class ThresholdEmission(BaseModel):
    """One emitted threshold pair"""
    rho1_hat: float
    rho2_hat: float
    clamped: bool = Field(default=False, description="True when the raw pair violated rho2 <= rho1")

    model_config = ConfigDict(frozen=True)
