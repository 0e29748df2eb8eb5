import math
from enum import Enum
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator
from scipy import stats


class ReinforcementKind(str, Enum):
    """Reinforcement law families"""
    POINT_MASS = "point-mass"
    TWO_POINT = "two-point"
    UNIFORM_INTERVAL = "uniform-interval"
    SCALED_BETA = "scaled-beta"


class ReinforcementSpec(BaseModel):
    """Bounded reinforcement distribution on [support_low, support_high] with exact moments"""
    kind: ReinforcementKind = Field(description="Distribution family")
    support_low: float = Field(gt=0, description="Lower support bound a")
    support_high: float = Field(gt=0, description="Upper support bound b")
    p_high: float = Field(default=0.5, ge=0.0, le=1.0, description="Two-point: probability of drawing support_high")
    beta_alpha: float = Field(default=2.0, gt=0, description="Scaled-beta: first shape parameter")
    beta_beta: float = Field(default=2.0, gt=0, description="Scaled-beta: second shape parameter")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_support(self) -> "ReinforcementSpec":
        if not (math.isfinite(self.support_low) and math.isfinite(self.support_high)):
            raise ValueError("support bounds must be finite")
        if self.support_high < self.support_low:
            raise ValueError("support_high must be >= support_low")
        if self.kind == ReinforcementKind.POINT_MASS and self.support_high != self.support_low:
            raise ValueError("point-mass reinforcement needs support_low == support_high")
        return self

    @classmethod
    def point_mass(cls, value: float) -> "ReinforcementSpec":
        return cls(kind=ReinforcementKind.POINT_MASS, support_low=value, support_high=value)

    @classmethod
    def two_point(cls, low: float, high: float, p_high: float = 0.5) -> "ReinforcementSpec":
        return cls(kind=ReinforcementKind.TWO_POINT, support_low=low, support_high=high, p_high=p_high)

    @classmethod
    def uniform(cls, low: float, high: float) -> "ReinforcementSpec":
        return cls(kind=ReinforcementKind.UNIFORM_INTERVAL, support_low=low, support_high=high)

    @classmethod
    def scaled_beta(cls, low: float, high: float, alpha: float, beta: float) -> "ReinforcementSpec":
        return cls(
            kind=ReinforcementKind.SCALED_BETA,
            support_low=low,
            support_high=high,
            beta_alpha=alpha,
            beta_beta=beta,
        )

    @property
    def width(self) -> float:
        return self.support_high - self.support_low

    @computed_field
    @property
    def mean(self) -> float:
        a, b = self.support_low, self.support_high
        if self.kind == ReinforcementKind.POINT_MASS:
            return a
        if self.kind == ReinforcementKind.TWO_POINT:
            return a * (1.0 - self.p_high) + b * self.p_high
        if self.kind == ReinforcementKind.UNIFORM_INTERVAL:
            return 0.5 * (a + b)
        return a + self.width * self.beta_alpha / (self.beta_alpha + self.beta_beta)

    @computed_field
    @property
    def variance(self) -> float:
        if self.kind == ReinforcementKind.POINT_MASS:
            return 0.0
        if self.kind == ReinforcementKind.TWO_POINT:
            return self.p_high * (1.0 - self.p_high) * self.width ** 2
        if self.kind == ReinforcementKind.UNIFORM_INTERVAL:
            return self.width ** 2 / 12.0
        s = self.beta_alpha + self.beta_beta
        return self.width ** 2 * self.beta_alpha * self.beta_beta / (s * s * (s + 1.0))

    def frozen(self):
        """scipy distribution for the continuous families"""
        if self.kind == ReinforcementKind.UNIFORM_INTERVAL:
            return stats.uniform(loc=self.support_low, scale=self.width)
        if self.kind == ReinforcementKind.SCALED_BETA:
            return stats.beta(self.beta_alpha, self.beta_beta, loc=self.support_low, scale=self.width)
        raise ValueError(f"{self.kind.value} has no continuous density")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` i.i.d. reinforcements from `rng`"""
        a, b = self.support_low, self.support_high
        if self.kind == ReinforcementKind.POINT_MASS:
            return np.full(size, a)
        if self.kind == ReinforcementKind.TWO_POINT:
            return np.where(rng.random(size) < self.p_high, b, a)
        if self.kind == ReinforcementKind.UNIFORM_INTERVAL:
            return rng.uniform(a, b, size)
        return a + self.width * rng.beta(self.beta_alpha, self.beta_beta, size)

    def expect(self, func: Callable[[float], float], rel_tol: float = 1e-10) -> float:
        """E[func(D)]: exact for discrete kinds, adaptive quadrature otherwise"""
        a, b = self.support_low, self.support_high
        if self.kind == ReinforcementKind.POINT_MASS:
            return func(a)
        if self.kind == ReinforcementKind.TWO_POINT:
            return (1.0 - self.p_high) * func(a) + self.p_high * func(b)
        return float(self.frozen().expect(func, epsabs=0.0, epsrel=rel_tol, limit=200))

    def contains(self, value: float) -> bool:
        return self.support_low <= value <= self.support_high


class UrnState(BaseModel):
    """Urn configuration after n draws"""
    n: int = Field(ge=0, description="Step count")
    y1: float = Field(gt=0, description="Red ball mass")
    y2: float = Field(gt=0, description="White ball mass")
    y: float = Field(gt=0, description="Total mass, stored as y1 + y2")
    z: float = Field(gt=0, lt=1, description="Red proportion y1 / y")
    n1: int = Field(ge=0, description="Red draws so far")
    n2: int = Field(ge=0, description="White draws so far")
    last_w1: int = Field(default=1, ge=0, le=1, description="Red indicator used at the last step")
    last_w2: int = Field(default=1, ge=0, le=1, description="White indicator used at the last step")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_consistency(self) -> "UrnState":
        if self.n1 + self.n2 != self.n:
            raise ValueError("n1 + n2 must equal n")
        if self.y != self.y1 + self.y2:
            raise ValueError("y must equal y1 + y2")
        if abs(self.z - self.y1 / self.y) > 4 * math.ulp(self.z):
            raise ValueError("z must equal y1 / y")
        return self

    @classmethod
    def initial(cls, y1_0: float = 1.0, y2_0: float = 1.0) -> "UrnState":
        y = y1_0 + y2_0
        return cls(n=0, y1=y1_0, y2=y2_0, y=y, z=y1_0 / y, n1=0, n2=0)

    @classmethod
    def from_counts(
        cls, n: int, y1: float, y2: float, n1: int, last_w1: int = 1, last_w2: int = 1
    ) -> "UrnState":
        """Build without re-validation; callers guarantee the invariants"""
        y = y1 + y2
        return cls.model_construct(
            n=n, y1=y1, y2=y2, y=y, z=y1 / y, n1=n1, n2=n - n1, last_w1=last_w1, last_w2=last_w2
        )


class ModelTag(str, Enum):
    """Urn model families"""
    RRU = "RRU"
    MRRU = "MRRU"
    ARRU = "ARRU"


class ModelKind(BaseModel):
    """Which urn rule drives the indicators"""
    tag: ModelTag = Field(description="RRU, MRRU(rho1, rho2) or ARRU(policy-id)")
    rho1: Optional[float] = Field(default=None, description="MRRU upper threshold")
    rho2: Optional[float] = Field(default=None, description="MRRU lower threshold")
    policy_id: Optional[str] = Field(default=None, description="ARRU policy label")

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_thresholds(self) -> "ModelKind":
        if self.tag == ModelTag.MRRU:
            if self.rho1 is None or self.rho2 is None:
                raise ValueError("MRRU needs rho1 and rho2")
            if not 0 < self.rho2 <= self.rho1 < 1:
                raise ValueError("MRRU requires 0 < rho2 <= rho1 < 1")
        return self

    @classmethod
    def rru(cls) -> "ModelKind":
        return cls(tag=ModelTag.RRU)

    @classmethod
    def mrru(cls, rho1: float, rho2: float) -> "ModelKind":
        return cls(tag=ModelTag.MRRU, rho1=rho1, rho2=rho2)

    @classmethod
    def arru(cls, policy_id: str = "default") -> "ModelKind":
        return cls(tag=ModelTag.ARRU, policy_id=policy_id)


class CltVariances(BaseModel):
    """Limiting variances of the mixture CLTs evaluated at a given limit proportion"""
    sigma_bar: float = Field(ge=0, description="(1 - Z) sigma1^2 + Z sigma2^2")
    sigma_big: float = Field(ge=0, description="(1 + 2 sigma_bar / m^2) Z (1 - Z), for N1n / n")
    sigma_z: float = Field(ge=0, description="(1 + sigma_bar / m^2) Z (1 - Z), for Z_n")

    model_config = ConfigDict(frozen=True)


class SDeltaWindow(BaseModel):
    """Admissible range (low, high) for the linear time step s_delta and the chosen value"""
    low: float = 0.0
    high: float = Field(gt=0)
    chosen: float = Field(gt=0)

    model_config = ConfigDict(frozen=True)


class Color(str, Enum):
    RED = "red"
    WHITE = "white"
