import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from urnlab.models.urn import CltVariances


class MomentEstimate(BaseModel):
    """Empirical mean with its standard error"""
    mean: float
    variance: float = Field(ge=0)
    count: int = Field(ge=0)
    standard_error: float = Field(ge=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_standard_error(self) -> "MomentEstimate":
        expected = math.sqrt(self.variance / self.count) if self.count else 0.0
        if not math.isclose(self.standard_error, expected, rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError("standard_error must equal sqrt(variance / count)")
        return self

    def upper(self, k: float = 2.0) -> float:
        return self.mean + k * self.standard_error

    def lower(self, k: float = 2.0) -> float:
        return self.mean - k * self.standard_error


class CltStatistic(str, Enum):
    """Which CLT statistic is studentized"""
    N1 = "n1"
    Z = "z"


class CltReplication(BaseModel):
    """Per-replication CLT quantities"""
    replication_index: int
    z_inf_proxy: float
    statistic_n1: float = Field(description="sqrt(n) (N1n / n - proxy)")
    statistic_z: float = Field(description="sqrt(n) (Z_n - proxy)")
    sigma_at_proxy: CltVariances
    studentized_n1: Optional[float] = None
    studentized_z: Optional[float] = None
    in_a_n_at_horizon: int = Field(ge=0, le=1)


class CltSummary(BaseModel):
    """Studentized CLT sample of a batch"""
    which: CltStatistic
    horizon: int
    included: List[CltReplication] = Field(default_factory=list)
    excluded_count: int = Field(default=0, description="Replications whose variance at the proxy fell below the floor")
    filtered_count: int = Field(default=0, description="Replications dropped by the A_n restriction")
    sigma_floor: float

    @property
    def included_count(self) -> int:
        return len(self.included)

    def studentized(self) -> List[float]:
        if self.which == CltStatistic.N1:
            return [r.studentized_n1 for r in self.included]
        return [r.studentized_z for r in self.included]

    def raw_statistics(self) -> List[float]:
        if self.which == CltStatistic.N1:
            return [r.statistic_n1 for r in self.included]
        return [r.statistic_z for r in self.included]

    def limiting_variances(self) -> List[float]:
        if self.which == CltStatistic.N1:
            return [r.sigma_at_proxy.sigma_big for r in self.included]
        return [r.sigma_at_proxy.sigma_z for r in self.included]


class KsResult(BaseModel):
    """Kolmogorov-Smirnov distance against the standard normal"""
    d: float = Field(ge=0, le=1)
    n: int = Field(ge=1)


class HarmonicPoint(BaseModel):
    """E[(n / Y_n)^j] at one grid step"""
    n: int
    estimate: MomentEstimate


class DriftDiagnostic(BaseModel):
    """Estimates around G(n, s) = Delta_{n + ceil(n s)} - Delta_n"""
    n: int
    later_n: int
    lhs: MomentEstimate = Field(description="G(n, s) 1{Delta_n > delta}")
    q_mass: MomentEstimate = Field(description="1{Delta_n > delta}")
    complement: MomentEstimate = Field(description="G(n, s) 1{Delta_n <= delta}")
