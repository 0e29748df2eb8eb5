import bisect
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from urnlab.core.config import settings
from urnlab.core.errors import MissingGridPointError
from urnlab.models.threshold import ThresholdPolicy
from urnlab.models.urn import ModelKind, ModelTag, ReinforcementSpec, UrnState

INF = "inf"
StepOrInf = Union[int, Literal["inf"]]


def pow2_grid(horizon: int) -> List[int]:
    """{0} u {2^k <= horizon} u {horizon}"""
    grid = {0, horizon}
    k = 1
    while k <= horizon:
        grid.add(k)
        k *= 2
    return sorted(grid)


def linear_grid(horizon: int, every: int) -> List[int]:
    """{0, k, 2k, ...} u {horizon}"""
    if every < 1:
        raise ValueError("linear grid spacing must be >= 1")
    return sorted(set(range(0, horizon + 1, every)) | {horizon})


class RunConfig(BaseModel):
    """Everything needed to reproduce one replication"""
    model: ModelKind = Field(description="Urn rule")
    r1: ReinforcementSpec = Field(description="Red reinforcement law")
    r2: ReinforcementSpec = Field(description="White reinforcement law")
    policy: ThresholdPolicy = Field(
        default_factory=lambda: ThresholdPolicy.fixed(1.0, 0.0), description="ARRU threshold generator"
    )
    y1_0: float = Field(default=1.0, gt=0, description="Initial red mass")
    y2_0: float = Field(default=1.0, gt=0, description="Initial white mass")
    horizon: int = Field(ge=0, description="Number of steps")
    record_grid: List[int] = Field(default_factory=list, description="Recorded steps; pow2 grid when empty")
    a_n_alpha: float = Field(default=0.25, gt=0, lt=0.5, description="Exponent of the shrinking A_n margin")
    a_n_c: float = Field(default=1.0, gt=0, description="Constant of the shrinking A_n margin")
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="Batch seed")
    replication_index: int = Field(default=0, ge=0, description="Replication index within the batch")
    crossing_d: float = Field(default=0.4, gt=0, lt=1, description="Down level of the tracked crossings")
    crossing_u: float = Field(default=0.6, gt=0, lt=1, description="Up level of the tracked crossings")
    guard_epsilon: float = Field(default_factory=lambda: settings.GUARD_EPSILON, gt=0, lt=1)
    extension_multiplier: Optional[int] = Field(
        default=None, ge=2, description="Continue to multiplier x horizon to read a Z-infinity proxy"
    )

    model_config = ConfigDict(frozen=True)

    @field_validator("record_grid")
    @classmethod
    def sorted_unique(cls, v: List[int]) -> List[int]:
        return sorted(set(v))

    @model_validator(mode="before")
    @classmethod
    def default_grid(cls, data):
        if isinstance(data, dict) and not data.get("record_grid") and isinstance(data.get("horizon"), int):
            data = {**data, "record_grid": pow2_grid(data["horizon"])}
        return data

    @model_validator(mode="after")
    def check_grid(self) -> "RunConfig":
        if not self.record_grid:
            raise ValueError("record_grid must not be empty")
        if self.record_grid[0] < 0 or self.record_grid[-1] > self.horizon:
            raise ValueError("record_grid must lie inside [0, horizon]")
        if not self.crossing_d < self.crossing_u:
            raise ValueError("crossing_d must be < crossing_u")
        return self

    def limits(self) -> Tuple[float, float]:
        """Declared (rho1, rho2) used by A_n membership"""
        if self.model.tag == ModelTag.RRU:
            return 1.0, 0.0
        if self.model.tag == ModelTag.MRRU:
            return self.model.rho1, self.model.rho2
        return self.policy.rho1_limit, self.policy.rho2_limit

    @property
    def y0(self) -> float:
        return self.y1_0 + self.y2_0

    @property
    def reinforcement_low(self) -> float:
        return min(self.r1.support_low, self.r2.support_low)

    @property
    def reinforcement_high(self) -> float:
        return max(self.r1.support_high, self.r2.support_high)

    @property
    def total_steps(self) -> int:
        return self.horizon * (self.extension_multiplier or 1)


class GridPoint(BaseModel):
    """Diagnostics at one recorded step"""
    n: int
    z: float
    y: float
    n1: int
    in_a_n: int = Field(ge=0, le=1)
    w1: int = Field(ge=0, le=1)
    w2: int = Field(ge=0, le=1)
    rho1_hat: float
    rho2_hat: float
    m1_hat: Optional[float] = Field(default=None, description="Red mean estimate feeding the thresholds (ARRU only)")
    m2_hat: Optional[float] = Field(default=None, description="White mean estimate feeding the thresholds (ARRU only)")


class CrossingRecord(BaseModel):
    """j-th up-cross time of u and the following down-cross time of d"""
    j: int = Field(ge=0)
    t_j: StepOrInf
    tau_j: StepOrInf
    d: float
    u: float
    y_at_t: Optional[float] = Field(default=None, description="Total mass at the up-cross time")


class TrajectoryRecord(BaseModel):
    """Sampled diagnostics of one replication"""
    replication_index: int
    seed: int
    model_tag: ModelTag
    m1: float
    m2: float
    rho1_limit: float
    rho2_limit: float
    a_n_alpha: float
    a_n_c: float
    y0: float
    grid: List[GridPoint]
    crossings: List[CrossingRecord] = Field(default_factory=list)
    guard_checks: int = Field(default=0, description="Steps where the increment guard was active")
    guard_violations: int = Field(default=0, description="Always 0; a violation aborts the run")
    clamp_count: int = Field(default=0, description="Threshold pairs clamped to restore rho2 <= rho1")
    reinforced_steps: int = Field(default=0, description="Steps whose reinforcement was applied")
    max_abs_deviation: float = Field(default=0.0, description="max_n |Z_n - Z_0| up to the horizon")
    final_state: UrnState
    extension_multiplier: Optional[int] = None
    z_extended: Optional[float] = Field(default=None, description="Z at extension_multiplier x horizon")

    def steps(self) -> List[int]:
        return [p.n for p in self.grid]

    def point_at(self, n: int) -> GridPoint:
        steps = self.steps()
        i = bisect.bisect_left(steps, n)
        if i == len(steps) or steps[i] != n:
            raise MissingGridPointError(f"step {n} is not on the record grid of replication {self.replication_index}")
        return self.grid[i]


class CoupledRun(BaseModel):
    """ARRU trajectory and the RRU forked from it at n0 on shared streams"""
    n0: int
    arru: TrajectoryRecord
    rru: TrajectoryRecord
    divergence_step: Optional[int] = Field(default=None, description="First step where the compositions differ")
    first_suppression_step: Optional[int] = Field(
        default=None, description="First step after n0 whose ARRU indicator pair contained a 0"
    )
