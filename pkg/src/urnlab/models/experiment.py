import itertools
from typing import Dict, List, Optional

from pydantic import BaseModel, Field, field_validator

from urnlab.core.errors import ConfigurationError
from urnlab.models.threshold import ThresholdPolicy
from urnlab.models.trajectory import RunConfig, linear_grid, pow2_grid
from urnlab.models.urn import ModelKind, ReinforcementSpec

SWEEP_AXES = ("horizon", "mean_gap", "a_n_alpha", "a_n_c")


def parse_grid(rule: str, horizon: int) -> List[int]:
    """'pow2' or 'linear:k'"""
    if rule == "pow2":
        return pow2_grid(horizon)
    if rule.startswith("linear:"):
        try:
            every = int(rule.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"invalid grid rule '{rule}'")
        if every < 1:
            raise ConfigurationError(f"invalid grid rule '{rule}': spacing must be >= 1")
        return linear_grid(horizon, every)
    raise ConfigurationError(f"invalid grid rule '{rule}', expected pow2 or linear:k")


def shift_mean(spec: ReinforcementSpec, target_mean: float) -> ReinforcementSpec:
    """Translate the support so the mean becomes `target_mean`"""
    offset = target_mean - spec.mean
    return ReinforcementSpec(
        **{**spec.model_dump(exclude={"mean", "variance"}),
           "support_low": spec.support_low + offset,
           "support_high": spec.support_high + offset}
    )


class SweepAxes(BaseModel):
    """Values per sweep axis; an empty axis is not swept"""
    horizon: List[int] = Field(default_factory=list)
    mean_gap: List[float] = Field(default_factory=list, description="m1 - m2, applied by shifting the red law")
    a_n_alpha: List[float] = Field(default_factory=list)
    a_n_c: List[float] = Field(default_factory=list)

    def points(self) -> List[Dict[str, float]]:
        """Cartesian product of the non-empty axes, in declaration order"""
        axes = [(name, getattr(self, name)) for name in SWEEP_AXES if getattr(self, name)]
        if not axes:
            return [{}]
        names = [name for name, _ in axes]
        return [dict(zip(names, values)) for values in itertools.product(*(v for _, v in axes))]


class ExperimentFile(BaseModel):
    """Run configuration file for simulate and sweep"""
    model: ModelKind
    r1: ReinforcementSpec
    r2: ReinforcementSpec
    policy: Optional[ThresholdPolicy] = None
    y1_0: float = Field(default=1.0, gt=0)
    y2_0: float = Field(default=1.0, gt=0)
    horizon: int = Field(default=1000, ge=0)
    grid: str = Field(default="pow2", description="pow2 or linear:k")
    a_n_alpha: float = 0.25
    a_n_c: float = 1.0
    crossing_d: float = 0.4
    crossing_u: float = 0.6
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    sweep: SweepAxes = Field(default_factory=SweepAxes)

    @field_validator("grid")
    @classmethod
    def known_grid_rule(cls, v: str) -> str:
        parse_grid(v, 1)
        return v

    def run_config(
        self,
        seed: Optional[int] = None,
        horizon: Optional[int] = None,
        grid: Optional[str] = None,
        extension_multiplier: Optional[int] = None,
        **overrides,
    ) -> RunConfig:
        horizon = self.horizon if horizon is None else horizon
        fields = dict(
            model=self.model,
            r1=self.r1,
            r2=self.r2,
            y1_0=self.y1_0,
            y2_0=self.y2_0,
            horizon=horizon,
            record_grid=parse_grid(grid or self.grid, horizon),
            a_n_alpha=self.a_n_alpha,
            a_n_c=self.a_n_c,
            crossing_d=self.crossing_d,
            crossing_u=self.crossing_u,
            seed=self.seed if seed is None else seed,
            extension_multiplier=extension_multiplier,
        )
        if self.policy is not None:
            fields["policy"] = self.policy
        fields.update(overrides)
        return RunConfig(**fields)

    def sweep_config(self, point: Dict[str, float], **kwargs) -> RunConfig:
        overrides = {k: v for k, v in point.items() if k in ("a_n_alpha", "a_n_c")}
        if "mean_gap" in point:
            overrides["r1"] = shift_mean(self.r1, self.r2.mean + point["mean_gap"])
        horizon = kwargs.pop("horizon", None)
        if "horizon" in point:
            horizon = int(point["horizon"])
        return self.run_config(horizon=horizon, **kwargs, **overrides)
