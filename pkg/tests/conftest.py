"""Shared fixtures: reinforcement laws, run-config builders and hand-made records."""
from typing import List, Optional, Sequence

import pytest

from urnlab.models import (GridPoint, ModelKind, ModelTag, ReinforcementSpec, RunConfig, ThresholdPolicy,
                           TrajectoryRecord, UrnState)


@pytest.fixture
def equal_uniform() -> ReinforcementSpec:
    return ReinforcementSpec.uniform(1.0, 3.0)


@pytest.fixture
def high_uniform() -> ReinforcementSpec:
    return ReinforcementSpec.uniform(1.5, 2.5)


@pytest.fixture
def low_uniform() -> ReinforcementSpec:
    return ReinforcementSpec.uniform(0.5, 1.5)


@pytest.fixture
def make_config():
    def _make(
        model: Optional[ModelKind] = None,
        r1: Optional[ReinforcementSpec] = None,
        r2: Optional[ReinforcementSpec] = None,
        horizon: int = 100,
        **kwargs,
    ) -> RunConfig:
        return RunConfig(
            model=model or ModelKind.rru(),
            r1=r1 or ReinforcementSpec.uniform(1.0, 3.0),
            r2=r2 or ReinforcementSpec.uniform(1.0, 3.0),
            horizon=horizon,
            **kwargs,
        )

    return _make


def record_from_path(
    z: Sequence[float],
    y: Sequence[float],
    steps: Optional[Sequence[int]] = None,
    n1: Optional[Sequence[int]] = None,
    in_a_n: Optional[Sequence[int]] = None,
    m1: float = 2.0,
    m2: float = 2.0,
    replication_index: int = 0,
    extension_multiplier: Optional[int] = None,
    z_extended: Optional[float] = None,
    max_abs_deviation: float = 0.0,
) -> TrajectoryRecord:
    """Build a record by hand from per-grid-point values"""
    steps = list(steps) if steps is not None else list(range(len(z)))
    n1 = list(n1) if n1 is not None else [0] * len(z)
    in_a_n = list(in_a_n) if in_a_n is not None else [0] * len(z)
    grid: List[GridPoint] = [
        GridPoint(n=n, z=zi, y=yi, n1=k, in_a_n=a, w1=1, w2=1, rho1_hat=1.0, rho2_hat=0.0)
        for n, zi, yi, k, a in zip(steps, z, y, n1, in_a_n)
    ]
    last = grid[-1]
    final = UrnState.from_counts(n=last.n, y1=last.z * last.y, y2=last.y - last.z * last.y, n1=last.n1)
    return TrajectoryRecord(
        replication_index=replication_index,
        seed=0,
        model_tag=ModelTag.RRU,
        m1=m1,
        m2=m2,
        rho1_limit=1.0,
        rho2_limit=0.0,
        a_n_alpha=0.25,
        a_n_c=1.0,
        y0=y[0],
        grid=grid,
        final_state=final,
        extension_multiplier=extension_multiplier,
        z_extended=z_extended,
        max_abs_deviation=max_abs_deviation,
    )


@pytest.fixture
def make_record():
    return record_from_path


@pytest.fixture
def fixed_policy():
    return ThresholdPolicy.fixed
