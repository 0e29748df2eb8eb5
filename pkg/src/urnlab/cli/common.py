import logging
import os
from pathlib import Path
from typing import Iterator, List, Optional

import yaml
from pydantic import ValidationError

from urnlab.core.config import settings
from urnlab.core.errors import ConfigurationError
from urnlab.models.experiment import ExperimentFile
from urnlab.models.trajectory import TrajectoryRecord
from urnlab.utils.telemetrics import write_metrics

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ["n", "rep", "z", "y", "n1", "w1", "w2", "rho1_hat", "rho2_hat", "in_A_n"]


def load_experiment(path: str) -> ExperimentFile:
    try:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except FileNotFoundError:
        raise ConfigurationError(f"config file {path} not found")
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config file {path} is not valid YAML: {exc}")
    try:
        return ExperimentFile.model_validate(raw or {})
    except ValidationError as exc:
        raise ConfigurationError(f"config file {path} is invalid: {exc}")


def resolve_threads(requested: Optional[int]) -> int:
    """--threads, then URNLAB_THREADS, then one worker per CPU"""
    threads = requested or settings.URNLAB_THREADS or os.cpu_count() or 1
    if threads < 1:
        raise ConfigurationError("--threads must be >= 1")
    return threads


def require_positive(name: str, value: Optional[int]) -> None:
    if value is not None and value < 1:
        raise ConfigurationError(f"{name} must be >= 1, got {value}")


def trajectory_rows(records: List[TrajectoryRecord]) -> Iterator[list]:
    for record in records:
        for p in record.grid:
            yield [p.n, record.replication_index, p.z, p.y, p.n1, p.w1, p.w2, p.rho1_hat, p.rho2_hat, p.in_a_n]


def output_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def finish_metrics(out: Path) -> None:
    write_metrics(out / "metrics.prom")
    logger.info(f"Wrote metrics to {out / 'metrics.prom'}")


def checked(build, *args, **kwargs):
    """Call a config builder, reporting validation failures as usage errors"""
    try:
        return build(*args, **kwargs)
    except ValidationError as exc:
        raise ConfigurationError(f"invalid run configuration: {exc}")
