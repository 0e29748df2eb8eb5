import argparse
import logging
from typing import Dict, List

from urnlab.cli.common import (TRAJECTORY_COLUMNS, checked, finish_metrics, load_experiment, output_dir,
                               require_positive, resolve_threads, trajectory_rows)
from urnlab.core.errors import EXIT_OK, BatchAbortedError
from urnlab.models.manifest import BatchResult
from urnlab.models.trajectory import TrajectoryRecord
from urnlab.services import simulation_service, stats_service
from urnlab.utils.telemetrics import tracer
from urnlab.utils.writers import atomic_write_csv, atomic_write_json

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="Run a seeded batch and write trajectories")
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Batch seed (overrides the config)")
    parser.add_argument("--reps", type=int, default=1, help="Number of replications")
    parser.add_argument("--horizon", type=int, default=None, help="Steps per replication (overrides the config)")
    parser.add_argument("--grid", default=None, help="Record grid: pow2 or linear:k")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes (default URNLAB_THREADS)")
    parser.add_argument("--multiplier", type=int, default=None, help="Extend runs to read a Z-infinity proxy")
    parser.add_argument("--out", default=".", help="Output directory")
    parser.set_defaults(handler=cmd_simulate)


def summarize(records: List[TrajectoryRecord]) -> Dict:
    """Batch summary written to summary.json"""
    horizon = records[0].final_state.n
    z = stats_service.moment_estimate(r.final_state.z for r in records)
    y = stats_service.moment_estimate(r.final_state.y for r in records)
    summary = {
        "replications": len(records),
        "horizon": horizon,
        "model": records[0].model_tag.value,
        "final_z": z.model_dump(),
        "final_y": y.model_dump(),
        "a_n_fraction": stats_service.a_n_fraction(records, horizon).model_dump(),
        "max_abs_deviation": stats_service.moment_estimate(r.max_abs_deviation for r in records).model_dump(),
        "crossings": sum(len(r.crossings) for r in records),
        "guard_checks": sum(r.guard_checks for r in records),
        "guard_violations": sum(r.guard_violations for r in records),
        "clamp_count": sum(r.clamp_count for r in records),
        "reinforced_steps": sum(r.reinforced_steps for r in records),
    }
    if records[0].z_extended is not None:
        summary["z_infinity_proxy"] = stats_service.moment_estimate(r.z_extended for r in records).model_dump()
    return summary


def write_batch(out, result: BatchResult) -> None:
    atomic_write_csv(out / "trajectories.csv", TRAJECTORY_COLUMNS, trajectory_rows(result.records))
    atomic_write_json(out / "summary.json", summarize(result.records))
    atomic_write_json(out / "manifest.json", result.manifest)


def cmd_simulate(args: argparse.Namespace) -> int:
    require_positive("--reps", args.reps)
    require_positive("--threads", args.threads)
    experiment = load_experiment(args.config)
    config = checked(
        experiment.run_config,
        seed=args.seed, horizon=args.horizon, grid=args.grid, extension_multiplier=args.multiplier,
    )
    threads = resolve_threads(args.threads)
    out = output_dir(args.out)

    with tracer().start_as_current_span("cmd_simulate"):
        try:
            result = simulation_service.run_batch(config, args.reps, threads)
        except BatchAbortedError as exc:
            if exc.partial is not None and exc.partial.records:
                write_batch(out, exc.partial)
            finish_metrics(out)
            raise
        write_batch(out, result)
    finish_metrics(out)
    logger.info(f"Wrote {len(result.records)} replications to {out}")
    return EXIT_OK
