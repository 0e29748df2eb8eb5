import argparse
import logging
import time
from typing import Dict, List, Optional

from urnlab.cli.common import checked, finish_metrics, load_experiment, output_dir, require_positive, resolve_threads
from urnlab.core.config import settings
from urnlab.core.errors import EXIT_OK, ConfigurationError
from urnlab.models.manifest import Manifest
from urnlab.models.experiment import SWEEP_AXES
from urnlab.models.statistics import MomentEstimate
from urnlab.models.trajectory import TrajectoryRecord
from urnlab.services import simulation_service, stats_service
from urnlab.utils.telemetrics import tracer
from urnlab.utils.writers import atomic_write_csv, atomic_write_json, config_hash, tool_versions

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["point", *SWEEP_AXES, "statistic", "value", "standard_error", "count"]
RUN_COLUMNS = ["point", "rep", "n", "z", "y", "n1"]


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="Run a Cartesian sweep over declared axes")
    parser.add_argument("--config", required=True, help="YAML run configuration with a 'sweep' section")
    parser.add_argument("--seed", type=int, default=None, help="Seed shared by every sweep point")
    parser.add_argument("--reps", type=int, default=1, help="Replications per sweep point")
    parser.add_argument("--horizon", type=int, default=None, help="Horizon when it is not a sweep axis")
    parser.add_argument("--grid", default=None, help="Record grid: pow2 or linear:k")
    parser.add_argument("--threads", type=int, default=None, help="Worker processes (default URNLAB_THREADS)")
    parser.add_argument("--out", default=".", help="Output directory")
    parser.set_defaults(handler=cmd_sweep)


def point_statistics(records: List[TrajectoryRecord]) -> Dict[str, Optional[MomentEstimate]]:
    horizon = records[0].final_state.n
    rho1 = records[0].rho1_limit
    return {
        "mean_abs_dev_rho1": stats_service.moment_estimate(abs(r.final_state.z - rho1) for r in records),
        "mean_z": stats_service.moment_estimate(r.final_state.z for r in records),
        "a_n_fraction": stats_service.a_n_fraction(records, horizon),
        "mean_y_over_n": (
            stats_service.moment_estimate(r.final_state.y / horizon for r in records) if horizon > 0 else None
        ),
    }


def cmd_sweep(args: argparse.Namespace) -> int:
    require_positive("--reps", args.reps)
    require_positive("--threads", args.threads)
    experiment = load_experiment(args.config)
    points = experiment.sweep.points()
    if len(points) > settings.SWEEP_CAP:
        raise ConfigurationError(f"sweep has {len(points)} points, above the cap {settings.SWEEP_CAP}")
    threads = resolve_threads(args.threads)
    out = output_dir(args.out)
    logger.info(f"Sweeping {len(points)} point(s) with {args.reps} replication(s) each")

    rows, runs = [], []
    before_time = time.perf_counter()
    with tracer().start_as_current_span("cmd_sweep"):
        for index, point in enumerate(points):
            config = checked(experiment.sweep_config, point, seed=args.seed, horizon=args.horizon, grid=args.grid)
            result = simulation_service.run_batch(config, args.reps, threads)
            axis_values = [point.get(axis, "") for axis in SWEEP_AXES]
            for name, estimate in point_statistics(result.records).items():
                if estimate is None:
                    rows.append([index, *axis_values, name, "", "", 0])
                else:
                    rows.append([index, *axis_values, name, estimate.mean, estimate.standard_error, estimate.count])
            for record in result.records:
                state = record.final_state
                runs.append([index, record.replication_index, state.n, state.z, state.y, state.n1])

    atomic_write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows)
    atomic_write_csv(out / "runs.csv", RUN_COLUMNS, runs)
    manifest = Manifest(
        config_hash=config_hash(experiment),
        seed=experiment.seed if args.seed is None else args.seed,
        replications=args.reps * len(points),
        tool_version=tool_versions(),
        wall_time_seconds=time.perf_counter() - before_time,
    )
    atomic_write_json(out / "manifest.json", manifest)
    finish_metrics(out)
    return EXIT_OK
