import concurrent.futures
import logging
import math
import time
from typing import Dict, List, Optional, Sequence, Tuple

from urnlab.core.config import settings
from urnlab.core.errors import BatchAbortedError, GuardViolationError, InvalidInputError, NumericalError
from urnlab.models.manifest import BatchResult, Manifest
from urnlab.models.threshold import AdaptiveEstimates
from urnlab.models.trajectory import INF, CoupledRun, CrossingRecord, GridPoint, RunConfig, TrajectoryRecord
from urnlab.models.urn import Color, ModelTag, UrnState
from urnlab.services.streams import ReplicationStreams
from urnlab.services.threshold_service import threshold_service
from urnlab.services.urn_service import advance, urn_service
from urnlab.utils.telemetrics import BATCH_FAILURES, REPLICATION_TIME, REPLICATIONS, STEPS, app_name, tracer
from urnlab.utils.writers import config_hash, tool_versions

logger = logging.getLogger(__name__)

GROWTH_REL_TOL = 1e-12


def growth_ratio(d: float, u: float) -> float:
    """Minimal multiplicative growth of Y between consecutive up-cross times"""
    return u * (1.0 - d) / (d * (1.0 - u))


class CrossingTracker:
    """
    Online alternating first-passage scan:
    t_j = inf{n > tau_{j-1} : Z_n > u}, tau_j = inf{n > t_j : Z_n < d}, tau_{-1} = -1.

    When total masses are supplied, Y at consecutive up-cross times is checked
    against the geometric growth bound.
    """

    def __init__(self, d: float, u: float):
        if not 0.0 < d < u < 1.0:
            raise InvalidInputError(f"crossing levels need 0 < d < u < 1, got d={d}, u={u}")
        self.d = d
        self.u = u
        self.ratio = growth_ratio(d, u)
        self.records: List[CrossingRecord] = []
        self._seeking_up = True

    def observe(self, n: int, z: float, y: Optional[float] = None) -> None:
        if self._seeking_up:
            if z > self.u:
                if y is not None and self.records:
                    previous = self.records[-1].y_at_t
                    bound = self.ratio * previous
                    if y < bound * (1.0 - GROWTH_REL_TOL):
                        raise GuardViolationError(
                            f"up-cross growth violated at step {n}: Y={y} < {bound}", step=n
                        )
                self.records.append(
                    CrossingRecord(j=len(self.records), t_j=n, tau_j=INF, d=self.d, u=self.u, y_at_t=y)
                )
                self._seeking_up = False
        elif z < self.d:
            self.records[-1].tau_j = n
            self._seeking_up = True


def detect_crossings(z_path: Sequence[float], d: float, u: float) -> List[CrossingRecord]:
    tracker = CrossingTracker(d, u)
    for n, z in enumerate(z_path):
        tracker.observe(n, z)
    return tracker.records


class _Process:
    """Mutable per-replication state of one urn, advanced by externally supplied draws"""

    def __init__(self, config: RunConfig, tag: ModelTag, grid: Sequence[int]):
        self.config = config
        self.tag = tag
        self.policy = config.policy
        if tag == ModelTag.RRU:
            self.rho1_limit, self.rho2_limit = 1.0, 0.0
        else:
            self.rho1_limit, self.rho2_limit = config.limits()
        self.grid = set(grid)
        self.horizon = config.horizon

        self.n = 0
        self.y1 = config.y1_0
        self.y2 = config.y2_0
        self.n1 = 0
        self.z0 = self.y1 / (self.y1 + self.y2)

        self.estimates = AdaptiveEstimates()

        self.rho1 = self.rho1_limit
        self.rho2 = self.rho2_limit
        self.w1 = 1
        self.w2 = 1
        self.last_w1 = 1
        self.last_w2 = 1

        self.points: List[GridPoint] = []
        self.tracker = CrossingTracker(config.crossing_d, config.crossing_u)
        self.tracker.observe(0, self.z0, self.y1 + self.y2)
        self.guard_threshold = urn_service.step_bound_threshold(config.reinforcement_high, config.guard_epsilon)
        self.guard_checks = 0
        self.clamp_count = 0
        self.reinforced_steps = 0
        self.max_abs_deviation = 0.0
        self.final_state: Optional[UrnState] = None
        self.z_extended: Optional[float] = None
        if config.horizon == 0:
            self.final_state = self.state()

    @property
    def z(self) -> float:
        return self.y1 / (self.y1 + self.y2)

    def state(self) -> UrnState:
        return UrnState.from_counts(
            n=self.n, y1=self.y1, y2=self.y2, n1=self.n1, last_w1=self.last_w1, last_w2=self.last_w2
        )

    def prepare(self, aux_u: Optional[float]) -> None:
        """Thresholds and indicators at the current state, recorded when n is on the grid"""
        if self.tag == ModelTag.ARRU:
            emission = threshold_service.emit(self.policy, self.estimates, self.n, aux_u)
            if emission.clamped:
                self.clamp_count += 1
            self.rho1, self.rho2 = emission.rho1_hat, emission.rho2_hat
        z = self.z
        self.w1 = int(z <= self.rho1)
        self.w2 = int(z >= self.rho2)

        if self.n in self.grid and self.n <= self.horizon:
            y = self.y1 + self.y2
            margin = self.config.a_n_c * y ** (-self.config.a_n_alpha)
            in_a_n = int(self.rho2_limit + margin < z < self.rho1_limit - margin)
            self.points.append(
                GridPoint.model_construct(
                    n=self.n, z=z, y=y, n1=self.n1, in_a_n=in_a_n, w1=self.w1, w2=self.w2,
                    rho1_hat=self.rho1, rho2_hat=self.rho2,
                    m1_hat=self.estimates.m1_hat, m2_hat=self.estimates.m2_hat,
                )
            )

    def apply(self, u: float, d1: float, d2: float) -> None:
        y = self.y1 + self.y2
        z = self.y1 / y
        step = self.n + 1
        guarded = y > self.guard_threshold

        y1, y2, red = advance(self.y1, self.y2, self.w1, self.w2, u, d1, d2)
        y_next = y1 + y2
        if not (math.isfinite(y1) and math.isfinite(y2) and math.isfinite(y_next)):
            raise NumericalError(f"non-finite urn state at step {step}", step=step)
        z_next = y1 / y_next

        if guarded:
            self.guard_checks += 1
            if abs(z_next - z) >= self.config.guard_epsilon:
                raise GuardViolationError(
                    f"|dZ|={abs(z_next - z)} >= {self.config.guard_epsilon} at step {step} with Y={y}", step=step
                )

        if red:
            self.n1 += 1
            if self.w1:
                self.reinforced_steps += 1
                self.observe(Color.RED, d1)
        elif self.w2:
            self.reinforced_steps += 1
            self.observe(Color.WHITE, d2)

        self.y1, self.y2 = y1, y2
        self.last_w1, self.last_w2 = self.w1, self.w2
        self.n = step

        if step <= self.horizon:
            self.tracker.observe(step, z_next, y_next)
            deviation = abs(z_next - self.z0)
            if deviation > self.max_abs_deviation:
                self.max_abs_deviation = deviation
            if step == self.horizon:
                self.final_state = self.state()

    def observe(self, color: Color, reinforcement: float) -> None:
        """Feed an applied reinforcement to the estimates behind the ARRU thresholds"""
        if self.tag != ModelTag.ARRU:
            return
        support = self.config.r1 if color == Color.RED else self.config.r2
        self.estimates = threshold_service.update_estimates(self.estimates, color, reinforcement, support)

    def fork_rru(self, grid: Sequence[int]) -> "_Process":
        """RRU started from this process's current composition, counts and step"""
        other = _Process(self.config, ModelTag.RRU, grid)
        other.n = self.n
        other.y1, other.y2, other.n1 = self.y1, self.y2, self.n1
        other.last_w1, other.last_w2 = self.last_w1, self.last_w2
        other.z0 = self.z0
        other.max_abs_deviation = self.max_abs_deviation
        other.points = [p for p in self.points if p.n < self.n]
        other.tracker = CrossingTracker(self.config.crossing_d, self.config.crossing_u)
        for record in self.tracker.records:
            other.tracker.records.append(record.model_copy())
        other.tracker._seeking_up = self.tracker._seeking_up
        other.final_state = self.final_state
        return other

    def record(self) -> TrajectoryRecord:
        config = self.config
        return TrajectoryRecord(
            replication_index=config.replication_index,
            seed=config.seed,
            model_tag=self.tag,
            m1=config.r1.mean,
            m2=config.r2.mean,
            rho1_limit=self.rho1_limit,
            rho2_limit=self.rho2_limit,
            a_n_alpha=config.a_n_alpha,
            a_n_c=config.a_n_c,
            y0=config.y0,
            grid=self.points,
            crossings=self.tracker.records,
            guard_checks=self.guard_checks,
            guard_violations=0,
            clamp_count=self.clamp_count,
            reinforced_steps=self.reinforced_steps,
            max_abs_deviation=self.max_abs_deviation,
            final_state=self.final_state,
            extension_multiplier=config.extension_multiplier,
            z_extended=self.z_extended,
        )


def _streams(config: RunConfig) -> ReplicationStreams:
    block_size = min(settings.STREAM_BLOCK_SIZE, config.total_steps + 1)
    return ReplicationStreams(config.seed, config.replication_index, config.r1, config.r2, block_size)


def _aux(process: _Process, streams: ReplicationStreams) -> Optional[float]:
    # only the adaptive family reads an auxiliary uniform per state
    return streams.next_aux() if process.tag == ModelTag.ARRU else None


def _simulate(config: RunConfig) -> TrajectoryRecord:
    streams = _streams(config)
    process = _Process(config, config.model.tag, config.record_grid)
    total = config.total_steps
    while True:
        process.prepare(_aux(process, streams))
        if process.n == total:
            break
        process.apply(*streams.next_step())
    if config.extension_multiplier:
        process.z_extended = process.z
    return process.record()


def _simulate_coupled(config: RunConfig, n0: int) -> CoupledRun:
    streams = _streams(config)
    arru = _Process(config, ModelTag.ARRU, config.record_grid)
    while True:
        arru.prepare(_aux(arru, streams))
        if arru.n == n0:
            break
        arru.apply(*streams.next_step())

    rru = arru.fork_rru(config.record_grid)
    rru.prepare(None)
    divergence_step: Optional[int] = None
    first_suppression_step: Optional[int] = None
    while arru.n < config.horizon:
        u, d1, d2 = streams.next_step()
        step = arru.n + 1
        if first_suppression_step is None and (arru.w1 == 0 or arru.w2 == 0):
            first_suppression_step = step
        arru.apply(u, d1, d2)
        rru.apply(u, d1, d2)
        if divergence_step is None and (arru.y1 != rru.y1 or arru.y2 != rru.y2):
            divergence_step = step
            if first_suppression_step is None or divergence_step < first_suppression_step:
                raise GuardViolationError(
                    f"coupled runs diverged at step {step} before any indicator suppression", step=step
                )
        arru.prepare(_aux(arru, streams))
        rru.prepare(None)

    return CoupledRun(
        n0=n0,
        arru=arru.record(),
        rru=rru.record(),
        divergence_step=divergence_step,
        first_suppression_step=first_suppression_step,
    )


def _replication_worker(config: RunConfig, n0: Optional[int]):
    """Top-level so it can be pickled into worker processes"""
    before_time = time.perf_counter()
    if n0 is None:
        result = _simulate(config)
    else:
        result = _simulate_coupled(config, n0)
    return config.replication_index, result, time.perf_counter() - before_time


class SimulationService:
    """Trajectory execution: single runs, coupled runs and seeded batches"""

    @staticmethod
    def run_trajectory(config: RunConfig) -> TrajectoryRecord:
        return _simulate(config)

    @staticmethod
    def run_coupled(config: RunConfig, n0: int) -> CoupledRun:
        """
        Run the ARRU to n0, then fork an RRU from its composition. Both consume
        the same colour and reinforcement draws afterwards; the first step with
        differing masses is reported.
        """
        if config.model.tag != ModelTag.ARRU:
            raise InvalidInputError("run_coupled needs an ARRU configuration")
        if not 0 <= n0 < config.horizon:
            raise InvalidInputError(f"n0 must lie in [0, horizon), got {n0}")
        if config.extension_multiplier:
            raise InvalidInputError("coupled runs are not extended")
        return _simulate_coupled(config, n0)

    @staticmethod
    def detect_crossings(z_path: Sequence[float], d: float, u: float) -> List[CrossingRecord]:
        return detect_crossings(z_path, d, u)

    def run_batch(self, template: RunConfig, replications: int, parallelism: int = 1) -> BatchResult:
        """Replication r reads the streams of (seed, r); results are ordered by r"""
        results, manifest = self._run_replications(template, replications, parallelism, n0=None)
        return BatchResult(records=results, manifest=manifest)

    def run_coupled_batch(
        self, template: RunConfig, n0: int, replications: int, parallelism: int = 1
    ) -> Tuple[List[CoupledRun], Manifest]:
        if not 0 <= n0 < template.horizon:
            raise InvalidInputError(f"n0 must lie in [0, horizon), got {n0}")
        return self._run_replications(template, replications, parallelism, n0=n0)

    @staticmethod
    def _run_replications(template: RunConfig, replications: int, parallelism: int, n0: Optional[int]):
        if replications < 1:
            raise InvalidInputError("replications must be >= 1")
        if parallelism < 1:
            raise InvalidInputError("parallelism must be >= 1")

        configs = [template.model_copy(update={"replication_index": r}) for r in range(replications)]
        model = template.model.tag.value
        logger.info(
            f"Running {replications} replications of {model} to n={template.total_steps} "
            f"with seed={template.seed} on {parallelism} worker(s)"
        )

        before_time = time.perf_counter()
        collected: Dict[int, object] = {}
        failure: Optional[BaseException] = None

        with tracer().start_as_current_span("run_batch") as span:
            span.set_attribute("urnlab.replications", replications)
            span.set_attribute("urnlab.model", model)
            if parallelism == 1:
                for config in configs:
                    try:
                        index, result, seconds = _replication_worker(config, n0)
                    except Exception as exc:
                        failure = exc
                        break
                    collected[index] = result
                    REPLICATION_TIME.labels(model=model, app_name=app_name()).observe(seconds)
            else:
                with concurrent.futures.ProcessPoolExecutor(max_workers=parallelism) as executor:
                    futures = {executor.submit(_replication_worker, config, n0): config for config in configs}
                    for future in concurrent.futures.as_completed(futures):
                        try:
                            index, result, seconds = future.result()
                        except Exception as exc:
                            if failure is None:
                                failure = exc
                                for pending in futures:
                                    pending.cancel()
                            continue
                        collected[index] = result
                        REPLICATION_TIME.labels(model=model, app_name=app_name()).observe(seconds)

        indices = sorted(collected)
        ordered = [collected[r] for r in indices]
        STEPS.labels(model=model, app_name=app_name()).inc(template.total_steps * len(ordered))
        REPLICATIONS.labels(model=model, app_name=app_name()).inc(len(ordered))

        manifest = Manifest(
            config_hash=config_hash(template.model_copy(update={"replication_index": 0})),
            seed=template.seed,
            replications=len(ordered),
            replication_indices=indices,
            tool_version=tool_versions(),
            proxy_multiplier=template.extension_multiplier,
            authoritative=failure is None,
            wall_time_seconds=time.perf_counter() - before_time,
        )

        if failure is not None:
            BATCH_FAILURES.labels(exception_type=type(failure).__name__, app_name=app_name()).inc()
            logger.error(f"Batch aborted after {len(ordered)} of {replications} replications: {failure}")
            partial = BatchResult(records=ordered, manifest=manifest) if n0 is None else (ordered, manifest)
            raise BatchAbortedError(f"batch aborted: {failure}", partial=partial) from failure

        logger.info(f"Finished {len(ordered)} replications in {manifest.wall_time_seconds:.3f}s")
        return ordered, manifest


# Create singleton instance
simulation_service = SimulationService()
