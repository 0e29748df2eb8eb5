import logging
import math
from typing import Iterable, List, Optional, Sequence

import numpy as np
from scipy import special

from urnlab.core.config import settings
from urnlab.core.errors import InvalidInputError, ProxyUnavailableError, UnequalMeansError
from urnlab.models.statistics import (CltReplication, CltStatistic, CltSummary, DriftDiagnostic, HarmonicPoint,
                                      KsResult, MomentEstimate)
from urnlab.models.trajectory import TrajectoryRecord
from urnlab.services.urn_service import urn_service

logger = logging.getLogger(__name__)


def moment_estimate(values: Iterable[float]) -> MomentEstimate:
    """Sample mean, unbiased variance and standard error"""
    data = np.asarray(list(values), dtype=float)
    count = int(data.size)
    if count == 0:
        return MomentEstimate(mean=0.0, variance=0.0, count=0, standard_error=0.0)
    variance = float(data.var(ddof=1)) if count > 1 else 0.0
    return MomentEstimate(
        mean=float(data.mean()),
        variance=variance,
        count=count,
        standard_error=math.sqrt(variance / count),
    )


def _column(batch: Sequence[TrajectoryRecord], n: int, field: str) -> np.ndarray:
    return np.array([getattr(record.point_at(n), field) for record in batch], dtype=float)


class StatsService:
    """Estimators over completed batches; every function is pure"""

    @staticmethod
    def moment_estimate(values: Iterable[float]) -> MomentEstimate:
        return moment_estimate(values)

    @staticmethod
    def z_infinity_proxy(record: TrajectoryRecord, multiplier: int) -> float:
        """Z read at multiplier x horizon from a run extended on the same streams"""
        if multiplier < 2:
            raise InvalidInputError(f"multiplier must be >= 2, got {multiplier}")
        if record.extension_multiplier != multiplier or record.z_extended is None:
            raise ProxyUnavailableError(
                f"replication {record.replication_index} was extended by {record.extension_multiplier}, "
                f"not {multiplier}"
            )
        return record.z_extended

    def studentize(
        self,
        batch: Sequence[TrajectoryRecord],
        m: float,
        sigma1_sq: float,
        sigma2_sq: float,
        which: CltStatistic,
        multiplier: Optional[int] = None,
        restrict_to_a_n: bool = False,
        sigma_floor: Optional[float] = None,
    ) -> CltSummary:
        """
        Per replication: sqrt(n) (N1n / n - proxy) and sqrt(n) (Z_n - proxy),
        each divided by the square root of its limiting variance at the proxy.

        Replications whose variance for `which` falls below the floor are
        excluded and counted. With `restrict_to_a_n`, replications outside A_n
        at the horizon are dropped first and counted separately.
        """
        if not batch:
            raise InvalidInputError("studentize needs a non-empty batch")
        floor = settings.SIGMA_FLOOR if sigma_floor is None else sigma_floor
        for record in batch:
            if not math.isclose(record.m1, record.m2, rel_tol=1e-12, abs_tol=1e-12):
                raise UnequalMeansError(
                    f"replication {record.replication_index} has m1={record.m1} != m2={record.m2}"
                )

        horizon = batch[0].final_state.n
        if horizon < 1:
            raise InvalidInputError("studentize needs a horizon >= 1")
        root_n = math.sqrt(horizon)
        summary = CltSummary(which=which, horizon=horizon, sigma_floor=floor)

        for record in batch:
            k = multiplier if multiplier is not None else record.extension_multiplier or settings.PROXY_MULTIPLIER
            proxy = self.z_infinity_proxy(record, k)
            final = record.point_at(horizon)
            if restrict_to_a_n and not final.in_a_n:
                summary.filtered_count += 1
                continue

            variances = urn_service.clt_variances(proxy, m, sigma1_sq, sigma2_sq)
            sigma = variances.sigma_big if which == CltStatistic.N1 else variances.sigma_z
            if sigma < floor:
                summary.excluded_count += 1
                continue

            statistic_n1 = root_n * (final.n1 / horizon - proxy)
            statistic_z = root_n * (final.z - proxy)
            summary.included.append(
                CltReplication(
                    replication_index=record.replication_index,
                    z_inf_proxy=proxy,
                    statistic_n1=statistic_n1,
                    statistic_z=statistic_z,
                    sigma_at_proxy=variances,
                    studentized_n1=statistic_n1 / math.sqrt(variances.sigma_big),
                    studentized_z=statistic_z / math.sqrt(variances.sigma_z),
                    in_a_n_at_horizon=final.in_a_n,
                )
            )

        if summary.excluded_count:
            logger.warning(f"Excluded {summary.excluded_count} replications with variance below {floor}")
        return summary

    @staticmethod
    def ks_distance(samples: Sequence[float]) -> KsResult:
        """sup_x |F_n(x) - Phi(x)| evaluated at the sorted sample points"""
        data = np.sort(np.asarray(samples, dtype=float))
        n = int(data.size)
        if n == 0:
            raise InvalidInputError("ks_distance needs at least one sample")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("ks_distance samples must be finite")
        cdf = special.ndtr(data)
        i = np.arange(1, n + 1, dtype=float)
        d = max(float(np.max(i / n - cdf)), float(np.max(cdf - (i - 1.0) / n)))
        return KsResult(d=min(max(d, 0.0), 1.0), n=n)

    @staticmethod
    def harmonic_moment_curve(
        batch: Sequence[TrajectoryRecord], j: int, grid: Optional[Sequence[int]] = None
    ) -> List[HarmonicPoint]:
        """Empirical E[(n / Y_n)^j] at every grid step"""
        if j < 0:
            raise InvalidInputError(f"j must be >= 0, got {j}")
        if not batch:
            raise InvalidInputError("harmonic_moment_curve needs a non-empty batch")
        steps = list(grid) if grid is not None else batch[0].steps()
        curve = []
        for n in steps:
            ratios = n / _column(batch, n, "y")
            curve.append(HarmonicPoint(n=n, estimate=moment_estimate(ratios ** j)))
        return curve

    @staticmethod
    def band_probability(batch: Sequence[TrajectoryRecord], n: int, z_lo: float, z_hi: float) -> MomentEstimate:
        z = _column(batch, n, "z")
        return moment_estimate(((z_lo <= z) & (z <= z_hi)).astype(float))

    @staticmethod
    def atom_scan(samples: Sequence[float], lo: float, hi: float, bin_width: float) -> float:
        """Largest empirical mass among the bins [lo + k w, lo + (k + 1) w) restricted to (lo, hi)"""
        if bin_width <= 0:
            raise InvalidInputError("bin_width must be positive")
        if not lo < hi:
            raise InvalidInputError("atom_scan needs lo < hi")
        data = np.asarray(samples, dtype=float)
        if data.size == 0:
            return 0.0
        inside = data[(data > lo) & (data < hi)]
        if inside.size == 0:
            return 0.0
        bins = np.floor((inside - lo) / bin_width).astype(np.int64)
        return float(np.bincount(bins).max() / data.size)

    @staticmethod
    def drift_diagnostic(
        batch: Sequence[TrajectoryRecord], n: int, s: float, delta: float, rho1: float
    ) -> DriftDiagnostic:
        """
        G(n, s) = Delta_{n + ceil(n s)} - Delta_n with Delta_n = |rho1 - Z_n|, split
        on Q(delta, n) = {Delta_n > delta}.
        """
        if s <= 0:
            raise InvalidInputError("s must be positive")
        for record in batch:
            if not record.m1 > record.m2:
                raise InvalidInputError(f"drift diagnostic needs m1 > m2, got m1={record.m1}, m2={record.m2}")
        later_n = n + math.ceil(n * s)
        delta_now = np.abs(rho1 - _column(batch, n, "z"))
        delta_later = np.abs(rho1 - _column(batch, later_n, "z"))
        g = delta_later - delta_now
        q = (delta_now > delta).astype(float)
        return DriftDiagnostic(
            n=n,
            later_n=later_n,
            lhs=moment_estimate(g * q),
            q_mass=moment_estimate(q),
            complement=moment_estimate(g * (1.0 - q)),
        )

    @staticmethod
    def increment_mean(batch: Sequence[TrajectoryRecord], n: int, field: str = "z") -> MomentEstimate:
        """Empirical mean of X_{n+1} - X_n for X in {z, y}"""
        if field not in ("z", "y"):
            raise InvalidInputError(f"field must be 'z' or 'y', got {field}")
        return moment_estimate(_column(batch, n + 1, field) - _column(batch, n, field))

    @staticmethod
    def linear_growth_probability(
        batch: Sequence[TrajectoryRecord], n: int, c1: float, big_c1: float
    ) -> MomentEstimate:
        """Frequency of y0 + c1 n <= Y_n <= y0 + C1 n"""
        y = _column(batch, n, "y")
        y0 = np.array([record.y0 for record in batch])
        return moment_estimate(((y0 + c1 * n <= y) & (y <= y0 + big_c1 * n)).astype(float))

    @staticmethod
    def growth_rate_concentration(
        batch: Sequence[TrajectoryRecord], n: int, target: float, tolerance: float
    ) -> MomentEstimate:
        if n < 1:
            raise InvalidInputError("n must be >= 1")
        rate = _column(batch, n, "y") / n
        return moment_estimate((np.abs(rate - target) < tolerance).astype(float))

    @staticmethod
    def median_abs_deviation(batch: Sequence[TrajectoryRecord], n: int, target: float) -> float:
        return float(np.median(np.abs(_column(batch, n, "z") - target)))

    @staticmethod
    def a_n_fraction(batch: Sequence[TrajectoryRecord], n: int) -> MomentEstimate:
        return moment_estimate(_column(batch, n, "in_a_n"))

    @staticmethod
    def sup_deviation_probability(batch: Sequence[TrajectoryRecord], h: float) -> MomentEstimate:
        """Frequency of max_n |Z_n - Z_0| >= h up to the horizon"""
        if h <= 0:
            raise InvalidInputError("h must be positive")
        return moment_estimate([float(record.max_abs_deviation >= h) for record in batch])


# Create singleton instance
stats_service = StatsService()
