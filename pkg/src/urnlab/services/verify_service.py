import logging
import math
from pathlib import Path
from typing import List, Optional, Sequence

import yaml
from pydantic import ValidationError

from urnlab.core.config import settings
from urnlab.core.errors import (BatchAbortedError, ConfigurationError, InvalidInputError, ReplicationPlanError,
                                SuiteExecutionError)
from urnlab.models.trajectory import RunConfig
from urnlab.models.verification import (AcceptanceFile, SuiteId, SuiteReport, SuiteSpec, Verdict,
                                        VerificationReport)
from urnlab.services.simulation_service import simulation_service
from urnlab.services.suites import SUITES, Runners
from urnlab.services.urn_service import urn_service
from urnlab.utils.telemetrics import SUITE_CRITERIA, app_name, tracer

logger = logging.getLogger(__name__)

CHERNOFF_TARGET = 1e-3


def load_acceptance(path: Path) -> AcceptanceFile:
    """Parse and validate the acceptance file"""
    try:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except FileNotFoundError:
        raise ConfigurationError(f"acceptance file {path} not found")
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"acceptance file {path} is not valid YAML: {exc}")
    try:
        return AcceptanceFile.model_validate(raw or {})
    except ValidationError as exc:
        raise ConfigurationError(f"acceptance file {path} is invalid: {exc}")


class VerifyService:
    """Binds suites to configurations and thresholds, runs them and assembles reports"""

    @staticmethod
    def plan_replications(
        target_margin: float,
        pilot_variance: float,
        indicator_mean: Optional[float] = None,
        cap: Optional[int] = None,
    ) -> int:
        """
        Smallest R with sqrt(pilot_variance / R) <= target_margin / 4.

        For indicator-mean criteria the count is raised, if needed, until the
        Chernoff bound on P(S <= (1 - margin / p) E[S]) drops below 1e-3.
        """
        cap = cap or settings.REPLICATION_CAP
        if target_margin <= 0:
            raise InvalidInputError("target_margin must be positive")
        if pilot_variance < 0:
            raise InvalidInputError("pilot_variance must be non-negative")

        if pilot_variance == 0:
            count = 1
        else:
            count = math.ceil(16.0 * pilot_variance / (target_margin * target_margin))
            # guard against ceil of a value like 10000.000000000002
            while count > 1 and math.sqrt(pilot_variance / (count - 1)) <= target_margin / 4.0:
                count -= 1

        if indicator_mean is not None:
            if not 0.0 < indicator_mean <= 1.0:
                raise InvalidInputError("indicator_mean must lie in (0, 1]")
            c0 = max(0.0, 1.0 - target_margin / indicator_mean)
            # exp(-(1 - c0)^2 R p / 2) <= target
            needed = math.ceil(2.0 * math.log(1.0 / CHERNOFF_TARGET) / ((1.0 - c0) ** 2 * indicator_mean))
            while needed > 1 and urn_service.chernoff_lower_tail(c0, (needed - 1) * indicator_mean) <= CHERNOFF_TARGET:
                needed -= 1
            count = max(count, needed)

        if count > cap:
            raise ReplicationPlanError(f"margin {target_margin} needs {count} replications, above the cap {cap}")
        return count

    @staticmethod
    def build_specs(
        acceptance: AcceptanceFile,
        suite_id: SuiteId,
        seed: Optional[int] = None,
        proxy_multiplier: Optional[int] = None,
    ) -> List[SuiteSpec]:
        """The suite itself plus, where defined, its boundary variant marked informational"""
        if suite_id not in acceptance.suites:
            raise ConfigurationError(f"acceptance file has no entry for suite {suite_id.value}")
        entry = acceptance.suites[suite_id]
        definition = SUITES[suite_id]
        seed = acceptance.seed if seed is None else seed
        multiplier = proxy_multiplier or acceptance.proxy_multiplier

        variants = [False, True] if definition.boundary_variant and entry.boundary_variant else [False]
        specs = []
        for boundary in variants:
            try:
                configs = definition.build(entry, seed, multiplier, boundary)
            except ValidationError as exc:
                raise ConfigurationError(f"suite {suite_id.value} has an invalid configuration: {exc}")
            specs.append(
                SuiteSpec(
                    id=suite_id,
                    theorem_ref=definition.theorem_ref + (" (rho1 = rho2 boundary variant)" if boundary else ""),
                    configs=configs,
                    thresholds=entry.thresholds,
                    replications=entry.replications,
                    proxy_multiplier=multiplier,
                    verdict=Verdict.INFORMATIONAL if boundary else None,
                )
            )
        return specs

    @staticmethod
    def run_suite(spec: SuiteSpec, parallelism: int = 1) -> SuiteReport:
        def batch(config: RunConfig, replications: int):
            return simulation_service.run_batch(config, replications, parallelism).records

        def coupled(config: RunConfig, n0: int, replications: int):
            runs, _ = simulation_service.run_coupled_batch(config, n0, replications, parallelism)
            return runs

        logger.info(f"Running suite {spec.id.value}: {spec.theorem_ref}")
        with tracer().start_as_current_span("run_suite") as span:
            span.set_attribute("urnlab.suite", spec.id.value)
            try:
                rows = SUITES[spec.id].evaluate(spec, Runners(batch=batch, coupled=coupled))
            except BatchAbortedError as exc:
                logger.error(f"Suite {spec.id.value} could not run: {exc}")
                raise SuiteExecutionError(f"suite {spec.id.value} failed to execute: {exc}") from exc

        for row in rows:
            SUITE_CRITERIA.labels(suite=spec.id.value, verdict=row.verdict.value, app_name=app_name()).inc()

        if spec.verdict == Verdict.INFORMATIONAL or all(r.verdict == Verdict.INFORMATIONAL for r in rows):
            verdict = Verdict.INFORMATIONAL
        elif any(r.verdict == Verdict.FAIL for r in rows):
            verdict = Verdict.FAIL
        else:
            verdict = Verdict.PASS
        logger.info(f"Suite {spec.id.value} finished with verdict {verdict.value}")
        return SuiteReport(suite=spec.id, theorem_ref=spec.theorem_ref, rows=rows, verdict=verdict)

    def run_all(
        self,
        acceptance: AcceptanceFile,
        suite_ids: Sequence[SuiteId],
        parallelism: int = 1,
        seed: Optional[int] = None,
        proxy_multiplier: Optional[int] = None,
    ) -> VerificationReport:
        reports = []
        for suite_id in suite_ids:
            for spec in self.build_specs(acceptance, suite_id, seed, proxy_multiplier):
                reports.append(self.run_suite(spec, parallelism))
        return VerificationReport(seed=acceptance.seed if seed is None else seed, suites=reports)


# Create singleton instance
verify_service = VerifyService()
