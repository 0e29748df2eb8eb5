"""
Suite bindings: which configurations each verification suite runs and how its
criteria are evaluated. Numeric pass thresholds always come from the
acceptance file via `SuiteSpec.thresholds`.
"""

import math
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from urnlab.core.errors import ConfigurationError
from urnlab.models.statistics import CltStatistic
from urnlab.models.threshold import ThresholdPolicy
from urnlab.models.trajectory import RunConfig, TrajectoryRecord, pow2_grid
from urnlab.models.urn import ModelKind, ReinforcementSpec
from urnlab.models.verification import (Comparison, CriterionKind, ReportRow, SuiteAcceptance, SuiteId, SuiteSpec,
                                        Verdict)
from urnlab.services.stats_service import stats_service
from urnlab.services.urn_service import urn_service

# reinforcement laws shared by the suites
HIGH = ReinforcementSpec.uniform(1.5, 2.5)
LOW = ReinforcementSpec.uniform(0.5, 1.5)
EQUAL = ReinforcementSpec.uniform(1.0, 3.0)
EQUAL_POINT = ReinforcementSpec.point_mass(2.0)

# increments are read at n = 2^k, k = 4..10
INCREMENT_STEPS = [2 ** k for k in range(4, 11)]

# T8 starts inside (0.3, 0.7) with room for the largest single step
T8_START_MASS = 50.0

# g1(2, 1) = 0.7 and g2(2, 1) = 0.5 under the default slope and gap
ADAPTIVE_OFFSET = 0.7 - 0.4 * 2.0 / 3.0

BatchRunner = Callable[[RunConfig, int], List[TrajectoryRecord]]
CoupledRunner = Callable[[RunConfig, int, int], list]


class Runners(NamedTuple):
    batch: BatchRunner
    coupled: CoupledRunner


def compare(observed: float, comparison: Comparison, threshold: float) -> bool:
    if comparison == Comparison.LT:
        return observed < threshold
    if comparison == Comparison.LE:
        return observed <= threshold
    if comparison == Comparison.GT:
        return observed > threshold
    if comparison == Comparison.GE:
        return observed >= threshold
    return observed == threshold


def signed_margin(observed: float, comparison: Comparison, threshold: float) -> float:
    """Positive when the criterion holds (zero on the boundary of a non-strict one)"""
    if comparison in (Comparison.LT, Comparison.LE):
        return threshold - observed
    if comparison in (Comparison.GT, Comparison.GE):
        return observed - threshold
    return -abs(observed - threshold)


def make_row(
    spec: SuiteSpec,
    criterion: str,
    kind: CriterionKind,
    comparison: Comparison,
    observed: Optional[float],
    threshold: float,
    informational: bool = False,
) -> ReportRow:
    informational = informational or spec.verdict == Verdict.INFORMATIONAL
    if observed is None or not math.isfinite(observed):
        verdict = Verdict.INFORMATIONAL if informational else Verdict.FAIL
        return ReportRow(
            suite=spec.id, criterion=criterion, kind=kind, comparison=comparison,
            observed=None, threshold=threshold, margin=None, verdict=verdict,
        )
    holds = compare(observed, comparison, threshold)
    if informational:
        verdict = Verdict.INFORMATIONAL
    else:
        verdict = Verdict.PASS if holds else Verdict.FAIL
    return ReportRow(
        suite=spec.id,
        criterion=criterion,
        kind=kind,
        comparison=comparison,
        observed=float(observed),
        threshold=float(threshold),
        margin=signed_margin(observed, comparison, threshold),
        verdict=verdict,
    )


def required(thresholds: Dict[str, float], name: str, suite: SuiteId) -> float:
    try:
        return thresholds[name]
    except KeyError:
        raise ConfigurationError(f"acceptance file lacks threshold '{name}' for suite {suite.value}")


def threshold(spec: SuiteSpec, name: str) -> float:
    return required(spec.thresholds, name, spec.id)


def _grid(horizon: int, extra: Iterable[int] = ()) -> List[int]:
    return sorted(set(pow2_grid(horizon)) | {n for n in extra if 0 <= n <= horizon})


def _config(
    acceptance: SuiteAcceptance,
    seed: int,
    model: ModelKind,
    r1: ReinforcementSpec,
    r2: ReinforcementSpec,
    policy: Optional[ThresholdPolicy] = None,
    extra_grid: Iterable[int] = (),
    **kwargs,
) -> RunConfig:
    fields = dict(
        model=model,
        r1=r1,
        r2=r2,
        horizon=acceptance.horizon,
        record_grid=_grid(acceptance.horizon, extra_grid),
        seed=seed,
        **kwargs,
    )
    if policy is not None:
        fields["policy"] = policy
    return RunConfig(**fields)


def _target(config: RunConfig) -> float:
    """Limit the proportion is expected to reach when the means differ"""
    rho1, rho2 = config.limits()
    return rho1 if config.r1.mean > config.r2.mean else rho2


def _interior_config(
    acceptance: SuiteAcceptance,
    seed: int,
    boundary: bool,
    proxy_multiplier: Optional[int] = None,
    extra_grid: Iterable[int] = (),
    **kwargs,
) -> RunConfig:
    """Equal-means ARRU on (0.3, 0.7), or on the single point 0.5 for the boundary variant"""
    rho1, rho2 = (0.5, 0.5) if boundary else (0.7, 0.3)
    return _config(
        acceptance, seed, ModelKind.arru("interior"), EQUAL, EQUAL,
        policy=ThresholdPolicy.fixed(rho1, rho2),
        extra_grid=[acceptance.horizon // 4, *extra_grid],
        extension_multiplier=proxy_multiplier,
        a_n_alpha=0.25,
        a_n_c=1.0,
        **kwargs,
    )


def _rru_clt_config(
    acceptance: SuiteAcceptance, seed: int, boundary: bool, proxy_multiplier: int
) -> RunConfig:
    model = ModelKind.mrru(0.5, 0.5) if boundary else ModelKind.rru()
    return _config(
        acceptance, seed, model, EQUAL, EQUAL,
        extension_multiplier=proxy_multiplier,
    )


def _increment_grid(horizon: int) -> List[int]:
    return [m for n in INCREMENT_STEPS if n + 1 <= horizon for m in (n, n + 1)]


def _martingale_config(acceptance: SuiteAcceptance, seed: int) -> RunConfig:
    """Plain urn with equal point-mass reinforcement, run just past the last increment step"""
    horizon = min(acceptance.horizon, INCREMENT_STEPS[-1] + 1)
    return _config(
        acceptance.model_copy(update={"horizon": horizon}), seed, ModelKind.rru(), EQUAL_POINT, EQUAL_POINT,
        extra_grid=_increment_grid(horizon),
    )


# ---------------------------------------------------------------- builders


def build_t1(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    noisy = ThresholdPolicy.noisy(0.7, 0.3)
    return [
        _config(acceptance, seed, ModelKind.arru("noisy"), HIGH, LOW, policy=noisy),
        _config(acceptance, seed, ModelKind.arru("noisy"), LOW, HIGH, policy=noisy),
    ]


def _t2_checkpoints(horizon: int) -> List[int]:
    return [horizon // 100, horizon // 10, horizon]


def build_t2(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    checkpoints = _t2_checkpoints(acceptance.horizon)
    return [
        _config(
            acceptance, seed, ModelKind.arru("adaptive"), HIGH, LOW,
            policy=ThresholdPolicy.adaptive(2.0, 1.0, map_offset=ADAPTIVE_OFFSET), extra_grid=checkpoints,
        ),
        _config(
            acceptance, seed, ModelKind.arru("adaptive"), LOW, HIGH,
            policy=ThresholdPolicy.adaptive(1.0, 2.0, map_offset=ADAPTIVE_OFFSET), extra_grid=checkpoints,
        ),
    ]


def build_t3(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    return [
        _interior_config(acceptance, seed, boundary=False, extra_grid=_increment_grid(acceptance.horizon)),
        # started with y0 >= 2b so the uniform sup-deviation bound applies
        _config(acceptance, seed, ModelKind.rru(), EQUAL, EQUAL, y1_0=100.0, y2_0=100.0),
    ]


def build_t4(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    return [_interior_config(acceptance, seed, boundary, proxy_multiplier)]


def build_clt(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    return [_rru_clt_config(acceptance, seed, boundary, proxy_multiplier)]


def build_t5(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    return [_rru_clt_config(acceptance, seed, boundary, proxy_multiplier), _martingale_config(acceptance, seed)]


def build_t6(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    return [_interior_config(acceptance, seed, boundary, proxy_multiplier)]


def build_t8(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    return [
        _interior_config(acceptance, seed, boundary=False, y1_0=T8_START_MASS, y2_0=T8_START_MASS)
    ]


def build_t9(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    n, later_n = _t9_steps(acceptance.thresholds, acceptance.horizon)
    # started well below rho1 so Q(delta, n) keeps mass at moderate n
    return [
        _config(
            acceptance, seed, ModelKind.arru("fixed"), HIGH, LOW,
            policy=ThresholdPolicy.fixed(0.7, 0.3), extra_grid=[n, later_n], y1_0=100.0, y2_0=300.0,
        )
    ]


def _t9_steps(thresholds: Dict[str, float], horizon: int) -> Tuple[int, int]:
    """Diagnostic step n and the later step n + ceil(n s) at the s_delta midpoint"""
    n = int(required(thresholds, "n", SuiteId.T9))
    window = urn_service.s_delta_window(
        required(thresholds, "c1", SuiteId.T9), HIGH.support_high, required(thresholds, "delta", SuiteId.T9)
    )
    later_n = n + math.ceil(n * window.chosen)
    if later_n > horizon:
        raise ConfigurationError(f"T9 needs horizon >= {later_n}, got {horizon}")
    return n, later_n


def build_t10(acceptance: SuiteAcceptance, seed: int, proxy_multiplier: int, boundary: bool) -> List[RunConfig]:
    return [
        _config(acceptance, seed, ModelKind.arru("never-binding"), EQUAL, EQUAL, policy=ThresholdPolicy.fixed(1.0, 0.0)),
        _config(acceptance, seed, ModelKind.arru("interior"), HIGH, LOW, policy=ThresholdPolicy.fixed(0.7, 0.3)),
    ]


# ---------------------------------------------------------------- evaluators


def evaluate_t1(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    rows = []
    tolerance = threshold(spec, "tolerance")
    for i, config in enumerate(spec.configs):
        batch = runners.batch(config, spec.replications)
        target = _target(config)
        near = [float(abs(r.final_state.z - target) < tolerance) for r in batch]
        estimate = stats_service.moment_estimate(near)
        rows.append(
            make_row(
                spec, f"config{i}.near_limit_frequency", CriterionKind.STATISTICAL, Comparison.GE,
                estimate.mean, threshold(spec, "min_frequency"),
            )
        )
    return rows


def evaluate_t2(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    rows = []
    for i, config in enumerate(spec.configs):
        batch = runners.batch(config, spec.replications)
        target = _target(config)
        medians = [stats_service.median_abs_deviation(batch, n, target) for n in _t2_checkpoints(config.horizon)]
        decrease = min(a - b for a, b in zip(medians, medians[1:]))
        rows.append(
            make_row(spec, f"config{i}.median_decrease", CriterionKind.STATISTICAL, Comparison.GT, decrease, 0.0)
        )
        rows.append(
            make_row(
                spec, f"config{i}.final_median", CriterionKind.STATISTICAL, Comparison.LT,
                medians[-1], threshold(spec, "final_median"),
            )
        )
        rows.append(
            make_row(
                spec, f"config{i}.guard_violations", CriterionKind.EXACT, Comparison.EQ,
                float(sum(r.guard_violations for r in batch)), 0.0,
            )
        )
    return rows


def evaluate_t3(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    interior, spread_out = spec.configs
    batch = runners.batch(interior, spec.replications)
    horizon = interior.horizon
    concentration = stats_service.growth_rate_concentration(
        batch, horizon, interior.r1.mean, threshold(spec, "tolerance")
    )
    rows = [
        make_row(
            spec, "growth_rate_concentration", CriterionKind.STATISTICAL, Comparison.GE,
            concentration.mean, threshold(spec, "min_frequency"),
        )
    ]

    h = threshold(spec, "sup_h")
    rru_batch = runners.batch(spread_out, spec.replications)
    bound = urn_service.sup_deviation_bound(spread_out.y0, spread_out.reinforcement_high, h)
    frequency = stats_service.sup_deviation_probability(rru_batch, h)
    rows.append(
        make_row(spec, "sup_deviation_frequency", CriterionKind.STATISTICAL, Comparison.LE, frequency.lower(), bound)
    )

    # E[Y_i - Y_{i-1} | F_{i-1}] >= a min(y1_0, y2_0) / (y0 + (i - 1) b), within increment_se_max standard errors
    se_max = threshold(spec, "increment_se_max")
    for n in INCREMENT_STEPS:
        if n + 1 > horizon:
            continue
        estimate = stats_service.increment_mean(batch, n, "y")
        bound = urn_service.y_increment_lower_bound(
            n + 1, interior.reinforcement_low, interior.reinforcement_high, interior.y1_0, interior.y2_0
        )
        rows.append(
            make_row(
                spec, f"y_increment_n{n}", CriterionKind.STATISTICAL, Comparison.GE,
                estimate.mean + se_max * estimate.standard_error, bound,
            )
        )
    return rows


def evaluate_t4(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    config = spec.configs[0]
    batch = runners.batch(config, spec.replications)
    proxies = [stats_service.z_infinity_proxy(r, spec.proxy_multiplier) for r in batch]
    rho1, rho2 = config.limits()
    if rho1 == rho2:
        lo, hi = rho2 - 0.05, rho1 + 0.05
    else:
        lo, hi = rho2, rho1
    mass = stats_service.atom_scan(proxies, lo, hi, threshold(spec, "bin_width"))
    return [make_row(spec, "max_bin_mass", CriterionKind.STATISTICAL, Comparison.LT, mass, threshold(spec, "max_bin_mass"))]


def _clt_rows(
    spec: SuiteSpec, runners: Runners, which: CltStatistic, restrict_to_a_n: bool
) -> Tuple[List[ReportRow], List[TrajectoryRecord]]:
    config = spec.configs[0]
    batch = runners.batch(config, spec.replications)
    summary = stats_service.studentize(
        batch, config.r1.mean, config.r1.variance, config.r2.variance, which,
        multiplier=spec.proxy_multiplier, restrict_to_a_n=restrict_to_a_n,
    )
    studentized = summary.studentized()
    ks = stats_service.ks_distance(studentized).d if studentized else None
    rows = [make_row(spec, f"ks_{which.value}", CriterionKind.STATISTICAL, Comparison.LT, ks, threshold(spec, "ks_max"))]

    if "variance_ratio_max" in spec.thresholds:
        raw = summary.raw_statistics()
        ratio = None
        if len(raw) > 1:
            ratio = abs(float(np.var(raw, ddof=1)) / float(np.mean(summary.limiting_variances())) - 1.0)
        rows.append(
            make_row(
                spec, f"variance_ratio_{which.value}", CriterionKind.STATISTICAL, Comparison.LT,
                ratio, threshold(spec, "variance_ratio_max"),
            )
        )
    return rows, batch


def evaluate_t5(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    rows, _ = _clt_rows(spec, runners, CltStatistic.N1, restrict_to_a_n=False)
    # martingale null: the conditional increment of Z has mean 0 under equal point masses
    martingale = spec.configs[1]
    batch = runners.batch(martingale, int(threshold(spec, "increment_replications")))
    se_max = threshold(spec, "increment_se_max")
    for n in INCREMENT_STEPS:
        if n + 1 > martingale.horizon:
            continue
        estimate = stats_service.increment_mean(batch, n, "z")
        score = abs(estimate.mean) / estimate.standard_error if estimate.standard_error > 0 else abs(estimate.mean)
        rows.append(
            make_row(spec, f"increment_mean_n{n}", CriterionKind.STATISTICAL, Comparison.LT, score, se_max)
        )
    return rows


def evaluate_t6(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    rows, batch = _clt_rows(spec, runners, CltStatistic.N1, restrict_to_a_n=True)
    horizon = spec.configs[0].horizon
    early = stats_service.a_n_fraction(batch, horizon // 4).mean
    late = stats_service.a_n_fraction(batch, horizon).mean
    rows.append(
        make_row(
            spec, "a_n_fraction_drift", CriterionKind.STATISTICAL, Comparison.LT,
            abs(late - early), threshold(spec, "stabilization_max"),
        )
    )
    return rows


def evaluate_t7(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    rows, _ = _clt_rows(spec, runners, CltStatistic.Z, restrict_to_a_n=False)
    return rows


def evaluate_t8(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    config = spec.configs[0]
    batch = runners.batch(config, spec.replications)
    horizon = config.horizon
    rows = []
    for j in (1, 2, 4):
        curve = stats_service.harmonic_moment_curve(batch, j, pow2_grid(horizon))
        final = curve[-1].estimate.mean
        ratio = max(p.estimate.mean for p in curve) / final if final > 0 else None
        rows.append(
            make_row(
                spec, f"harmonic_ratio_j{j}", CriterionKind.STATISTICAL, Comparison.LE,
                ratio, threshold(spec, "harmonic_ratio_max"),
            )
        )

    band = stats_service.band_probability(batch, horizon, threshold(spec, "band_lo"), threshold(spec, "band_hi"))
    rows.append(make_row(spec, "band_probability", CriterionKind.STATISTICAL, Comparison.GE, band.mean, threshold(spec, "band_min")))

    growth = stats_service.linear_growth_probability(
        batch, horizon, threshold(spec, "growth_c1"), threshold(spec, "growth_big_c1")
    )
    rows.append(
        make_row(spec, "linear_growth_probability", CriterionKind.STATISTICAL, Comparison.GE, growth.mean, threshold(spec, "growth_min"))
    )
    return rows


def evaluate_t9(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    config = spec.configs[0]
    batch = runners.batch(config, spec.replications)
    n, _ = _t9_steps(spec.thresholds, config.horizon)
    rho1, _ = config.limits()
    window = urn_service.s_delta_window(threshold(spec, "c1"), config.reinforcement_high, threshold(spec, "delta"))
    diagnostic = stats_service.drift_diagnostic(batch, n, window.chosen, threshold(spec, "delta"), rho1)

    # a run where Q(delta, n) carries too little mass cannot show the drift and fails on q_mass
    return [
        make_row(
            spec, "q_mass", CriterionKind.STATISTICAL, Comparison.GT, diagnostic.q_mass.mean, threshold(spec, "q_regime")
        ),
        make_row(spec, "drift_on_q_upper", CriterionKind.STATISTICAL, Comparison.LT, diagnostic.lhs.upper(), 0.0),
        make_row(
            spec, "drift_off_q_lower", CriterionKind.STATISTICAL, Comparison.LT,
            diagnostic.complement.lower(), threshold(spec, "complement_max"),
        ),
    ]


def evaluate_t10(spec: SuiteSpec, runners: Runners) -> List[ReportRow]:
    never_binding, interior = spec.configs
    n0 = never_binding.horizon // 2
    runs = runners.coupled(never_binding, n0, spec.replications)
    diverged = sum(1 for run in runs if run.divergence_step is not None)
    mismatched = sum(
        1 for run in runs if [p.z for p in run.arru.grid] != [p.z for p in run.rru.grid]
    )
    rows = [
        make_row(spec, "never_binding.diverged", CriterionKind.EXACT, Comparison.EQ, float(diverged), 0.0),
        make_row(spec, "never_binding.path_mismatches", CriterionKind.EXACT, Comparison.EQ, float(mismatched), 0.0),
    ]

    runs = runners.coupled(interior, interior.horizon // 2, spec.replications)
    early = sum(
        1 for run in runs
        if run.divergence_step is not None
        and (run.first_suppression_step is None or run.divergence_step < run.first_suppression_step)
    )
    rows.append(make_row(spec, "interior.divergence_before_suppression", CriterionKind.EXACT, Comparison.EQ, float(early), 0.0))
    fraction = sum(1 for run in runs if run.divergence_step is not None) / len(runs)
    rows.append(make_row(spec, "interior.diverged_fraction", CriterionKind.STATISTICAL, Comparison.GE, fraction, 0.0, informational=True))
    return rows


class SuiteDefinition(NamedTuple):
    theorem_ref: str
    build: Callable[[SuiteAcceptance, int, int, bool], List[RunConfig]]
    evaluate: Callable[[SuiteSpec, Runners], List[ReportRow]]
    boundary_variant: bool


SUITES: Dict[SuiteId, SuiteDefinition] = {
    SuiteId.T1: SuiteDefinition("weak consistency of the urn proportion", build_t1, evaluate_t1, False),
    SuiteId.T2: SuiteDefinition("strong consistency: Z_inf in [rho2, rho1] a.s.", build_t2, evaluate_t2, False),
    SuiteId.T3: SuiteDefinition("Y_n / n converges a.s. to m*", build_t3, evaluate_t3, False),
    SuiteId.T4: SuiteDefinition("no atoms: P(Z_inf = x) = 0 inside (rho2, rho1)", build_t4, evaluate_t4, True),
    SuiteId.T5: SuiteDefinition("RRU mixture CLT for N1n / n", build_t5, evaluate_t5, True),
    SuiteId.T6: SuiteDefinition("ARRU mixture CLT on the sets A_n", build_t6, evaluate_t6, True),
    SuiteId.T7: SuiteDefinition("mixture CLT for Z_n", build_clt, evaluate_t7, True),
    SuiteId.T8: SuiteDefinition("bounded harmonic moments sup E[(n / Y_n)^j]", build_t8, evaluate_t8, False),
    SuiteId.T9: SuiteDefinition("negative drift of Delta_n on Q(delta, n)", build_t9, evaluate_t9, False),
    SuiteId.T10: SuiteDefinition("coupling: ARRU equals the forked RRU while indicators are 1", build_t10, evaluate_t10, False),
}


def suite_ids(selection: Sequence[str]) -> List[SuiteId]:
    """Resolve command-line suite names; 'all' expands to every suite"""
    if any(s == "all" for s in selection):
        return list(SuiteId)
    ids = []
    for name in selection:
        try:
            ids.append(SuiteId(name))
        except ValueError:
            raise ConfigurationError(f"unknown suite id '{name}'")
    return ids
