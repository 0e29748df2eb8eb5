"""
Tests for trajectory execution, crossings, coupling and seeded batches
Test cases: SIM-001 to SIM-029
"""
import importlib
import math
from collections import Counter
from typing import Dict

import numpy as np
import pytest

from urnlab.core.errors import BatchAbortedError, InvalidInputError, NumericalError
from urnlab.models import INF, ModelKind, ReinforcementSpec, ThresholdPolicy, linear_grid
from urnlab.services import simulation_service
from urnlab.services.simulation_service import detect_crossings, growth_ratio
from urnlab.services.streams import ReplicationStreams

# the package re-exports the singleton under the module name
simulation_module = importlib.import_module("urnlab.services.simulation_service")


def enumerate_final_z(y1: float, y2: float, steps: int, rho1: float, rho2: float, d1: float, d2: float) -> Dict:
    """Exact law of Z after `steps` draws with point-mass reinforcements, by exhaustive enumeration"""
    law: Dict[float, float] = {}

    def walk(a: float, b: float, k: int, p: float) -> None:
        z = a / (a + b)
        if k == steps:
            key = round(z, 12)
            law[key] = law.get(key, 0.0) + p
            return
        w1, w2 = int(z <= rho1), int(z >= rho2)
        walk(a + d1 * w1, b, k + 1, p * z)
        walk(a, b + d2 * w2, k + 1, p * (1.0 - z))

    walk(y1, y2, 0, 1.0)
    return law


def assert_matches_law(batch, law: Dict[float, float]) -> None:
    counts = Counter(round(r.final_state.z, 12) for r in batch)
    total = len(batch)
    assert set(counts) <= set(law)
    for z, p in law.items():
        se = math.sqrt(p * (1 - p) / total)
        assert abs(counts.get(z, 0) / total - p) <= 4 * se + 1e-12, f"z={z}"


def naive_crossings(z, d, u):
    out = []
    tau_prev = -1
    while True:
        t = next((n for n in range(tau_prev + 1, len(z)) if z[n] > u), None)
        if t is None:
            return out
        tau = next((n for n in range(t + 1, len(z)) if z[n] < d), None)
        out.append((t, INF if tau is None else tau))
        if tau is None:
            return out
        tau_prev = tau


@pytest.mark.unit
class TestRunTrajectory:
    """Test suite for single replications"""

    def test_point_masses_add_exactly(self, make_config):
        """SIM-001: RRU with d1 = d2 = c ends at y0 + horizon * c"""
        c = ReinforcementSpec.point_mass(2.0)
        record = simulation_service.run_trajectory(make_config(r1=c, r2=c, horizon=50))
        assert record.final_state.y == 2.0 + 50 * 2.0
        assert record.reinforced_steps == 50

    def test_zero_horizon_records_initial_state(self, make_config):
        """SIM-002: horizon 0 keeps only the initial state"""
        record = simulation_service.run_trajectory(make_config(horizon=0))
        assert record.steps() == [0]
        assert record.final_state.n == 0
        assert record.final_state.z == 0.5

    def test_default_grid_is_pow2_plus_horizon(self, make_config):
        """SIM-003: record grid defaults to {0, 1, 2, 4, ...} u {horizon}"""
        record = simulation_service.run_trajectory(make_config(horizon=1000))
        assert record.steps() == [0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000]

    def test_same_seed_same_bytes(self, make_config):
        """SIM-004: (seed, replication_index) determines every recorded field"""
        config = make_config(horizon=300, seed=42, replication_index=3)
        first = simulation_service.run_trajectory(config)
        second = simulation_service.run_trajectory(config)
        assert first.model_dump_json() == second.model_dump_json()
        other = simulation_service.run_trajectory(config.model_copy(update={"replication_index": 4}))
        assert other.model_dump_json() != first.model_dump_json()

    def test_mass_is_monotone_and_bounded_below(self, make_config, high_uniform, low_uniform):
        """SIM-005: Y is nondecreasing and Y_H >= y0 + a * reinforced steps"""
        config = make_config(
            model=ModelKind.arru("fixed"), r1=high_uniform, r2=low_uniform, horizon=500,
            policy=ThresholdPolicy.fixed(0.6, 0.4), record_grid=linear_grid(500, 1),
        )
        record = simulation_service.run_trajectory(config)
        ys = [p.y for p in record.grid]
        assert all(b >= a for a, b in zip(ys, ys[1:]))
        assert record.final_state.y >= config.y0 + config.reinforcement_low * record.reinforced_steps

    def test_in_a_n_matches_recorded_values(self, make_config):
        """SIM-006: in_A_n follows z, y, alpha, C and the declared limits"""
        config = make_config(
            model=ModelKind.mrru(0.7, 0.3), horizon=400, record_grid=linear_grid(400, 7), a_n_alpha=0.3, a_n_c=0.5,
        )
        record = simulation_service.run_trajectory(config)
        for p in record.grid:
            margin = 0.5 * p.y ** -0.3
            assert p.in_a_n == int(0.3 + margin < p.z < 0.7 - margin)

    def test_indicators_follow_thresholds(self, make_config):
        """SIM-007: recorded w1, w2 are the indicators at the recorded state"""
        config = make_config(model=ModelKind.mrru(0.55, 0.45), horizon=200, record_grid=linear_grid(200, 1))
        record = simulation_service.run_trajectory(config)
        for p in record.grid:
            assert (p.w1, p.w2) == (int(p.z <= 0.55), int(p.z >= 0.45))
            assert (p.rho1_hat, p.rho2_hat) == (0.55, 0.45)

    def test_extension_keeps_horizon_record(self, make_config, high_uniform, low_uniform):
        """SIM-008: extending a run leaves grid and final state unchanged"""
        config = make_config(
            model=ModelKind.arru("adaptive"), r1=high_uniform, r2=low_uniform, horizon=256,
            policy=ThresholdPolicy.adaptive(2.0, 1.0), seed=9,
        )
        plain = simulation_service.run_trajectory(config)
        extended = simulation_service.run_trajectory(config.model_copy(update={"extension_multiplier": 4}))
        assert extended.grid == plain.grid
        assert extended.final_state == plain.final_state
        assert plain.z_extended is None
        assert 0.0 < extended.z_extended < 1.0

    def test_guard_active_above_threshold(self, make_config):
        """SIM-009: with Y above b (1 - eps) / eps the guard is checked at every step"""
        config = make_config(y1_0=50.0, y2_0=50.0, horizon=300)
        record = simulation_service.run_trajectory(config)
        assert record.guard_checks == 300
        assert record.guard_violations == 0

    def test_non_finite_state_aborts_with_step(self, make_config):
        """SIM-010: overflowing masses raise NumericalError carrying the step"""
        huge = ReinforcementSpec.point_mass(1e308)
        with pytest.raises(NumericalError) as exc_info:
            simulation_service.run_trajectory(make_config(r1=huge, r2=huge, horizon=50))
        assert exc_info.value.step >= 2

    def test_max_abs_deviation(self, make_config):
        """SIM-011: max |Z_n - Z_0| equals the maximum over a full grid"""
        config = make_config(horizon=300, record_grid=linear_grid(300, 1))
        record = simulation_service.run_trajectory(config)
        expected = max(abs(p.z - record.grid[0].z) for p in record.grid)
        assert record.max_abs_deviation == expected


@pytest.mark.unit
class TestEnumerationOracle:
    """Test suite comparing simulated laws of Z_n with exhaustive enumeration"""

    def test_two_step_rru(self, make_config):
        """SIM-012: RRU, unit point masses, two steps: Z_2 uniform on {1/4, 1/2, 3/4}"""
        one = ReinforcementSpec.point_mass(1.0)
        law = enumerate_final_z(1.0, 1.0, 2, 1.0, 0.0, 1.0, 1.0)
        assert law == pytest.approx({0.75: 1 / 3, 0.5: 1 / 3, 0.25: 1 / 3})
        batch = simulation_service.run_batch(make_config(r1=one, r2=one, horizon=2, seed=5), 3000).records
        assert_matches_law(batch, law)

    def test_three_step_mrru_with_suppression(self, make_config):
        """SIM-013: MRRU(0.6, 0.4), unequal point masses, three steps"""
        config = make_config(
            model=ModelKind.mrru(0.6, 0.4),
            r1=ReinforcementSpec.point_mass(2.0),
            r2=ReinforcementSpec.point_mass(1.0),
            horizon=3,
            seed=6,
        )
        law = enumerate_final_z(1.0, 1.0, 3, 0.6, 0.4, 2.0, 1.0)
        assert sum(law.values()) == pytest.approx(1.0)
        batch = simulation_service.run_batch(config, 3000).records
        assert_matches_law(batch, law)

    @pytest.mark.slow
    def test_three_step_rru_large_sample(self, make_config):
        """SIM-014: three-step RRU against enumeration at R = 10^5"""
        one = ReinforcementSpec.point_mass(1.0)
        law = enumerate_final_z(1.0, 1.0, 3, 1.0, 0.0, 1.0, 1.0)
        batch = simulation_service.run_batch(make_config(r1=one, r2=one, horizon=3, seed=8), 100_000).records
        assert_matches_law(batch, law)


@pytest.mark.unit
class TestCrossings:
    """Test suite for up-cross / down-cross detection"""

    def test_simple_path(self):
        """SIM-015: [0.5, 0.7, 0.3] with d = 0.4, u = 0.6 gives t0 = 1, tau0 = 2"""
        records = detect_crossings([0.5, 0.7, 0.3], 0.4, 0.6)
        assert [(r.j, r.t_j, r.tau_j) for r in records] == [(0, 1, 2)]

    def test_path_below_u_has_no_crossings(self):
        """SIM-016: a path that never exceeds u yields an empty list"""
        assert detect_crossings(list(np.linspace(0.1, 0.59, 50)), 0.4, 0.6) == []

    def test_open_down_cross_is_infinite(self):
        """SIM-017: an up-cross never followed by a down-cross has tau = inf"""
        records = detect_crossings([0.5, 0.61, 0.5, 0.45], 0.4, 0.6)
        assert [(r.t_j, r.tau_j) for r in records] == [(1, INF)]

    def test_strict_inequalities(self):
        """SIM-018: touching u or d is not a crossing"""
        assert detect_crossings([0.6, 0.6, 0.4], 0.4, 0.6) == []

    def test_invalid_levels_rejected(self):
        """SIM-019: d must be < u inside (0, 1)"""
        with pytest.raises(InvalidInputError):
            detect_crossings([0.5], 0.6, 0.4)

    def test_random_path_matches_naive_scan(self):
        """SIM-020: 10^4-step random path agrees with a double-loop reference"""
        rng = np.random.default_rng(2024)
        z = 1.0 / (1.0 + np.exp(-np.cumsum(rng.normal(0.0, 0.3, 10_000))))
        got = [(r.t_j, r.tau_j) for r in detect_crossings(z.tolist(), 0.4, 0.6)]
        assert got == naive_crossings(z.tolist(), 0.4, 0.6)
        assert len(got) > 3

    def test_trajectory_crossings_obey_definitions_and_growth(self, make_config):
        """SIM-021: recorded crossings satisfy the ordering, levels and geometric growth of Y"""
        config = make_config(
            model=ModelKind.rru(), horizon=2000, record_grid=linear_grid(2000, 1), y1_0=1.0, y2_0=1.0,
            crossing_d=0.45, crossing_u=0.55, seed=12,
        )
        ratio = growth_ratio(0.45, 0.55)
        for r in range(5):
            record = simulation_service.run_trajectory(config.model_copy(update={"replication_index": r}))
            z = [p.z for p in record.grid]
            assert [(c.t_j, c.tau_j) for c in record.crossings] == naive_crossings(z, 0.45, 0.55)
            for prev, cur in zip(record.crossings, record.crossings[1:]):
                assert prev.t_j < prev.tau_j < cur.t_j
                assert cur.y_at_t >= ratio * prev.y_at_t * (1 - 1e-12)


@pytest.mark.unit
class TestCoupling:
    """Test suite for the ARRU / forked RRU coupling"""

    def test_never_binding_thresholds_never_diverge(self, make_config):
        """SIM-022: fixed(1, 0) keeps both processes identical"""
        config = make_config(model=ModelKind.arru("never"), horizon=300, policy=ThresholdPolicy.fixed(1.0, 0.0))
        run = simulation_service.run_coupled(config, 100)
        assert run.divergence_step is None
        assert [p.z for p in run.arru.grid] == [p.z for p in run.rru.grid]
        assert run.arru.final_state.y == run.rru.final_state.y

    def test_divergence_matches_scalar_replay(self, make_config, high_uniform, low_uniform):
        """SIM-023: divergence is never before suppression and matches an independent replay"""
        config = make_config(
            model=ModelKind.arru("interior"), r1=high_uniform, r2=low_uniform, horizon=400,
            policy=ThresholdPolicy.fixed(0.55, 0.45), seed=17,
        )
        n0 = 50
        for rep in range(5):
            cfg = config.model_copy(update={"replication_index": rep})
            run = simulation_service.run_coupled(cfg, n0)

            streams = ReplicationStreams(cfg.seed, rep, cfg.r1, cfg.r2, block_size=7)
            a1, a2 = cfg.y1_0, cfg.y2_0
            b1 = b2 = None
            divergence = None
            for n in range(cfg.horizon):
                if n == n0:
                    b1, b2 = a1, a2
                u, d1, d2 = streams.next_step()
                z = a1 / (a1 + a2)
                w1, w2 = int(z <= 0.55), int(z >= 0.45)
                if u <= z:
                    a1 += d1 * w1
                else:
                    a2 += d2 * w2
                if b1 is not None:
                    if u <= b1 / (b1 + b2):
                        b1 += d1
                    else:
                        b2 += d2
                    if divergence is None and (a1, a2) != (b1, b2):
                        divergence = n + 1

            assert run.divergence_step == divergence
            if run.divergence_step is not None:
                assert run.first_suppression_step is not None
                assert run.divergence_step >= run.first_suppression_step
            assert run.arru.final_state.y1 == a1
            assert run.rru.final_state.y1 == b1

    def test_preconditions(self, make_config):
        """SIM-024: coupling needs an ARRU and n0 < horizon"""
        with pytest.raises(InvalidInputError):
            simulation_service.run_coupled(make_config(horizon=10), 5)
        arru = make_config(model=ModelKind.arru("x"), horizon=10)
        with pytest.raises(InvalidInputError):
            simulation_service.run_coupled(arru, 10)


@pytest.mark.unit
class TestThresholdPolicies:
    """Test suite for threshold emission and estimates inside ARRU runs"""

    def test_estimates_recorded_on_grid(self, make_config, high_uniform, low_uniform):
        """SIM-025: ARRU grid points carry the running means; RRU points carry none"""
        config = make_config(
            model=ModelKind.arru("adaptive"), r1=high_uniform, r2=low_uniform, horizon=400,
            policy=ThresholdPolicy.adaptive(2.0, 1.0), record_grid=linear_grid(400, 1), seed=4,
        )
        record = simulation_service.run_trajectory(config)
        first = record.grid[0]
        assert (first.m1_hat, first.m2_hat) == (None, None)
        last = record.grid[-1]
        assert 1.5 <= last.m1_hat <= 2.5
        assert 0.5 <= last.m2_hat <= 1.5
        # once both colours are observed, the thresholds are the maps at the recorded means
        for p in record.grid:
            if p.m1_hat is not None and p.m2_hat is not None:
                assert (p.rho1_hat, p.rho2_hat) == config.policy.mean_map(p.m1_hat, p.m2_hat)

        plain = simulation_service.run_trajectory(make_config(horizon=50))
        assert all(p.m1_hat is None and p.m2_hat is None for p in plain.grid)

    def test_estimates_are_consistent(self, make_config, high_uniform, low_uniform):
        """SIM-026: with interior thresholds both estimates end within 0.05 of the true means"""
        config = make_config(
            model=ModelKind.arru("adaptive"), r1=high_uniform, r2=low_uniform, horizon=5000,
            policy=ThresholdPolicy.adaptive(2.0, 1.0), seed=12,
        )
        records = simulation_service.run_batch(config, 40).records
        assert all(abs(r.point_at(5000).m1_hat - 2.0) < 0.05 for r in records)
        assert all(abs(r.point_at(5000).m2_hat - 1.0) < 0.05 for r in records)

    @pytest.mark.slow
    def test_estimates_are_consistent_at_long_horizon(self, make_config, high_uniform, low_uniform):
        """SIM-027: at n = 10^5, |m_hat - m| < 0.05 for both colours in at least 99% of replications"""
        config = make_config(
            model=ModelKind.arru("adaptive"), r1=high_uniform, r2=low_uniform, horizon=100_000,
            policy=ThresholdPolicy.adaptive(2.0, 1.0), seed=12,
        )
        records = simulation_service.run_batch(config, 100).records
        close = [
            abs(r.point_at(100_000).m1_hat - 2.0) < 0.05 and abs(r.point_at(100_000).m2_hat - 1.0) < 0.05
            for r in records
        ]
        assert sum(close) / len(close) >= 0.99

    def test_out_of_support_reinforcement_rejected(self, make_config, monkeypatch):
        """SIM-028: an applied reinforcement outside [a, b] stops an ARRU run"""
        monkeypatch.setattr(ReplicationStreams, "next_step", lambda self: (0.1, 5.0, 5.0))
        config = make_config(model=ModelKind.arru("fixed"), horizon=10, policy=ThresholdPolicy.fixed(0.7, 0.3))
        with pytest.raises(InvalidInputError):
            simulation_service.run_trajectory(config)

    def test_adversarial_excursions_concentrate(self, make_config, high_uniform, low_uniform):
        """SIM-029: excursions outside [rho_min, rho_max] at step n occur with frequency exp(-c n) within 4 SE"""
        policy = ThresholdPolicy.adversarial(0.7, 0.3, c_rho=0.01)
        config = make_config(
            model=ModelKind.arru("adversarial"), r1=high_uniform, r2=low_uniform, horizon=300,
            policy=policy, record_grid=linear_grid(300, 50), seed=21,
        )
        records = simulation_service.run_batch(config, 400).records
        for n in linear_grid(300, 50):
            points = [r.point_at(n) for r in records]
            frequency = sum(p.rho1_hat > policy.rho_max or p.rho2_hat < policy.rho_min for p in points) / len(points)
            p_excursion = math.exp(-policy.c_rho * n)
            se = math.sqrt(p_excursion * (1.0 - p_excursion) / len(points))
            assert frequency <= p_excursion + 4.0 * se
            assert abs(frequency - p_excursion) <= 4.0 * se + 1e-12
        assert all(r.clamp_count == 0 for r in records)


@pytest.mark.unit
class TestStreams:
    """Test suite for per-replication substreams"""

    @pytest.mark.parametrize(
        "law",
        [ReinforcementSpec.uniform(1.0, 3.0), ReinforcementSpec.two_point(1.0, 2.0), ReinforcementSpec.scaled_beta(1, 2, 2, 3)],
        ids=["uniform", "two-point", "beta"],
    )
    def test_block_size_does_not_change_draws(self, law):
        """STR-001: positional draws are identical for any refill size"""
        small = ReplicationStreams(5, 2, law, law, block_size=3)
        large = ReplicationStreams(5, 2, law, law, block_size=4096)
        assert [small.next_step() for _ in range(50)] == [large.next_step() for _ in range(50)]
        assert [small.next_aux() for _ in range(10)] == [large.next_aux() for _ in range(10)]

    def test_replications_have_distinct_streams(self):
        """STR-002: different replication indices read different uniforms"""
        law = ReinforcementSpec.uniform(1.0, 3.0)
        assert ReplicationStreams(5, 0, law, law).next_step() != ReplicationStreams(5, 1, law, law).next_step()


class TestRunBatch:
    """Test suite for seeded batches"""

    @pytest.mark.unit
    def test_manifest_lists_replications(self, make_config):
        """BAT-001: replications = 3 gives records for r in {0, 1, 2}"""
        result = simulation_service.run_batch(make_config(horizon=20, seed=7), 3)
        assert [r.replication_index for r in result.records] == [0, 1, 2]
        assert result.manifest.replication_indices == [0, 1, 2]
        assert result.manifest.replications == 3
        assert result.authoritative
        assert len(result.manifest.config_hash) == 64

    @pytest.mark.integration
    def test_parallelism_does_not_change_output(self, make_config):
        """BAT-002: parallelism 1 and 4 give identical ordered records"""
        config = make_config(horizon=200, seed=7)
        serial = simulation_service.run_batch(config, 8, parallelism=1)
        parallel = simulation_service.run_batch(config, 8, parallelism=4)
        assert [r.model_dump_json() for r in serial.records] == [r.model_dump_json() for r in parallel.records]
        assert serial.manifest.config_hash == parallel.manifest.config_hash

    @pytest.mark.unit
    def test_worker_failure_returns_partial_results(self, make_config, monkeypatch):
        """BAT-003: a failing replication aborts the batch with non-authoritative partial results"""
        real = simulation_module._simulate

        def flaky(config):
            if config.replication_index == 2:
                raise RuntimeError("boom")
            return real(config)

        monkeypatch.setattr(simulation_module, "_simulate", flaky)
        with pytest.raises(BatchAbortedError) as exc_info:
            simulation_service.run_batch(make_config(horizon=10), 4)
        partial = exc_info.value.partial
        assert [r.replication_index for r in partial.records] == [0, 1]
        assert not partial.authoritative

    @pytest.mark.unit
    def test_zero_replications_rejected(self, make_config):
        """BAT-004: replications must be >= 1"""
        with pytest.raises(InvalidInputError):
            simulation_service.run_batch(make_config(horizon=10), 0)

    @pytest.mark.slow
    def test_long_mixed_run_has_no_guard_violations(self, make_config, high_uniform, low_uniform):
        """BAT-005: 10^6 steps of an adaptive ARRU finish without guard or growth violations"""
        config = make_config(
            model=ModelKind.arru("adaptive"), r1=high_uniform, r2=low_uniform, horizon=1_000_000,
            policy=ThresholdPolicy.adaptive(2.0, 1.0),
        )
        record = simulation_service.run_trajectory(config)
        assert record.guard_violations == 0
        assert record.guard_checks > 0
