"""Tests for the coupled episode simulator and the Monte Carlo estimators."""

import math

import numpy as np
import pandas as pd
import pytest

from src.models.belief import BeliefDynamics, BeliefGrid
from src.models.config import RandomMdpSpec
from src.models.mdp import DeterministicPolicy
from src.services.environments import gen_random_mdp
from src.services.mdp_core import value_iteration
from src.services.qcd_solver import initial_value, solve_fixed_point
from src.services.sim_harness import (
    EpisodeSimulator,
    estimate_approx_regret_empirical,
    estimate_exact_regret,
    estimate_regret_to_go,
    run_episode,
    run_experiment,
    sample_change_point,
    simulate_episodes,
    simulate_indexed,
    welch_statistic,
)
from src.utils.errors import ModelError, TruncationError
from tests.conftest import make_setup


def frame(records):
    return pd.DataFrame([record.to_dict() for record in records])


def within(value, target, stderr, sigmas=4.0):
    return abs(value - target) <= sigmas * stderr


class TestChangePoint:

    def test_geometric_moments(self):
        rng = np.random.default_rng(123)
        draws = np.array([sample_change_point(0.1, rng) for _ in range(200_000)])
        assert draws.min() >= 1
        assert within(draws.mean(), 10.0, math.sqrt(90.0 / draws.size))

    @pytest.mark.parametrize("rho", [0.0, -0.1, 1.5])
    def test_rejects_invalid_rate(self, rho):
        with pytest.raises(ModelError):
            sample_change_point(rho, np.random.default_rng(0))

    def test_certain_change(self):
        assert sample_change_point(1.0, np.random.default_rng(0)) == 1


class TestCoupling:

    def test_no_switch_before_change_costs_the_same(self, switching_mdp, switching_policies):
        setup = make_setup(switching_mdp, *switching_policies, lam=20.0, threshold=1.0)
        record = run_episode(setup, change_point=65, horizon=60, rng=np.random.default_rng(0))

        assert record.truncated
        assert record.switch_time == 60
        assert record.discounted_cost_cd == record.discounted_cost_mo
        assert record.discounted_regret == 0.0

    def test_identical_policies_never_regret(self, random_mdp):
        policy = DeterministicPolicy(np.zeros(random_mdp.n_states, dtype=int))
        setup = make_setup(random_mdp, policy, policy, lam=5.0, threshold=0.0)
        for seed in range(5):
            record = run_episode(setup, change_point=7, horizon=40, rng=np.random.default_rng(seed))
            assert record.switch_time == 0
            assert record.false_alarm
            assert record.discounted_cost_cd == record.discounted_cost_mo
            assert record.discounted_regret == 0.0

    def test_oracle_has_zero_regret(self, switching_setup):
        assert estimate_exact_regret(switching_setup, 50, 80, master_seed=4, oracle=True) == (0.0, 0.0)

    def test_episode_accounting(self, switching_setup):
        for record in simulate_episodes(switching_setup, 40, 120, master_seed=9):
            assert record.delay == max(record.switch_time - record.change_point, 0)
            assert record.undershoot == max(record.change_point - record.switch_time, 0)
            assert record.false_alarm == (record.switch_time < record.change_point)
            assert record.overshoot_g == record.delay + switching_setup.lam * record.false_alarm
            assert record.discounted_regret == pytest.approx(
                record.discounted_cost_cd - record.discounted_cost_mo, abs=1e-9)

    @pytest.mark.parametrize("change_point, horizon, expected", [(10, 14, 4.0), (65, 60, 20.0)])
    def test_overshoot_sums_stage_terms_of_a_truncated_run(self, switching_mdp, switching_policies,
                                                           change_point, horizon, expected):
        setup = make_setup(switching_mdp, *switching_policies, lam=20.0, threshold=1.0)
        record = run_episode(setup, change_point=change_point, horizon=horizon, rng=np.random.default_rng(1))
        assert record.truncated
        assert record.overshoot_g == expected

    def test_detection_only_keeps_overshoot(self, switching_setup):
        full = simulate_episodes(switching_setup, 25, 120, master_seed=6)
        detection = simulate_episodes(switching_setup, 25, 120, master_seed=6, detection_only=True)
        assert [r.overshoot_g for r in detection] == [r.overshoot_g for r in full]

    def test_rejects_empty_horizon(self, switching_setup):
        with pytest.raises(ModelError):
            EpisodeSimulator(switching_setup, 0)


class TestReproducibility:

    def test_same_seed_same_report(self, switching_setup):
        first = run_experiment(switching_setup, 30, 100, master_seed=11)
        second = run_experiment(switching_setup, 30, 100, master_seed=11)
        assert first == second

    def test_single_episode_report(self, switching_setup):
        report = run_experiment(switching_setup, 1, 100, master_seed=2)
        record = simulate_indexed(EpisodeSimulator(switching_setup, 100), 2, 0)

        assert report.mean_cost_cd == record.discounted_cost_cd
        assert report.mean_cost_mo == record.discounted_cost_mo
        assert report.stderr_cost_cd == 0.0
        assert report.pfa == float(record.false_alarm)
        assert math.isnan(report.t_stat)
        assert report.episodes == ()

    def test_worker_count_does_not_change_records(self, switching_setup):
        serial = simulate_episodes(switching_setup, 30, 100, master_seed=5, workers=1)
        parallel = simulate_episodes(switching_setup, 30, 100, master_seed=5, workers=3)
        pd.testing.assert_frame_equal(frame(serial), frame(parallel))

    def test_keep_episodes(self, switching_setup):
        report = run_experiment(switching_setup, 12, 100, master_seed=1, keep_episodes=True)
        assert [record.index for record in report.episodes] == list(range(12))

    def test_no_episodes(self, switching_setup):
        with pytest.raises(ModelError, match="no episodes requested"):
            run_experiment(switching_setup, 0, 100, master_seed=1)


class TestDetection:

    def test_detection_only_records_no_costs(self, switching_setup):
        records = simulate_episodes(switching_setup, 10, 100, master_seed=3, detection_only=True)
        assert all(math.isnan(record.discounted_cost_cd) for record in records)
        full = simulate_episodes(switching_setup, 10, 100, master_seed=3)
        assert [r.switch_time for r in records] == [r.switch_time for r in full]

    def test_undershoot_matches_false_alarm_rate(self, switching_setup):
        # Gamma is memoryless: E[(Gamma - tau)+] = P(tau < Gamma) / rho
        records = frame(simulate_episodes(switching_setup, 2000, 200, master_seed=21, detection_only=True))
        y = records["undershoot"] - records["false_alarm"].astype(float) / switching_setup.rho
        assert within(y.mean(), 0.0, y.sem())


class TestRegretEstimators:

    def _random_setup(self):
        mdp = gen_random_mdp(RandomMdpSpec(n_states=3, n_actions=2, seed=3, rho=0.05, discount=0.95))
        policy_pre, _ = value_iteration(mdp.kernel_pre, mdp.stage_cost, mdp.discount)
        policy_post, _ = value_iteration(mdp.kernel_post, mdp.stage_cost_post, mdp.discount)
        return make_setup(mdp, policy_pre, policy_post, lam=10.0)

    def test_regret_to_go_agrees_with_exact_regret(self):
        setup = self._random_setup()
        exact, exact_se = estimate_exact_regret(setup, 1000, 200, master_seed=8)
        to_go, to_go_se = estimate_regret_to_go(setup, 1000, 200, master_seed=8)
        assert within(exact, to_go, math.hypot(exact_se, to_go_se))

    def test_regret_to_go_is_zero_when_nothing_happens(self, switching_mdp, switching_policies):
        setup = make_setup(switching_mdp, *switching_policies, lam=20.0, threshold=1.0)
        record = run_episode(setup, change_point=100, horizon=50, rng=np.random.default_rng(0),
                             regret_to_go=True)
        assert record.regret_to_go == 0.0

    def test_truncated_runs_are_rejected(self, switching_mdp, switching_policies):
        setup = make_setup(switching_mdp, *switching_policies, lam=20.0, threshold=1.0)
        report = run_experiment(setup, 20, 10, master_seed=0)
        with pytest.raises(TruncationError):
            estimate_approx_regret_empirical(report, 20.0, 0.0)

    def test_free_false_alarms(self, switching_mdp, switching_policies):
        setup = make_setup(switching_mdp, *switching_policies, lam=0.0, threshold=0.0)
        report = run_experiment(setup, 50, 20, master_seed=0)
        assert report.pfa == 1.0
        assert estimate_approx_regret_empirical(report, 0.0, 0.0) == (0.0, True)

    @pytest.mark.slow
    def test_simulated_detection_cost_matches_dp_value(self, switching_mdp, switching_policies):
        lam = 20.0
        setup = make_setup(switching_mdp, *switching_policies, lam=lam)
        grid = BeliefGrid.uniform(101)
        table, _ = solve_fixed_point(BeliefDynamics.from_policy(switching_mdp, switching_policies[0]), lam, grid)
        dp_value = initial_value(table, setup.initial_dist)

        report = run_experiment(setup, 4000, 400, master_seed=17, detection_only=True)
        _, consistent = estimate_approx_regret_empirical(report, lam, dp_value,
                                                         slack=2 * grid.interpolation_slack(lam))
        assert consistent


class TestWelch:

    def test_matches_textbook_formula(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        b = np.array([2.0, 4.0, 6.0])
        t_stat, df = welch_statistic(a, b)
        va, vb = a.var(ddof=1) / 4, b.var(ddof=1) / 3
        assert t_stat == pytest.approx((a.mean() - b.mean()) / math.sqrt(va + vb))
        assert df == pytest.approx((va + vb) ** 2 / (va ** 2 / 3 + vb ** 2 / 2))

    def test_undefined_cases(self):
        assert all(math.isnan(v) for v in welch_statistic([1.0], [2.0, 3.0]))
        assert all(math.isnan(v) for v in welch_statistic([1.0, 1.0], [1.0, 1.0]))
        assert all(math.isnan(v) for v in welch_statistic([1.0, math.nan], [1.0, 2.0]))
