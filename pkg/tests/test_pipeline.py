import math

import numpy as np
import pytest

from reproduce_tables import TABLE1_RHOS, TABLE2_GRID, TABLE2_LAMBDAS
from src.models.belief import BeliefGrid
from src.models.config import CustomKernelSpec, ExperimentConfig, InventorySpec, RandomMdpSpec, SolverSettings
from src.services.environments import ORDER_COST_BASES, build_environment
from src.services.pipeline import analyze_mixing, simulate_instance, solve_instance, solve_mode_policies, stage
from src.services.regret import compute_lambda, lambda_inputs
from src.utils.errors import ConfigError, ConvergenceError, ModelError, StageError
from tests.conftest import SWITCHING_COST, SWITCHING_KERNEL_POST, SWITCHING_KERNEL_PRE


def switching_experiment(**changes):
    environment = CustomKernelSpec(SWITCHING_KERNEL_PRE, SWITCHING_KERNEL_POST, SWITCHING_COST, 0.99, 0.05)
    return ExperimentConfig(environment=environment, grid_size=51, n_episodes=20, horizon=60, **changes)


class TestStage:

    def test_wraps_package_errors(self):
        with pytest.raises(StageError) as excinfo:
            with stage('thresholds'):
                raise ModelError('bad')
        assert excinfo.value.stage == 'thresholds'
        assert isinstance(excinfo.value.cause, ModelError)

    def test_config_errors_pass_through(self):
        with pytest.raises(ConfigError):
            with stage('environment'):
                raise ConfigError('bad')

    def test_linear_algebra_errors_are_wrapped(self):
        with pytest.raises(StageError, match="stage 'mixing' failed"):
            with stage('mixing'):
                raise np.linalg.LinAlgError('singular')


class TestSolveInstance:

    def test_switching_instance(self):
        solved = solve_instance(switching_experiment())
        assert solved.lam == pytest.approx(20.0)
        np.testing.assert_array_equal(solved.policy_pre.action_of, [0, 0])
        np.testing.assert_array_equal(solved.policy_post.action_of, [1, 1])
        assert solved.table.values.shape == (51, 2)
        assert solved.iterations > 0
        assert set(solved.stationaries) == {(1, 1), (1, 2), (2, 1), (2, 2)}

    def test_rho_override(self):
        solved = solve_instance(switching_experiment(), rho=0.1)
        assert solved.rho == 0.1
        assert solved.lam == pytest.approx(10.0)

    def test_lambda_stage_is_named(self):
        kernel = np.ones((1, 2, 1)).tolist()
        config = ExperimentConfig(environment=CustomKernelSpec(kernel, kernel, [[1.0, 1.0]], 0.9, 0.1))
        with pytest.raises(StageError) as excinfo:
            solve_instance(config)
        assert excinfo.value.stage == 'lambda'

    def test_rule_evaluation(self):
        solved = solve_instance(switching_experiment(), evaluate_rule=True)
        assert solved.rule_table.values.shape == (51, 2)
        assert solved.rule_gap() <= 2 * BeliefGrid.uniform(51).interpolation_slack(solved.lam)
        assert solve_instance(switching_experiment()).rule_gap() is None

    def test_rule_evaluation_uses_eval_settings(self):
        config = switching_experiment(solver=SolverSettings(eval_max_iter=1))
        with pytest.raises(StageError) as excinfo:
            solve_instance(config, evaluate_rule=True)
        assert excinfo.value.stage == 'rule-evaluation'
        assert isinstance(excinfo.value.cause, ConvergenceError)

    def test_environment_stage_is_named(self):
        config = ExperimentConfig(environment=CustomKernelSpec([[[0.5]]], [[[1.0]]], [[0.0]], 0.9, 0.1))
        with pytest.raises(StageError) as excinfo:
            solve_instance(config)
        assert excinfo.value.stage == 'environment'


class TestDownstream:

    def test_simulate_instance(self):
        config = switching_experiment(master_seed=5)
        report = simulate_instance(config, solve_instance(config))
        assert report.n_episodes == 20
        assert report.horizon == 60
        assert report.master_seed == 5
        assert report.lam == pytest.approx(20.0)

    def test_analyze_mixing(self):
        solved = solve_instance(switching_experiment())
        reports = analyze_mixing(solved.mdp, solved.policy_pre, solved.policy_post, 25)
        assert sorted(reports) == [(1, 1), (1, 2), (2, 1), (2, 2)]
        assert all(report.profile.t_max == 25 for report in reports.values())


class TestExperimentSets:

    def test_lambda_rho_is_constant_over_the_sweep(self):
        # the mode policies and average costs do not depend on rho, so lambda * rho cannot either
        config = ExperimentConfig(environment=RandomMdpSpec(), rho_sweep=TABLE1_RHOS[:3])
        sides = []
        for rho in config.rhos:
            inputs, _ = lambda_inputs(build_environment(config.environment, rho), *self._policies(config, rho))
            assert inputs.rho == rho
            sides.append((inputs.numerator, inputs.denominator))
        assert sides[1] == sides[0]
        assert sides[2] == sides[0]

    def _policies(self, config, rho):
        mdp = build_environment(config.environment, rho)
        policy_pre, _, policy_post, _ = solve_mode_policies(mdp, config.solver)
        return policy_pre, policy_post

    def _inventory_lambda(self, capacity, lost_demand_cost, basis):
        spec = InventorySpec(capacity=capacity, lost_demand_cost=lost_demand_cost, order_cost_basis=basis)
        mdp = build_environment(spec)
        policy_pre, _, policy_post, _ = solve_mode_policies(mdp, ExperimentConfig(environment=spec).solver)
        inputs, _ = lambda_inputs(mdp, policy_pre, policy_post)
        return compute_lambda(inputs)

    @pytest.mark.slow
    @pytest.mark.parametrize('grid_index', range(len(TABLE2_GRID)))
    def test_inventory_lambda_matches_reference(self, grid_index):
        capacity, lost_demand_cost = TABLE2_GRID[grid_index]
        reference = TABLE2_LAMBDAS[grid_index]
        errors = {basis: abs(self._inventory_lambda(capacity, lost_demand_cost, basis) / reference - 1.0)
                  for basis in ORDER_COST_BASES}
        assert min(errors.values()) <= 0.10, errors
        assert errors['order'] <= 0.01, errors


@pytest.fixture(scope='module')
def random_mdp_sweep():
    config = ExperimentConfig(environment=RandomMdpSpec(), rho_sweep=TABLE1_RHOS, n_episodes=2000, master_seed=7)
    results = []
    for rho in config.rhos:
        solved = solve_instance(config, rho)
        results.append((solved, simulate_instance(config, solved)))
    return results


@pytest.mark.slow
class TestRandomMdpSweep:
    """The rho sweep runs from the largest change rate to the smallest."""

    def test_thresholds_rise_as_rho_falls(self, random_mdp_sweep):
        thresholds = [solved.rule.threshold for solved, _ in random_mdp_sweep]
        for larger_rho, smaller_rho in zip(thresholds, thresholds[1:]):
            assert np.all(larger_rho <= smaller_rho)

    def test_false_alarms_fall_with_rho(self, random_mdp_sweep):
        reports = [report for _, report in random_mdp_sweep]
        for larger_rho, smaller_rho in zip(reports, reports[1:]):
            spread = 3.0 * np.hypot(larger_rho.pfa_stderr, smaller_rho.pfa_stderr)
            assert larger_rho.pfa >= smaller_rho.pfa - spread

    def test_costs_grow_with_the_horizon(self, random_mdp_sweep):
        reports = [report for _, report in random_mdp_sweep]
        assert [report.horizon for report in reports] == [math.ceil(2.0 / rho) for rho in TABLE1_RHOS]
        for larger_rho, smaller_rho in zip(reports, reports[1:]):
            assert larger_rho.mean_cost_mo < smaller_rho.mean_cost_mo
            assert larger_rho.mean_cost_cd < smaller_rho.mean_cost_cd

    def test_detection_stays_close_to_mode_observation(self, random_mdp_sweep):
        for _, report in random_mdp_sweep:
            assert report.mean_cost_cd <= 1.05 * report.mean_cost_mo
