"""Solve, analyze and simulate pipelines shared by every command.

Each numerical step runs inside a named stage; a failure surfaces as
StageError carrying the stage name and the original error.
"""

import logging
from contextlib import contextmanager

import numpy as np

from src.models.belief import BeliefDynamics, BeliefGrid
from src.models.simulation import SolvedInstance
from src.services.chain_analysis import verify_mixing_bound
from src.services.environments import build_environment
from src.services.mdp_core import mode_chain, value_iteration
from src.services.qcd_solver import evaluate_switch_rule, extract_thresholds, solve_fixed_point
from src.services.regret import compute_lambda, lambda_inputs
from src.services.sim_harness import run_experiment
from src.utils.errors import ConfigError, StageError, SwitchingError

logger = logging.getLogger(__name__)


@contextmanager
def stage(name):
    try:
        yield
    except ConfigError:
        raise
    except (SwitchingError, np.linalg.LinAlgError) as exc:
        logger.error("stage '%s' failed: %s", name, exc)
        raise StageError(name, exc) from exc


def solve_mode_policies(mdp, settings):
    """pi1 and pi2 by value iteration on each mode's kernel and cost."""
    policy_pre, values_pre = value_iteration(
        mdp.kernel_pre, mdp.stage_cost, mdp.discount, settings.vi_tol, settings.vi_max_iter
    )
    policy_post, values_post = value_iteration(
        mdp.kernel_post, mdp.stage_cost_post, mdp.discount, settings.vi_tol, settings.vi_max_iter
    )
    return policy_pre, values_pre, policy_post, values_post


def solve_instance(config, rho=None, evaluate_rule=False):
    """Environment -> mode policies -> lambda -> belief fixed point -> thresholds.

    With `evaluate_rule` the extracted threshold rule is also evaluated on the
    grid, using the solver's eval_tol and eval_max_iter.
    """
    rho = config.environment.rho if rho is None else rho
    settings = config.solver

    with stage("environment"):
        mdp = build_environment(config.environment, rho)
    with stage("mode-policies"):
        policy_pre, values_pre, policy_post, values_post = solve_mode_policies(mdp, settings)
    with stage("lambda"):
        inputs, stationaries = lambda_inputs(mdp, policy_pre, policy_post)
        lam = compute_lambda(inputs)
    with stage("belief-solver"):
        dynamics = BeliefDynamics.from_policy(mdp, policy_pre)
        grid = BeliefGrid.uniform(config.resolved_grid_size())
        table, iterations = solve_fixed_point(dynamics, lam, grid, settings.qcd_tol, settings.qcd_max_iter)
    with stage("thresholds"):
        rule = extract_thresholds(table, dynamics, lam)
    rule_table = None
    if evaluate_rule:
        with stage("rule-evaluation"):
            rule_table = evaluate_switch_rule(rule, dynamics, lam, grid, settings.eval_tol, settings.eval_max_iter)

    logger.info("solved rho=%g: lambda=%.6g, %d belief iterations", rho, lam, iterations)
    return SolvedInstance(
        mdp=mdp,
        policy_pre=policy_pre,
        policy_post=policy_post,
        values_pre=values_pre,
        values_post=values_post,
        lambda_inputs=inputs,
        lam=lam,
        stationaries=stationaries,
        table=table,
        iterations=iterations,
        rule=rule,
        rule_table=rule_table,
    )


def analyze_mixing(mdp, policy_pre, policy_post, t_max):
    """Mixing profile and cost-to-go bound check for each chain M_{i|j}."""
    reports = {}
    with stage("mixing"):
        for i, policy in ((1, policy_pre), (2, policy_post)):
            for j in (1, 2):
                reports[(i, j)] = verify_mixing_bound(mode_chain(mdp, policy, j), mdp.discount, t_max)
    return reports


def simulate_instance(config, solved, workers=None, **options):
    rho = solved.rho
    with stage("simulation"):
        setup = solved.setup(config.initial_distribution)
        return run_experiment(
            setup,
            config.n_episodes,
            config.resolved_horizon(rho),
            config.master_seed,
            workers=config.workers if workers is None else workers,
            **options,
        )
