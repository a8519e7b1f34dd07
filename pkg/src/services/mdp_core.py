"""Mode-optimal policy synthesis and policy evaluation for finite MDPs.

Costs are minimized everywhere. Kernels are indexed [x, u, x_next].
"""

import logging
import math

import numpy as np

from src.models.mdp import DeterministicPolicy, InducedChain, ValueVector, check_stochastic
from src.utils.errors import ConvergenceError, ModelError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 2_000_000


def bellman_backup(kernel, stage_cost, discount, values):
    """State-action costs Q(x, u) = c(x, u) + gamma * sum_x' P(x'|x, u) V(x')."""
    return stage_cost + discount * (kernel @ values)


def greedy_policy(kernel, stage_cost, discount, values):
    # np.argmin keeps the first minimizer, i.e. the lowest action index on ties
    q = bellman_backup(kernel, stage_cost, discount, values)
    return DeterministicPolicy(np.argmin(q, axis=1))


def value_iteration(kernel, stage_cost, discount, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve one mode's discounted MDP from V = 0.

    Stops when the sup-norm Bellman residual is below `tol`, or earlier when
    its span is: shifting V by mid(residual) / (1 - gamma) then leaves a
    residual of at most span / 2, and the greedy policy is unchanged by the
    shift.
    """
    kernel = np.asarray(kernel, dtype=float)
    stage_cost = np.asarray(stage_cost, dtype=float)
    check_stochastic(kernel, "kernel")
    if tol <= 0:
        raise ModelError(f"tol must be positive, got {tol}")

    values = np.zeros(kernel.shape[0])
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        updated = bellman_backup(kernel, stage_cost, discount, values).min(axis=1)
        diff = updated - values
        residual = float(np.max(np.abs(diff)))
        if residual <= tol:
            values = updated
            break
        span = float(np.max(diff) - np.min(diff))
        if span <= tol:
            shift = 0.5 * (np.max(diff) + np.min(diff)) / (1.0 - discount)
            values = bellman_backup(kernel, stage_cost, discount, values + shift).min(axis=1)
            logger.warning("value iteration exited on span seminorm after %d iterations", iteration)
            break
        if iteration % 1000 == 0:
            logger.debug("value iteration %d: residual %.3e span %.3e", iteration, residual, span)
        values = updated
    else:
        raise ConvergenceError("value iteration", max_iter, residual)

    final = bellman_backup(kernel, stage_cost, discount, values).min(axis=1)
    residual = float(np.max(np.abs(final - values)))
    logger.info("value iteration converged in %d iterations (residual %.3e)", iteration, residual)
    policy = greedy_policy(kernel, stage_cost, discount, values)
    return policy, ValueVector(values, iterations=iteration, residual=residual)


def induced_chain(policy, kernel, cost_source):
    """Chain obtained by running `policy` on `kernel`.

    `cost_source` is either a stage-cost array [x, u] (the chain's cost is then
    c(x, policy(x))) or a ready-made per-state cost vector.
    """
    kernel = np.asarray(kernel, dtype=float)
    n_states, n_actions = kernel.shape[:2]
    policy.validate_for(n_states, n_actions)
    states = np.arange(n_states)
    cost_source = np.asarray(cost_source, dtype=float)
    if cost_source.ndim == 2:
        cost_vec = cost_source[states, policy.action_of]
    else:
        cost_vec = cost_source
    return InducedChain(kernel[states, policy.action_of, :], cost_vec)


def mode_chain(mdp, policy, mode):
    """M_{i|j} with the mode-j stage cost c_{i|j}."""
    return induced_chain(policy, mdp.kernel(mode), mdp.cost(mode))


def _check_distribution(mu, n_states):
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (n_states,):
        raise ModelError(f"initial distribution must have {n_states} entries")
    if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
        raise ModelError("initial distribution is not normalized")
    return mu


def policy_values(chain, discount):
    """Infinite-horizon values from the linear system (I - gamma P) v = c."""
    n = chain.n_states
    return np.linalg.solve(np.eye(n) - discount * chain.transition, chain.cost_vec)


def finite_horizon_cost(chain, initial_dist, horizon, discount, infinite=False):
    """Discounted cost sum_{t<T} gamma^t c' (mu P^t); `infinite=True` solves for T = inf."""
    mu = _check_distribution(initial_dist, chain.n_states)
    if infinite:
        return float(mu @ policy_values(chain, discount))
    if horizon < 0:
        raise ModelError(f"horizon must be nonnegative, got {horizon}")
    return float(mu @ horizon_cost_table(chain, discount, horizon)[horizon])


def horizon_cost_table(chain, discount, horizon):
    """Row k holds J^k(delta_x) for every start state x, k = 0..horizon."""
    table = np.zeros((horizon + 1, chain.n_states))
    for k in range(1, horizon + 1):
        table[k] = chain.cost_vec + discount * (chain.transition @ table[k - 1])
    return table
