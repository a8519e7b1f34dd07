"""Bayesian belief filter and the optimal-stopping Bellman operator on a belief grid.

The belief p_t is the posterior probability that X_t was generated by the
post-change kernel. Before the switch every action comes from the pre-change
policy, so the next state is drawn from the mixture
(1 - p_bar) P1(. | x, pi1(x)) + p_bar P2(. | x, pi1(x)), p_bar = p + rho (1 - p).

Value tables are indexed [grid point, state]. Beliefs produced by the filter
are never snapped to the grid; only value lookups interpolate linearly in p.
"""

import logging
import math

import numpy as np

from src.models.belief import BeliefValueTable, SwitchRule
from src.utils.errors import ConvergenceError, ImpossibleTransitionError, ModelError, ThresholdStructureError

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 1_000_000


def _joint(dyn, x, x_next, p):
    # (1 - p_bar) is formed as (1 - p)(1 - rho) so it stays positive for every p < 1
    stay = (1.0 - p) * (1.0 - dyn.rho)
    return stay * dyn.q_pre[x, x_next], (1.0 - stay) * dyn.q_post[x, x_next]


def belief_update(dyn, x, x_next, p):
    """Bayes update of the belief after observing x -> x_next."""
    if not 0.0 <= p <= 1.0:
        raise ModelError(f"belief must lie in [0, 1], got {p}")
    joint_pre, joint_post = _joint(dyn, x, x_next, p)
    total = joint_pre + joint_post
    if total <= 0.0:
        raise ImpossibleTransitionError(x, x_next)
    return joint_post / total


def mixture_transition(dyn, x, p):
    stay = (1.0 - p) * (1.0 - dyn.rho)
    return stay * dyn.q_pre[x] + (1.0 - stay) * dyn.q_post[x]


def psi(grid, n_states, lam):
    """Stopping cost lambda (1 - p), the seed of the value iteration."""
    return np.repeat((lam * (1.0 - grid.points))[:, None], n_states, axis=1)


class BeliefOperator:
    """The Bellman operator for one (dynamics, grid, lambda) triple.

    Posterior beliefs, mixture weights and interpolation brackets depend only
    on the dynamics and the grid, so they are computed once here and every
    application is a pair of gathers.
    """

    def __init__(self, dyn, grid, lam):
        if lam < 0:
            raise ModelError(f"lambda must be nonnegative, got {lam}")
        self.dyn = dyn
        self.grid = grid
        self.lam = float(lam)

        p = grid.points[:, None, None]
        stay = (1.0 - p) * (1.0 - dyn.rho)
        joint_pre = stay * dyn.q_pre[None, :, :]
        joint_post = (1.0 - stay) * dyn.q_post[None, :, :]
        mass = joint_pre + joint_post
        posterior = np.divide(joint_post, mass, out=np.zeros_like(mass), where=mass > 0)

        points = grid.points
        lower = np.clip(np.searchsorted(points, posterior, side="right") - 1, 0, points.size - 2)
        weight = (posterior - points[lower]) / (points[lower + 1] - points[lower])

        self.mass = mass
        self.posterior = posterior
        self.lower = lower
        self.weight = weight
        self.next_state = np.broadcast_to(np.arange(dyn.n_states), mass.shape)
        self.stop_cost = psi(grid, dyn.n_states, self.lam)

    @property
    def n_states(self):
        return self.dyn.n_states

    def expected_next_value(self, values):
        """E[V(Phi, X+) | p, x] with V interpolated linearly in p."""
        below = values[self.lower, self.next_state]
        above = values[self.lower + 1, self.next_state]
        interpolated = below + self.weight * (above - below)
        return np.sum(self.mass * interpolated, axis=2)

    def continuation(self, values):
        return self.grid.points[:, None] + self.expected_next_value(values)

    def apply(self, values):
        return np.minimum(self.stop_cost, self.continuation(values))


def bellman_apply(table, dyn, lam, operator=None):
    operator = operator or BeliefOperator(dyn, table.grid, lam)
    return BeliefValueTable(operator.apply(table.values), table.grid)


def solve_fixed_point(dyn, lam, grid, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, initial=None):
    """Iterate the Bellman operator from psi (or `initial`) until the sup-norm residual is below tol.

    Returns the table and the number of applications performed.
    """
    if tol <= 0:
        raise ModelError(f"tol must be positive, got {tol}")
    operator = BeliefOperator(dyn, grid, lam)
    values = operator.stop_cost.copy() if initial is None else np.array(initial, dtype=float)

    residual = math.inf
    for iteration in range(1, max_iter + 1):
        updated = operator.apply(values)
        residual = float(np.max(np.abs(updated - values)))
        values = updated
        if residual <= tol:
            logger.info("belief value iteration converged in %d iterations (residual %.3e)",
                        iteration, residual)
            return BeliefValueTable(values, grid), iteration
        if iteration % 1000 == 0:
            logger.debug("belief value iteration %d: residual %.3e", iteration, residual)
    raise ConvergenceError("belief value iteration", max_iter, residual)


def finite_horizon_dp(dyn, lam, grid, horizon):
    """Backward induction from the terminal cost psi; returns the t = 0 table."""
    if horizon < 0:
        raise ModelError(f"horizon must be nonnegative, got {horizon}")
    operator = BeliefOperator(dyn, grid, lam)
    values = operator.stop_cost.copy()
    for _ in range(horizon):
        values = operator.apply(values)
    return BeliefValueTable(values, grid)


def stopping_mask(table, dyn, lam, operator=None):
    """Grid cells where stopping is optimal; ties stop."""
    operator = operator or BeliefOperator(dyn, table.grid, lam)
    return operator.stop_cost <= operator.continuation(table.values)


def extract_thresholds(table, dyn, lam):
    """Per-state threshold: the smallest grid belief at which stopping is optimal.

    A single continue cell directly above that belief is tolerated and the
    threshold stays at the first stop cell, so the returned rule may stop one
    grid cell earlier than the table does there. Any other continue cell above
    the first stop raises ThresholdStructureError.
    """
    mask = stopping_mask(table, dyn, lam)
    points = table.grid.points
    thresholds = np.empty(table.n_states)
    for x in range(table.n_states):
        stops = np.flatnonzero(mask[:, x])
        # at p = 1 stopping costs nothing, so every column has a stop cell
        first = stops[0]
        continues_after = np.flatnonzero(~mask[first:, x])
        if continues_after.size and continues_after[-1] > 1:
            raise ThresholdStructureError(
                f"stopping set of state {x} is not an upper interval: continues at "
                f"p={points[first + continues_after[-1]]:.6g} above first stop p={points[first]:.6g}"
            )
        if continues_after.size:
            logger.debug("state %d: continue cell at p=%.6g above threshold %.6g", x,
                         points[first + 1], points[first])
        thresholds[x] = points[first]
    return SwitchRule(thresholds)


def evaluate_switch_rule(rule, dyn, lam, grid, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Cost-to-go of a fixed threshold rule on the grid.

    Solves V(p, x) = lambda (1 - p) where p >= threshold(x), and
    p + E[V(Phi, X+)] elsewhere, by successive substitution.
    """
    if rule.threshold.shape != (dyn.n_states,):
        raise ModelError("rule must give one threshold per state")
    operator = BeliefOperator(dyn, grid, lam)
    stop = rule.stop_mask(grid)
    cap = lam + 1.0 / dyn.rho if dyn.rho > 0 else math.inf
    values = operator.stop_cost.copy()

    residual = math.inf
    for iteration in range(1, max_iter + 1):
        updated = np.where(stop, operator.stop_cost, operator.continuation(values))
        if np.max(updated) > cap:
            raise ConvergenceError("switch rule evaluation (value cap exceeded)", iteration,
                                   float(np.max(updated)))
        residual = float(np.max(np.abs(updated - values)))
        values = updated
        if residual <= tol:
            return BeliefValueTable(values, grid)
    raise ConvergenceError("switch rule evaluation", max_iter, residual)


def initial_value(table, initial_dist):
    """E[V(0, X0)] for X0 ~ initial_dist, the optimal value of the stopping problem."""
    mu = np.asarray(initial_dist, dtype=float)
    if mu.shape != (table.n_states,):
        raise ModelError(f"initial distribution must have {table.n_states} entries")
    return float(mu @ table.at_zero())
