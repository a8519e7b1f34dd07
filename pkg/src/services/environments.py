"""Environment constructors: the seeded random MDP pair and the lost-sales inventory model."""

import logging

import numpy as np
from scipy.stats import poisson

from src.models.config import CustomKernelSpec, InventorySpec, RandomMdpSpec
from src.models.mdp import ModePairMdp
from src.utils.errors import ModelError

logger = logging.getLogger(__name__)

ORDER_COST_BASES = ("state", "order")


def gen_random_mdp(spec):
    """P1 with iid Unif[0, 1) entries, row-normalized; P2 is P1 with actions shifted cyclically.

    P2(. | x, a) = P1(. | x, a - 1 mod m), so the kernel of action 0 under P1
    reappears under action 1 in P2. Costs are iid Unif[0, 1) and shared by both modes.
    """
    if spec.n_states < 1 or spec.n_actions < 1:
        raise ModelError("random MDP needs at least one state and one action")
    rng = np.random.default_rng(spec.seed)
    n, m = spec.n_states, spec.n_actions

    kernel_pre = rng.random((n, m, n))
    kernel_pre /= kernel_pre.sum(axis=2, keepdims=True)
    kernel_post = kernel_pre[:, (np.arange(m) + m - 1) % m, :]
    stage_cost = rng.random((n, m))

    return ModePairMdp(
        kernel_pre=kernel_pre,
        kernel_post=kernel_post,
        stage_cost=stage_cost,
        discount=spec.discount,
        change_rate=spec.rho,
    )


def _validate_inventory(spec):
    if spec.capacity < 1:
        raise ModelError(f"capacity must be at least 1, got {spec.capacity}")
    if min(spec.order_cost, spec.holding_cost, spec.lost_demand_cost) < 0:
        raise ModelError("inventory unit costs must be nonnegative")
    if spec.demand_rate <= 0:
        raise ModelError(f"demand rate must be positive, got {spec.demand_rate}")
    if not 0 < spec.demand_tail_eps < 1:
        raise ModelError("demand_tail_eps must lie in (0, 1)")
    if spec.order_cost_basis not in ORDER_COST_BASES:
        raise ModelError(f"order_cost_basis must be one of {ORDER_COST_BASES}")


def poisson_demand_pmf(rate, tail_eps):
    """Poisson pmf on 0..W_max, W_max the smallest support point with tail mass below tail_eps.

    The tail beyond W_max is lumped into W_max.
    """
    bound = poisson.isf(tail_eps, rate)
    tails = poisson.sf(np.arange(int(bound) + 2), rate) if np.isfinite(bound) else np.ones(1)
    below = np.flatnonzero(tails < tail_eps)
    if below.size == 0:
        raise ModelError(f"cannot truncate Poisson({rate:g}) demand at tail mass {tail_eps:g}")
    w_max = int(below[0])
    pmf = poisson.pmf(np.arange(w_max + 1), rate)
    pmf[-1] += tails[w_max]
    return pmf / pmf.sum()


def demand_pmf(spec, mode):
    if mode == 1:
        return poisson_demand_pmf(spec.demand_rate, spec.demand_tail_eps)
    return np.full(spec.capacity + 1, 1.0 / (spec.capacity + 1))


def _level_tables(spec, pmf):
    """Per stocked level I = 0..N: next-state distribution and expected holding/lost-sales cost."""
    levels = np.arange(spec.capacity + 1)
    demand = np.arange(pmf.size)
    residual = levels[:, None] - demand[None, :]
    next_state = np.maximum(residual, 0)

    transition = np.zeros((levels.size, levels.size))
    for level in levels:
        np.add.at(transition[level], next_state[level], pmf)

    holding = spec.holding_cost * np.maximum(residual, 0) @ pmf
    lost = spec.lost_demand_cost * np.maximum(-residual, 0) @ pmf
    return transition, holding + lost


def _order_term(spec):
    states = np.arange(spec.capacity + 1)[:, None]
    orders = np.arange(spec.capacity + 1)[None, :]
    if spec.order_cost_basis == "state":
        return spec.order_cost * np.broadcast_to(states, (states.size, orders.size)).astype(float)
    return spec.order_cost * np.broadcast_to(orders, (states.size, orders.size)).astype(float)


def _mode_arrays(spec, mode):
    transition, level_cost = _level_tables(spec, demand_pmf(spec, mode))
    n = spec.capacity + 1
    stocked = np.minimum(np.arange(n)[:, None] + np.arange(n)[None, :], spec.capacity)
    return transition[stocked], _order_term(spec) + level_cost[stocked]


def build_inventory(spec):
    """States and actions are 0..N; I = min(x + u, N) and x' = max(0, I - w).

    Stage costs are expectations over the mode's demand pmf, so the returned
    MDP carries a separate post-change cost array.
    """
    _validate_inventory(spec)
    kernel_pre, cost_pre = _mode_arrays(spec, 1)
    kernel_post, cost_post = _mode_arrays(spec, 2)
    logger.debug("inventory model N=%d d=%g built (%d demand points before change)",
                 spec.capacity, spec.lost_demand_cost, demand_pmf(spec, 1).size)
    return ModePairMdp(
        kernel_pre=kernel_pre,
        kernel_post=kernel_post,
        stage_cost=cost_pre,
        discount=spec.discount,
        change_rate=spec.rho,
        stage_cost_post=cost_post,
    )


def inventory_expected_stage_costs(spec, policy, mode):
    """c_{i|j}: E_j[c(x, pi_i(x))] for every inventory level x."""
    _validate_inventory(spec)
    policy.validate_for(spec.capacity + 1, spec.capacity + 1)
    _, cost = _mode_arrays(spec, mode)
    return cost[np.arange(spec.capacity + 1), policy.action_of]


def build_custom(spec):
    return ModePairMdp(
        kernel_pre=np.asarray(spec.kernel_pre, dtype=float),
        kernel_post=np.asarray(spec.kernel_post, dtype=float),
        stage_cost=np.asarray(spec.stage_cost, dtype=float),
        discount=spec.discount,
        change_rate=spec.rho,
        stage_cost_post=None if spec.stage_cost_post is None else np.asarray(spec.stage_cost_post, dtype=float),
    )


def build_environment(spec, rho=None):
    """Dispatch on the spec type; `rho` overrides the spec's change rate."""
    if isinstance(spec, RandomMdpSpec):
        mdp = gen_random_mdp(spec)
    elif isinstance(spec, InventorySpec):
        mdp = build_inventory(spec)
    elif isinstance(spec, CustomKernelSpec):
        mdp = build_custom(spec)
    else:
        raise ModelError(f"unknown environment spec {type(spec).__name__}")
    return mdp if rho is None else mdp.with_change_rate(rho)
