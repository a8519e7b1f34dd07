"""Stationary distributions, total-variation mixing profiles and cost-to-go gap bounds."""

import logging

import numpy as np
from scipy.sparse.csgraph import connected_components

from src.models.analysis import MixingBoundReport, MixingProfile, StationaryDistribution
from src.services.mdp_core import finite_horizon_cost, horizon_cost_table
from src.utils.errors import ChainStructureError, MixingBoundViolation, ModelError

logger = logging.getLogger(__name__)

FIXED_POINT_TOL = 1e-10
ENVELOPE_B_CAP = 1e6
BETA_FLOOR = 1e-12
BISECTION_STEPS = 200


def _boolean_power(pattern, exponent):
    """Support of pattern^exponent, by repeated squaring on 0/1 matrices."""
    result = np.eye(pattern.shape[0], dtype=np.int64)
    base = pattern.astype(np.int64)
    while exponent:
        if exponent & 1:
            result = np.minimum(result @ base, 1)
        base = np.minimum(base @ base, 1)
        exponent >>= 1
    return result


def check_ergodicity(transition):
    """Class structure of a finite chain.

    Returns a dict with 'valid' and 'message' plus the recurrent class, the
    transient states and whether the whole chain is irreducible. A chain is
    valid when it has exactly one closed class and that class is aperiodic.
    """
    transition = np.asarray(transition, dtype=float)
    n = transition.shape[0]
    pattern = transition > 0

    irreducible = bool(np.all(_boolean_power(pattern | np.eye(n, dtype=bool), n) > 0))

    n_classes, labels = connected_components(pattern.astype(float), directed=True, connection="strong")
    closed = []
    for label in range(n_classes):
        members = np.flatnonzero(labels == label)
        outside = np.ones(n, dtype=bool)
        outside[members] = False
        if not pattern[np.ix_(members, outside)].any():
            closed.append(members)

    if len(closed) != 1:
        return {
            'valid': False,
            'check': 'single-recurrent-class',
            'message': f'chain has {len(closed)} closed classes',
            'irreducible': irreducible,
        }

    recurrent = closed[0]
    k = recurrent.size
    sub = pattern[np.ix_(recurrent, recurrent)]
    # Wielandt: an irreducible k x k pattern is primitive iff its ((k-1)^2 + 1)-th power is positive
    if not np.all(_boolean_power(sub, (k - 1) ** 2 + 1) > 0):
        return {
            'valid': False,
            'check': 'aperiodicity',
            'message': 'recurrent class is periodic',
            'irreducible': irreducible,
        }

    transient = np.setdiff1d(np.arange(n), recurrent)
    return {
        'valid': True,
        'check': None,
        'message': 'single aperiodic recurrent class',
        'irreducible': irreducible,
        'recurrent_class': recurrent.tolist(),
        'transient_states': transient.tolist(),
    }


def stationary_distribution(chain):
    structure = check_ergodicity(chain.transition)
    if not structure['valid']:
        raise ChainStructureError(structure['check'], structure['message'])

    n = chain.n_states
    system = chain.transition.T - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    dist = np.linalg.solve(system, rhs)
    dist = np.clip(dist, 0.0, None)
    dist /= dist.sum()

    residual = float(np.abs(dist @ chain.transition - dist).sum())
    if residual > FIXED_POINT_TOL:
        raise ChainStructureError("fixed-point", f"stationary residual {residual:.3e} exceeds tolerance")
    return StationaryDistribution(dist, residual=residual)


def tv_profile(chain, t_max, stationary=None):
    """d(t) = max_x TV(delta_x P^t, Delta) for t = 0..t_max."""
    if stationary is None:
        stationary = stationary_distribution(chain).dist
    power = np.eye(chain.n_states)
    profile = np.empty(t_max + 1)
    for t in range(t_max + 1):
        profile[t] = 0.5 * np.max(np.abs(power - stationary[None, :]).sum(axis=1))
        power = power @ chain.transition
    return profile


def _envelope_feasible(tv, beta, cap):
    steps = np.arange(tv.size)
    return np.all(tv <= cap * beta ** steps)


def fit_envelope(tv):
    """Smallest beta with d(t) <= B beta^t on the recorded range and B capped.

    B is capped at ENVELOPE_B_CAP * d(0); with the cap fixed, feasibility is
    monotone in beta, so beta is found by bisection. A profile that reaches
    zero after t = 0 gets beta = BETA_FLOOR.
    """
    d0 = float(tv[0])
    tail = tv[1:]
    if d0 <= 0.0 or not np.any(tail > 0.0):
        return max(d0, 0.0), BETA_FLOOR

    cap = ENVELOPE_B_CAP * d0
    lo, hi = BETA_FLOOR, 1.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if _envelope_feasible(tv, mid, cap):
            hi = mid
        else:
            lo = mid
    beta = hi
    steps = np.arange(tv.size)
    positive = tv > 0
    B = float(np.max(tv[positive] / beta ** steps[positive]))
    return B, beta


def mixing_profile(chain, t_max):
    if t_max < 1:
        raise ModelError(f"t_max must be at least 1, got {t_max}")
    tv = tv_profile(chain, t_max)
    rises = np.diff(tv)
    if np.any(rises > 1e-12):
        t = int(np.argmax(rises)) + 1
        raise ChainStructureError("tv-monotonicity", f"d(t) increased at t={t}")
    B, beta = fit_envelope(tv)
    return MixingProfile(tv_by_step=tv, envelope_B=B, envelope_beta=beta)


def cost_to_go_gap(chain, mu, discount, k, infinite=False, stationary=None):
    """|J^k(mu) - (1 - gamma^k) / (1 - gamma) c' Delta|."""
    if stationary is None:
        stationary = stationary_distribution(chain).dist
    average = float(chain.cost_vec @ stationary)
    if infinite:
        steady = average / (1.0 - discount)
    else:
        steady = (1.0 - discount ** k) / (1.0 - discount) * average
    return abs(finite_horizon_cost(chain, mu, k, discount, infinite=infinite) - steady)


def verify_mixing_bound(chain, discount, k_max):
    """Check the geometric cost-to-go bound for every point-mass start and k = 1..k_max.

    Also checks the intermediate bound E^k <= 2 ||c||_inf sum_{t<k} gamma^t d(t).
    Slack is reported relative to the geometric bound.
    """
    stationary = stationary_distribution(chain).dist
    profile = mixing_profile(chain, k_max)
    c_inf = float(np.max(np.abs(chain.cost_vec)))
    average = float(chain.cost_vec @ stationary)

    ks = np.arange(1, k_max + 1)
    gb = discount * profile.envelope_beta
    geometric = 2.0 * c_inf * profile.envelope_B * (1.0 - gb ** ks) / (1.0 - gb)
    discounted_tv = np.cumsum(discount ** np.arange(k_max) * profile.tv_by_step[:k_max])
    intermediate = 2.0 * c_inf * discounted_tv

    costs = horizon_cost_table(chain, discount, k_max)[1:]
    steady = (1.0 - discount ** ks) / (1.0 - discount) * average
    gaps = np.abs(costs - steady[:, None])

    tol = 1e-9 * max(1.0, c_inf / (1.0 - discount))
    over_tv = gaps - intermediate[:, None]
    if np.max(over_tv) > tol:
        k_idx, x = np.unravel_index(np.argmax(over_tv), over_tv.shape)
        raise MixingBoundViolation("intermediate", int(x), int(ks[k_idx]),
                                   float(gaps[k_idx, x]), float(intermediate[k_idx]))
    slack = geometric[:, None] - gaps
    if np.min(slack) < -tol:
        k_idx, x = np.unravel_index(np.argmin(slack), slack.shape)
        raise MixingBoundViolation("geometric", int(x), int(ks[k_idx]),
                                   float(gaps[k_idx, x]), float(geometric[k_idx]))

    logger.debug("mixing bound holds up to k=%d (min slack %.3e)", k_max, float(np.min(slack)))
    return MixingBoundReport(
        profile=profile,
        max_slack=float(np.max(slack)),
        min_slack=float(np.min(slack)),
        max_tv_slack=float(np.max(intermediate[:, None] - gaps)),
        k_max=k_max,
        slack_by_step=np.min(slack, axis=1),
    )
