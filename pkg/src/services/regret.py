"""Tradeoff coefficient lambda and the approximate-regret objective."""

import logging

from src.models.analysis import ApproxRegretStats, LambdaInputs
from src.services.chain_analysis import stationary_distribution
from src.services.mdp_core import mode_chain
from src.utils.errors import LambdaSignError

logger = logging.getLogger(__name__)


def lambda_inputs(mdp, policy_pre, policy_post):
    """Average stage costs c_{i|j}' Delta_{i|j} from exact stationary distributions."""
    averages = {}
    stationaries = {}
    for i, policy in ((1, policy_pre), (2, policy_post)):
        for j in (1, 2):
            chain = mode_chain(mdp, policy, j)
            stationary = stationary_distribution(chain)
            stationaries[(i, j)] = stationary
            averages[(i, j)] = float(chain.cost_vec @ stationary.dist)
    inputs = LambdaInputs(
        avg_cost_21=averages[(2, 1)],
        avg_cost_11=averages[(1, 1)],
        avg_cost_12=averages[(1, 2)],
        avg_cost_22=averages[(2, 2)],
        rho=mdp.change_rate,
    )
    return inputs, stationaries


def compute_lambda(inputs):
    failed = []
    if not inputs.numerator > 0:
        failed.append("numerator")
    if not inputs.denominator > 0:
        failed.append("denominator")
    if failed:
        raise LambdaSignError(failed, inputs.numerator, inputs.denominator)
    lam = inputs.numerator / (inputs.denominator * inputs.rho)
    logger.info("lambda = %.6g (lambda * rho = %.6g)", lam, lam * inputs.rho)
    return lam


def approx_regret(stats, lam):
    """E[(tau - Gamma)+] + lambda P{Gamma > tau}, proportional to the approximate regret."""
    return stats.mean_overshoot + lam * stats.prob_false_alarm


def stats_from_report(report):
    return ApproxRegretStats(
        mean_overshoot=report.mean_delay,
        prob_false_alarm=report.pfa,
        mean_undershoot=report.mean_undershoot,
    )
