from dataclasses import dataclass, field, asdict
from typing import Dict, Optional, Tuple

import numpy as np

from src.models.analysis import LambdaInputs, StationaryDistribution
from src.models.belief import BeliefDynamics, BeliefValueTable, SwitchRule
from src.models.mdp import DeterministicPolicy, ModePairMdp, ValueVector
from src.utils.errors import ModelError


@dataclass(frozen=True)
class SwitchingSetup:
    """Everything an episode needs: environment, both policies, the rule and lambda."""

    mdp: ModePairMdp
    policy_pre: DeterministicPolicy
    policy_post: DeterministicPolicy
    rule: SwitchRule
    lam: float
    initial_dist: Optional[np.ndarray] = None

    def __post_init__(self):
        n = self.mdp.n_states
        self.policy_pre.validate_for(n, self.mdp.n_actions)
        self.policy_post.validate_for(n, self.mdp.n_actions)
        if self.rule.threshold.shape != (n,):
            raise ModelError("switch rule must give one threshold per state")
        mu = np.full(n, 1.0 / n) if self.initial_dist is None else np.asarray(self.initial_dist, dtype=float)
        if mu.shape != (n,) or np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
            raise ModelError("initial distribution must be a probability vector over states")
        object.__setattr__(self, "initial_dist", mu)

    @property
    def rho(self):
        return self.mdp.change_rate

    @property
    def dynamics(self):
        return BeliefDynamics.from_policy(self.mdp, self.policy_pre)

    def with_rule(self, rule):
        return SwitchingSetup(self.mdp, self.policy_pre, self.policy_post, rule, self.lam, self.initial_dist)


@dataclass(frozen=True)
class EpisodeRecord:
    index: int
    initial_state: int
    change_point: int
    switch_time: int
    discounted_cost_cd: float
    discounted_cost_mo: float
    discounted_regret: float
    false_alarm: bool
    delay: int
    undershoot: int
    overshoot_g: float
    truncated: bool
    regret_to_go: float = float("nan")

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class SimReport:
    n_episodes: int
    master_seed: int
    rho: float
    lam: float
    horizon: int
    mean_cost_cd: float
    stderr_cost_cd: float
    mean_cost_mo: float
    stderr_cost_mo: float
    pfa: float
    pfa_stderr: float
    mean_delay: float
    mean_undershoot: float
    undershoot_stderr: float
    approx_regret: float
    approx_regret_stderr: float
    mean_exact_regret: float
    exact_regret_stderr: float
    truncated_fraction: float
    truncation_bound: float
    t_stat: float
    t_df: float
    episodes: Tuple[EpisodeRecord, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not 0.0 <= self.pfa <= 1.0:
            raise ModelError("PFA must lie in [0, 1]")

    def to_dict(self):
        data = asdict(self)
        data.pop("episodes")
        return data


@dataclass(frozen=True)
class SolvedInstance:
    """Output of the solve pipeline for one change rate."""

    mdp: ModePairMdp
    policy_pre: DeterministicPolicy
    policy_post: DeterministicPolicy
    values_pre: ValueVector
    values_post: ValueVector
    lambda_inputs: LambdaInputs
    lam: float
    stationaries: Dict[Tuple[int, int], StationaryDistribution]
    table: BeliefValueTable
    iterations: int
    rule: SwitchRule
    rule_table: Optional[BeliefValueTable] = None

    @property
    def rho(self):
        return self.mdp.change_rate

    def rule_gap(self):
        """Sup-norm distance between the threshold rule's cost-to-go and the optimal table."""
        if self.rule_table is None:
            return None
        return float(np.max(np.abs(self.rule_table.values - self.table.values)))

    def setup(self, initial_dist=None):
        return SwitchingSetup(self.mdp, self.policy_pre, self.policy_post, self.rule, self.lam, initial_dist)
