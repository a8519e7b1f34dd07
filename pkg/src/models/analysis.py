from dataclasses import dataclass, field

import numpy as np

from src.utils.errors import ModelError


@dataclass(frozen=True)
class StationaryDistribution:
    dist: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        dist = np.asarray(self.dist, dtype=float)
        if np.any(dist < 0) or abs(dist.sum() - 1.0) > 1e-12:
            raise ModelError("stationary distribution must be a probability vector")
        object.__setattr__(self, "dist", dist)


@dataclass(frozen=True)
class MixingProfile:
    """Worst-case total-variation distance to stationarity and its geometric envelope."""

    tv_by_step: np.ndarray
    envelope_B: float
    envelope_beta: float

    def envelope(self, t):
        return self.envelope_B * self.envelope_beta ** np.asarray(t, dtype=float)

    @property
    def t_max(self):
        return self.tv_by_step.size - 1


@dataclass(frozen=True)
class MixingBoundReport:
    profile: MixingProfile
    max_slack: float
    min_slack: float
    max_tv_slack: float
    k_max: int
    slack_by_step: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def slack_at(self, t):
        """Smallest geometric-bound slack over start states at horizon t; zero at t = 0."""
        return 0.0 if t == 0 else float(self.slack_by_step[t - 1])


@dataclass(frozen=True)
class LambdaInputs:
    """Average stage costs c_{i|j}' Delta_{i|j} of the four induced chains."""

    avg_cost_21: float
    avg_cost_11: float
    avg_cost_12: float
    avg_cost_22: float
    rho: float

    @property
    def numerator(self):
        return self.avg_cost_21 - self.avg_cost_11

    @property
    def denominator(self):
        return self.avg_cost_12 - self.avg_cost_22

    def with_rho(self, rho):
        return LambdaInputs(self.avg_cost_21, self.avg_cost_11, self.avg_cost_12, self.avg_cost_22, rho)


@dataclass(frozen=True)
class ApproxRegretStats:
    mean_overshoot: float
    prob_false_alarm: float
    mean_undershoot: float

    def __post_init__(self):
        if self.mean_overshoot < 0 or self.mean_undershoot < 0:
            raise ModelError("overshoot and undershoot must be nonnegative")
        if not 0.0 <= self.prob_false_alarm <= 1.0:
            raise ModelError("false alarm probability must lie in [0, 1]")
