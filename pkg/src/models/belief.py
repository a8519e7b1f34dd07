from dataclasses import dataclass

import numpy as np

from src.models.mdp import check_stochastic
from src.utils.errors import ModelError

MEMBERSHIP_TOL = 1e-12
CONCAVITY_TOL = 1e-9


@dataclass(frozen=True)
class BeliefGrid:
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 1 or points.size < 2:
            raise ModelError("belief grid needs at least two points")
        if points[0] != 0.0 or points[-1] != 1.0:
            raise ModelError("belief grid must start at 0 and end at 1 exactly")
        if np.any(np.diff(points) <= 0):
            raise ModelError("belief grid must be strictly increasing")
        object.__setattr__(self, "points", points)

    @classmethod
    def uniform(cls, size):
        if size < 2:
            raise ModelError(f"grid size must be at least 2, got {size}")
        return cls(np.linspace(0.0, 1.0, size))

    @property
    def size(self):
        return self.points.size

    @property
    def spacing(self):
        return 1.0 / (self.points.size - 1)

    def interpolation_slack(self, lam):
        """One grid cell of change for a function with slopes bounded by 1 + lambda."""
        return (1.0 + lam) * self.spacing


@dataclass(frozen=True)
class BeliefValueTable:
    """Value of the stopping problem, indexed [grid point, state]."""

    values: np.ndarray
    grid: BeliefGrid

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != self.grid.size:
            raise ModelError(f"value table shape {values.shape} does not match grid of {self.grid.size}")
        object.__setattr__(self, "values", values)

    @property
    def n_states(self):
        return self.values.shape[1]

    def at_zero(self):
        return self.values[0].copy()

    def membership_violation(self, lam):
        """Largest breach of 0 <= V(p, x) <= lambda (1 - p); zero when V is in the class."""
        upper = lam * (1.0 - self.grid.points)[:, None]
        above = np.max(self.values - upper)
        below = np.max(-self.values)
        return float(max(above, below, 0.0))

    def concavity_violation(self):
        """Largest discrete second difference in p, positive when concavity fails."""
        if self.grid.size < 3:
            return 0.0
        second = self.values[:-2] + self.values[2:] - 2.0 * self.values[1:-1]
        return float(max(np.max(second), 0.0))

    def to_rows(self):
        for x in range(self.n_states):
            for i, p in enumerate(self.grid.points):
                yield x, float(p), float(self.values[i, x])


@dataclass(frozen=True)
class SwitchRule:
    """Stop once the belief reaches threshold[x] in the current state x."""

    threshold: np.ndarray

    def __post_init__(self):
        threshold = np.asarray(self.threshold, dtype=float)
        if threshold.ndim != 1:
            raise ModelError("threshold must be a vector over states")
        if np.any(threshold < 0.0) or np.any(threshold > 1.0):
            raise ModelError("thresholds must lie in [0, 1]")
        object.__setattr__(self, "threshold", threshold)

    def should_stop(self, p, x):
        return p >= self.threshold[x]

    def stop_mask(self, grid):
        return grid.points[:, None] >= self.threshold[None, :]

    def to_dict(self):
        return {"threshold": self.threshold.tolist()}


@dataclass(frozen=True)
class BeliefDynamics:
    """Pre- and post-change transition matrices under the pre-change policy.

    `q_pre[x, x_next]` is P1(x_next | x, pi1(x)); `q_post` the same for P2.
    """

    q_pre: np.ndarray
    q_post: np.ndarray
    rho: float

    def __post_init__(self):
        q_pre = np.asarray(self.q_pre, dtype=float)
        q_post = np.asarray(self.q_post, dtype=float)
        if q_pre.ndim != 2 or q_pre.shape != q_post.shape or q_pre.shape[0] != q_pre.shape[1]:
            raise ModelError("belief dynamics need two square matrices of equal shape")
        check_stochastic(q_pre, "q_pre")
        check_stochastic(q_post, "q_post")
        if not 0.0 <= self.rho <= 1.0:
            raise ModelError(f"rho must lie in [0, 1], got {self.rho}")
        object.__setattr__(self, "q_pre", q_pre)
        object.__setattr__(self, "q_post", q_post)

    @property
    def n_states(self):
        return self.q_pre.shape[0]

    @classmethod
    def from_policy(cls, mdp, policy, rho=None):
        policy.validate_for(mdp.n_states, mdp.n_actions)
        states = np.arange(mdp.n_states)
        return cls(
            q_pre=mdp.kernel_pre[states, policy.action_of, :],
            q_post=mdp.kernel_post[states, policy.action_of, :],
            rho=mdp.change_rate if rho is None else rho,
        )
