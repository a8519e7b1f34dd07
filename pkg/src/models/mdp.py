from dataclasses import dataclass
from typing import Optional

import numpy as np

from src.utils.errors import ModelError

ROW_SUM_TOL = 1e-12


def check_stochastic(array, name):
    """Raise ModelError unless every last-axis row of `array` is a distribution."""
    if np.any(array < 0):
        raise ModelError(f"{name} has negative entries")
    sums = array.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0))) if sums.size else 0.0
    if worst > ROW_SUM_TOL:
        raise ModelError(f"{name} rows do not sum to 1 (max deviation {worst:.3e})")


@dataclass(frozen=True)
class ModePairMdp:
    """Finite MDP whose kernel switches from `kernel_pre` to `kernel_post`.

    Kernels are indexed [x, u, x_next]; costs are indexed [x, u]. When the
    stage cost itself depends on the mode (inventory demand), the post-change
    expectation lives in `stage_cost_post`; otherwise it mirrors `stage_cost`.
    """

    kernel_pre: np.ndarray
    kernel_post: np.ndarray
    stage_cost: np.ndarray
    discount: float
    change_rate: float
    stage_cost_post: Optional[np.ndarray] = None

    def __post_init__(self):
        pre = np.asarray(self.kernel_pre, dtype=float)
        post = np.asarray(self.kernel_post, dtype=float)
        cost = np.asarray(self.stage_cost, dtype=float)
        cost_post = cost if self.stage_cost_post is None else np.asarray(self.stage_cost_post, dtype=float)

        if pre.ndim != 3 or pre.shape[0] != pre.shape[2]:
            raise ModelError(f"kernel_pre must have shape (n, m, n), got {pre.shape}")
        if post.shape != pre.shape:
            raise ModelError(f"kernel_post shape {post.shape} differs from kernel_pre {pre.shape}")
        if cost.shape != pre.shape[:2] or cost_post.shape != pre.shape[:2]:
            raise ModelError(f"stage costs must have shape {pre.shape[:2]}")
        check_stochastic(pre, "kernel_pre")
        check_stochastic(post, "kernel_post")
        if not (np.all(np.isfinite(cost)) and np.all(np.isfinite(cost_post))):
            raise ModelError("stage costs must be finite")
        if not 0.0 < self.discount < 1.0:
            raise ModelError(f"discount must lie in (0, 1), got {self.discount}")
        if not 0.0 < self.change_rate < 1.0:
            raise ModelError(f"change_rate must lie in (0, 1), got {self.change_rate}")

        object.__setattr__(self, "kernel_pre", pre)
        object.__setattr__(self, "kernel_post", post)
        object.__setattr__(self, "stage_cost", cost)
        object.__setattr__(self, "stage_cost_post", cost_post)

    @property
    def n_states(self):
        return self.kernel_pre.shape[0]

    @property
    def n_actions(self):
        return self.kernel_pre.shape[1]

    def kernel(self, mode):
        return self.kernel_pre if mode == 1 else self.kernel_post

    def cost(self, mode):
        return self.stage_cost if mode == 1 else self.stage_cost_post

    def with_change_rate(self, rho):
        return ModePairMdp(
            kernel_pre=self.kernel_pre,
            kernel_post=self.kernel_post,
            stage_cost=self.stage_cost,
            discount=self.discount,
            change_rate=rho,
            stage_cost_post=self.stage_cost_post,
        )


@dataclass(frozen=True)
class DeterministicPolicy:
    action_of: np.ndarray

    def __post_init__(self):
        actions = np.asarray(self.action_of, dtype=np.int64)
        if actions.ndim != 1:
            raise ModelError("policy must map each state to one action")
        object.__setattr__(self, "action_of", actions)

    def validate_for(self, n_states, n_actions):
        if self.action_of.shape[0] != n_states:
            raise ModelError(f"policy covers {self.action_of.shape[0]} states, kernel has {n_states}")
        if np.any(self.action_of < 0) or np.any(self.action_of >= n_actions):
            raise ModelError(f"policy actions must lie in [0, {n_actions})")

    def to_dict(self):
        return {"action_of": self.action_of.tolist()}


@dataclass(frozen=True)
class ValueVector:
    values: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ModelError("value vector has non-finite entries")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class InducedChain:
    """Markov chain M_{i|j}: policy i run under the mode-j kernel."""

    transition: np.ndarray
    cost_vec: np.ndarray

    def __post_init__(self):
        transition = np.asarray(self.transition, dtype=float)
        cost_vec = np.asarray(self.cost_vec, dtype=float)
        if transition.ndim != 2 or transition.shape[0] != transition.shape[1]:
            raise ModelError(f"transition must be square, got {transition.shape}")
        if cost_vec.shape != (transition.shape[0],):
            raise ModelError("cost vector length must match the number of states")
        check_stochastic(transition, "transition")
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "cost_vec", cost_vec)

    @property
    def n_states(self):
        return self.transition.shape[0]
