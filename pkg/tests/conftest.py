import json

import numpy as np
import pytest

from src.models.belief import BeliefDynamics, BeliefGrid, SwitchRule
from src.models.config import RandomMdpSpec
from src.models.mdp import DeterministicPolicy, ModePairMdp
from src.models.simulation import SwitchingSetup
from src.services.environments import gen_random_mdp
from src.services.qcd_solver import extract_thresholds, solve_fixed_point

# Two states, two actions. Under P1 action a leads to state a w.p. 0.9; P2 swaps
# the actions. Being in state 1 costs 1, so pi1 = [0, 0], pi2 = [1, 1] and
# lambda * rho = 1 exactly.
SWITCHING_KERNEL_PRE = [[[0.9, 0.1], [0.1, 0.9]], [[0.9, 0.1], [0.1, 0.9]]]
SWITCHING_KERNEL_POST = [[[0.1, 0.9], [0.9, 0.1]], [[0.1, 0.9], [0.9, 0.1]]]
SWITCHING_COST = [[0.0, 0.0], [1.0, 1.0]]


def make_switching_mdp(rho=0.05, discount=0.99):
    return ModePairMdp(
        kernel_pre=np.array(SWITCHING_KERNEL_PRE),
        kernel_post=np.array(SWITCHING_KERNEL_POST),
        stage_cost=np.array(SWITCHING_COST),
        discount=discount,
        change_rate=rho,
    )


def make_setup(mdp, policy_pre, policy_post, lam, grid_size=101, threshold=None):
    if threshold is None:
        dyn = BeliefDynamics.from_policy(mdp, policy_pre)
        table, _ = solve_fixed_point(dyn, lam, BeliefGrid.uniform(grid_size))
        rule = extract_thresholds(table, dyn, lam)
    else:
        rule = SwitchRule(np.full(mdp.n_states, float(threshold)))
    return SwitchingSetup(mdp, policy_pre, policy_post, rule, lam)


@pytest.fixture
def switching_mdp():
    return make_switching_mdp()


@pytest.fixture
def switching_policies():
    return DeterministicPolicy([0, 0]), DeterministicPolicy([1, 1])


@pytest.fixture
def switching_setup(switching_mdp, switching_policies):
    policy_pre, policy_post = switching_policies
    return make_setup(switching_mdp, policy_pre, policy_post, lam=1.0 / switching_mdp.change_rate)


@pytest.fixture
def toy_dynamics():
    return BeliefDynamics(
        q_pre=np.array([[0.5, 0.5], [0.3, 0.7]]),
        q_post=np.array([[0.25, 0.75], [0.6, 0.4]]),
        rho=0.1,
    )


@pytest.fixture
def random_mdp():
    return gen_random_mdp(RandomMdpSpec(n_states=5, n_actions=3, seed=42, rho=0.01, discount=0.999))


@pytest.fixture
def switching_config(tmp_path):
    """Writes a custom-kernel config and returns (path, dict)."""
    data = {
        'environment': {
            'kind': 'custom-kernels',
            'kernel_pre': SWITCHING_KERNEL_PRE,
            'kernel_post': SWITCHING_KERNEL_POST,
            'stage_cost': SWITCHING_COST,
            'discount': 0.99,
            'rho': 0.05,
        },
        'grid_size': 51,
        'n_episodes': 20,
        'horizon': 60,
        'master_seed': 3,
        'output_dir': str(tmp_path / 'out'),
        'mixing_t_max': 30,
    }

    def write(**changes):
        merged = {**data, **changes}
        path = tmp_path / 'config.json'
        path.write_text(json.dumps(merged))
        return str(path), merged

    return write
