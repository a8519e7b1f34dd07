import math
from dataclasses import dataclass, field
from typing import List, Optional, Union


@dataclass(frozen=True)
class RandomMdpSpec:
    n_states: int = 5
    n_actions: int = 3
    seed: int = 42
    rho: float = 0.01
    discount: float = 0.999

    kind = "random-mdp"


@dataclass(frozen=True)
class InventorySpec:
    """Lost-sales inventory with Poisson demand before the change, uniform after."""

    capacity: int = 10
    order_cost: float = 1.0
    holding_cost: float = 5.0
    lost_demand_cost: float = 100.0
    demand_rate: float = 2.0
    discount: float = 0.999
    rho: float = 0.01
    demand_tail_eps: float = 1e-12
    order_cost_basis: str = "state"

    kind = "inventory"


@dataclass(frozen=True)
class CustomKernelSpec:
    kernel_pre: list
    kernel_post: list
    stage_cost: list
    discount: float
    rho: float
    stage_cost_post: Optional[list] = None

    kind = "custom-kernels"


EnvironmentSpec = Union[RandomMdpSpec, InventorySpec, CustomKernelSpec]


@dataclass(frozen=True)
class SolverSettings:
    vi_tol: float = 1e-10
    vi_max_iter: int = 2_000_000
    qcd_tol: float = 1e-9
    qcd_max_iter: int = 1_000_000
    eval_tol: float = 1e-9
    eval_max_iter: int = 1_000_000


@dataclass(frozen=True)
class ExperimentConfig:
    environment: EnvironmentSpec
    grid_size: Optional[int] = None
    solver: SolverSettings = field(default_factory=SolverSettings)
    rho_sweep: Optional[List[float]] = None
    n_episodes: int = 6000
    horizon: Optional[int] = None
    master_seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    mixing_t_max: int = 200
    initial_distribution: Optional[List[float]] = None

    @property
    def rhos(self):
        return list(self.rho_sweep) if self.rho_sweep else [self.environment.rho]

    def resolved_grid_size(self):
        if self.grid_size is not None:
            return self.grid_size
        return 100 if self.environment.kind == "inventory" else 1000

    def resolved_horizon(self, rho):
        if self.horizon is not None:
            return self.horizon
        if self.environment.kind == "inventory":
            return 1000
        return math.ceil(2.0 / rho)
