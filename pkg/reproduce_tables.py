#!/usr/bin/env python3
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import click

from src.models.config import ExperimentConfig, InventorySpec, RandomMdpSpec
from src.routes.simulate import report_row
from src.services.pipeline import simulate_instance, solve_instance
from src.utils.csv_export import write_csv

TABLE1_RHOS = [0.01, 0.0078, 0.0060, 0.0046, 0.0036, 0.0028]
TABLE2_GRID = [(10, 100), (10, 200), (10, 300), (15, 100), (15, 200), (15, 300)]
TABLE2_LAMBDAS = [19.39, 8.06, 7.10, 15.49, 6.97, 5.33]


def random_mdp_config(out, workers, seed):
    return ExperimentConfig(
        environment=RandomMdpSpec(),
        rho_sweep=TABLE1_RHOS,
        n_episodes=6000,
        master_seed=seed,
        output_dir=out,
        workers=workers,
    )


def inventory_config(capacity, lost_demand_cost, basis, out, workers, seed):
    return ExperimentConfig(
        environment=InventorySpec(capacity=capacity, lost_demand_cost=lost_demand_cost, order_cost_basis=basis),
        n_episodes=4000,
        master_seed=seed,
        output_dir=out,
        workers=workers,
    )


def table1(out, workers, seed):
    print("Random MDP: CD vs MO over the rho sweep")
    config = random_mdp_config(out, workers, seed)
    rows = []
    thresholds = []
    pfa = []
    for rho in config.rhos:
        solved = solve_instance(config, rho)
        report = simulate_instance(config, solved)
        rows.append(report_row(config, report))
        thresholds.extend({'rho': rho, 'state': x, 'threshold': float(p)} for x, p in enumerate(solved.rule.threshold))
        pfa.append({'rho': rho, 'PFA': report.pfa, 'stderr': report.pfa_stderr})
        print(f"  rho={rho:.4f}  J_MO={report.mean_cost_mo:8.2f}  J_CD={report.mean_cost_cd:8.2f}  PFA={report.pfa:.3f}")
    write_csv(rows, os.path.join(out, 'table1.csv'))
    write_csv(thresholds, os.path.join(out, 'figure1_thresholds.csv'))
    write_csv(pfa, os.path.join(out, 'figure1_pfa.csv'))


def table2(out, workers, seed, basis):
    print(f"Inventory control (order cost basis: {basis})")
    rows = []
    for (capacity, d), reference in zip(TABLE2_GRID, TABLE2_LAMBDAS):
        config = inventory_config(capacity, d, basis, out, workers, seed)
        solved = solve_instance(config)
        report = simulate_instance(config, solved)
        row = report_row(config, report)
        row['reference_lambda'] = reference
        rows.append(row)
        print(f"  N={capacity:2d} d={d:3d}  lambda={solved.lam:6.2f} (reference {reference:5.2f})  "
              f"J_MO={report.mean_cost_mo:9.1f}  J_CD={report.mean_cost_cd:9.1f}")
    write_csv(rows, os.path.join(out, f'table2_{basis}.csv'))


@click.command()
@click.option("--out", default="out/tables", show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--skip-table1", is_flag=True)
def main(out, workers, seed, skip_table1):
    """Run the random MDP and inventory experiments."""
    if not skip_table1:
        table1(out, workers, seed)
    for basis in ("state", "order"):
        table2(out, workers, seed, basis)
    print("Done.")


if __name__ == "__main__":
    main()
