import click

from src.models.config import InventorySpec
from src.routes.common import experiment_options, output_path
from src.services.pipeline import simulate_instance, solve_instance
from src.utils.csv_export import write_csv, write_manifest


def report_row(config, report):
    row = {'rho': report.rho}
    if isinstance(config.environment, InventorySpec):
        row['N'] = config.environment.capacity
        row['d'] = config.environment.lost_demand_cost
    row.update({
        'lambda': report.lam,
        'J_MO': report.mean_cost_mo,
        'J_CD': report.mean_cost_cd,
        'stderr_MO': report.stderr_cost_mo,
        'stderr_CD': report.stderr_cost_cd,
        'PFA': report.pfa,
        'mean_delay': report.mean_delay,
        't_stat': report.t_stat,
    })
    return row


@click.command('simulate')
@experiment_options
@click.option('--episodes-csv', is_flag=True, help='Also write one row per episode.')
def simulate(config, episodes_csv):
    """Compare the CD and MO controllers by coupled Monte Carlo."""
    rows = []
    reports = []
    for rho in config.rhos:
        solved = solve_instance(config, rho)
        report = simulate_instance(config, solved, keep_episodes=episodes_csv)
        rows.append(report_row(config, report))
        reports.append(report.to_dict())
        click.echo(f'rho={rho:g}: J_MO={report.mean_cost_mo:.6g} J_CD={report.mean_cost_cd:.6g} '
                   f'PFA={report.pfa:.4f}')
        if episodes_csv:
            write_csv([record.to_dict() for record in report.episodes],
                      output_path(config, f'episodes_rho_{rho:g}.csv'))

    write_csv(rows, output_path(config, 'simulate.csv'))
    write_manifest(output_path(config, 'manifest.json'), config, command='simulate', reports=reports)
