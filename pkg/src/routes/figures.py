import click

from src.routes.common import experiment_options, output_path
from src.services.pipeline import simulate_instance, solve_instance
from src.utils.csv_export import write_csv, write_manifest


@click.command('figure1')
@experiment_options
def figure1(config):
    """Per-state thresholds and false-alarm probability across the rho sweep."""
    thresholds = []
    pfa = []
    for rho in config.rhos:
        solved = solve_instance(config, rho)
        # only tau and Gamma matter for PFA
        report = simulate_instance(config, solved, detection_only=True)
        thresholds.extend(
            {'rho': rho, 'state': x, 'threshold': float(p)} for x, p in enumerate(solved.rule.threshold)
        )
        pfa.append({'rho': rho, 'PFA': report.pfa, 'stderr': report.pfa_stderr})

    write_csv(thresholds, output_path(config, 'thresholds.csv'))
    write_csv(pfa, output_path(config, 'pfa.csv'))
    write_manifest(output_path(config, 'manifest.json'), config, command='figure1')
