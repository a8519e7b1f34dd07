import click

from src.routes.common import experiment_options, output_path
from src.services.environments import build_environment
from src.services.pipeline import analyze_mixing, solve_mode_policies, stage
from src.utils.csv_export import write_csv, write_manifest


@click.command('mixing')
@experiment_options
def mixing(config):
    """Total-variation profiles, fitted envelopes and bound slack of the four induced chains."""
    with stage('environment'):
        mdp = build_environment(config.environment)
    with stage('mode-policies'):
        policy_pre, _, policy_post, _ = solve_mode_policies(mdp, config.solver)
    reports = analyze_mixing(mdp, policy_pre, policy_post, config.mixing_t_max)

    rows = []
    for (i, j), report in sorted(reports.items()):
        profile = report.profile
        for t, tv in enumerate(profile.tv_by_step):
            rows.append({
                'i': i, 'j': j, 't': t, 'tv': float(tv),
                'envelope_B': profile.envelope_B, 'envelope_beta': profile.envelope_beta,
                'bound_slack': report.slack_at(t),
            })
        click.echo(f'M_{i}|{j}: B={profile.envelope_B:.4g} beta={profile.envelope_beta:.4g} '
                   f'min slack={report.min_slack:.3e}')

    write_csv(rows, output_path(config, 'mixing.csv'))
    write_manifest(output_path(config, 'manifest.json'), config, command='mixing')
