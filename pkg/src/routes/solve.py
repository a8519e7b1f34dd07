import click

from src.routes.common import experiment_options, output_path
from src.services.pipeline import solve_instance
from src.utils.csv_export import write_csv, write_manifest


def solved_rows(solved):
    """CSV rows for one solved change rate, keyed by file name."""
    rho = solved.rho
    states = range(solved.mdp.n_states)
    inputs = solved.lambda_inputs
    return {
        'policies.csv': [
            {'rho': rho, 'state': x, 'pi1': int(solved.policy_pre.action_of[x]),
             'pi2': int(solved.policy_post.action_of[x])}
            for x in states
        ],
        'stationary.csv': [
            {'rho': rho, 'i': i, 'j': j, 'state': x, 'probability': float(dist.dist[x])}
            for (i, j), dist in sorted(solved.stationaries.items())
            for x in states
        ],
        'lambda.csv': [{
            'rho': rho, 'lambda': solved.lam, 'lambda_rho': solved.lam * rho,
            'numerator': inputs.numerator, 'denominator': inputs.denominator,
            'avg_cost_11': inputs.avg_cost_11, 'avg_cost_12': inputs.avg_cost_12,
            'avg_cost_21': inputs.avg_cost_21, 'avg_cost_22': inputs.avg_cost_22,
        }],
        'values.csv': [
            {'rho': rho, 'state': x, 'p': p, 'value': value}
            for x, p, value in solved.table.to_rows()
        ],
        'thresholds.csv': [
            {'rho': rho, 'state': x, 'threshold': float(solved.rule.threshold[x])}
            for x in states
        ],
    }


def residuals(solved):
    return {
        'rho': solved.rho,
        'lambda': solved.lam,
        'value_iteration': {
            'pi1': {'iterations': solved.values_pre.iterations, 'residual': solved.values_pre.residual},
            'pi2': {'iterations': solved.values_post.iterations, 'residual': solved.values_post.residual},
        },
        'stationary_residuals': {f'{i}|{j}': dist.residual for (i, j), dist in sorted(solved.stationaries.items())},
        'belief_iterations': solved.iterations,
        'membership_violation': solved.table.membership_violation(solved.lam),
        'concavity_violation': solved.table.concavity_violation(),
        'rule_gap': solved.rule_gap(),
    }


@click.command('solve')
@experiment_options
def solve(config):
    """Solve mode policies, lambda, the belief value table and thresholds."""
    tables = {}
    runs = []
    for rho in config.rhos:
        solved = solve_instance(config, rho, evaluate_rule=True)
        for name, rows in solved_rows(solved).items():
            tables.setdefault(name, []).extend(rows)
        runs.append(residuals(solved))
        click.echo(f'rho={rho:g}: lambda={solved.lam:.6g}, thresholds={solved.rule.threshold.round(4).tolist()}')

    for name, rows in tables.items():
        write_csv(rows, output_path(config, name))
    write_manifest(output_path(config, 'manifest.json'), config, command='solve', runs=runs)
